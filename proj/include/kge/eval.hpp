#pragma once
/// @file eval.hpp
/// @brief Filtered link-prediction ranking and MRR / Hits@k aggregation.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kge/data.hpp"
#include "kge/models.hpp"
#include "kge/parallel.hpp"

namespace kge {

enum class Direction { Tail, Head };

/// (anchor, relation, ?) for tail queries, (?, relation, anchor) for head queries.
struct Query {
    EntityId anchor = 0;
    RelationId relation = 0;
    Direction direction = Direction::Tail;
};

enum class Split { Valid, Test };

struct RelationStats {
    std::size_t count = 0;
    double mrr = 0.0;
    double hits10 = 0.0;
};

struct RankingReport {
    /// One rank per query; for each triple the tail query precedes the head query.
    std::vector<std::int64_t> ranks;
    double mrr = 0.0;
    std::map<int, double> hits;  // k -> fraction with rank <= k
    /// Tail-direction statistics keyed by relation name.
    std::map<std::string, RelationStats> per_relation;
};

/// Rank of `gold` among `scores`, skipping candidates listed in the sorted
/// `excluded` set (other than gold). Ties count half, rounded up, so a
/// constant scorer lands mid-table instead of first.
inline std::int64_t rank_from_scores(std::span<const double> scores, EntityId gold, std::span<const EntityId> excluded) {
    const double g = scores[static_cast<std::size_t>(gold)];
    if (std::isnan(g)) throw NumericError("gold score is NaN");
    std::int64_t greater = 0, equal = 0;
    auto ex = excluded.begin();
    for (std::size_t e = 0; e < scores.size(); ++e) {
        while (ex != excluded.end() && static_cast<std::size_t>(*ex) < e) ++ex;
        if (static_cast<EntityId>(e) == gold) continue;
        if (ex != excluded.end() && static_cast<std::size_t>(*ex) == e) continue;
        if (scores[e] > g)
            ++greater;
        else if (scores[e] == g)
            ++equal;
    }
    return 1 + greater + (equal + 1) / 2;
}

/// Scores every entity as the missing slot of `query` into `out`.
inline void score_query(const Model& model, const Query& query, QueryState& qs, Span out) {
    if (query.direction == Direction::Tail)
        model.score_all_tails(query.anchor, query.relation, qs, out);
    else
        model.score_all_heads(query.relation, query.anchor, qs, out);
}

inline std::span<const EntityId> filter_set(const FilterIndex& filter, const Query& q) {
    return q.direction == Direction::Tail ? filter.tails(q.anchor, q.relation) : filter.heads(q.anchor, q.relation);
}

/// Filtered rank of `gold` for `query`. With `filtered` false the raw rank is
/// returned (the filter is still checked for the gold answer).
inline std::int64_t rank_query(const Model& model, const Query& query, EntityId gold, const FilterIndex& filter,
                               bool filtered = true) {
    model.check_entity(query.anchor);
    model.check_relation(query.relation);
    model.check_entity(gold);
    const auto known = filter_set(filter, query);
    if (!std::binary_search(known.begin(), known.end(), gold))
        throw std::logic_error("filter index does not contain the gold answer");
    QueryState qs(model.dim());
    std::vector<double> scores(model.n_entities());
    score_query(model, query, qs, scores);
    return rank_from_scores(scores, gold, filtered ? known : std::span<const EntityId>{});
}

/// Aggregates MRR and Hits@{1,3,10}.
inline void summarize(RankingReport& report) {
    report.hits = {{1, 0.0}, {3, 0.0}, {10, 0.0}};
    report.mrr = 0.0;
    if (report.ranks.empty()) return;
    for (auto r : report.ranks) {
        report.mrr += 1.0 / static_cast<double>(r);
        for (auto& [k, v] : report.hits)
            if (r <= k) v += 1.0;
    }
    const auto n = static_cast<double>(report.ranks.size());
    report.mrr /= n;
    for (auto& [k, v] : report.hits) v /= n;
}

struct EvalOptions {
    Split split = Split::Test;
    bool both_directions = true;
    std::size_t threads = 1;
};

/// Filtered evaluation over a split. Head queries for (h, r, t) are answered as
/// the tail query (t, r^-1, ?) in reciprocal mode, and by scoring (c, r, t)
/// over all candidate heads c otherwise.
inline RankingReport evaluate(const Model& model, const Dataset& ds, const EvalOptions& opts = {}) {
    const auto& triples = opts.split == Split::Test ? ds.store.test : ds.store.valid;
    const std::size_t per = opts.both_directions ? 2 : 1;
    RankingReport report;
    report.ranks.assign(triples.size() * per, 0);

    parallel_chunks(triples.size(), opts.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        QueryState qs(model.dim());
        std::vector<double> scores(model.n_entities());
        for (std::size_t i = begin; i < end; ++i) {
            const Triple& t = triples[i];
            const Query tail_q{t.head, t.relation, Direction::Tail};
            score_query(model, tail_q, qs, scores);
            report.ranks[i * per] = rank_from_scores(scores, t.tail, filter_set(ds.filter, tail_q));
            if (!opts.both_directions) continue;
            const Query head_q = ds.dict.reciprocal ? Query{t.tail, ds.dict.inverse(t.relation), Direction::Tail}
                                                    : Query{t.tail, t.relation, Direction::Head};
            score_query(model, head_q, qs, scores);
            report.ranks[i * per + 1] = rank_from_scores(scores, t.head, filter_set(ds.filter, head_q));
        }
    });

    summarize(report);

    std::map<std::string, std::vector<std::int64_t>> by_relation;
    for (std::size_t i = 0; i < triples.size(); ++i)
        by_relation[ds.dict.relation_name(triples[i].relation)].push_back(report.ranks[i * per]);
    for (auto& [name, ranks] : by_relation) {
        RelationStats s;
        s.count = ranks.size();
        for (auto r : ranks) {
            s.mrr += 1.0 / static_cast<double>(r);
            if (r <= 10) s.hits10 += 1.0;
        }
        s.mrr /= static_cast<double>(s.count);
        s.hits10 /= static_cast<double>(s.count);
        report.per_relation[name] = s;
    }
    return report;
}

/// Tail-direction statistics per relation; relations without test triples are absent.
inline std::map<std::string, RelationStats> per_relation_report(const Model& model, const Dataset& ds,
                                                                std::size_t threads = 1) {
    return evaluate(model, ds, {Split::Test, false, threads}).per_relation;
}

// ---------------------------------------------------------------------------
// report files

inline void write_report(const RankingReport& report, const std::filesystem::path& dir,
                         const std::string& label = "test") {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "metrics.jsonl");
        out << nlohmann::json{{"split", label}, {"metric", "mrr"}, {"value", report.mrr}}.dump() << '\n';
        for (const auto& [k, v] : report.hits)
            out << nlohmann::json{{"split", label}, {"metric", "hits@" + std::to_string(k)}, {"value", v}}.dump()
                << '\n';
        out << nlohmann::json{{"split", label}, {"metric", "queries"}, {"value", report.ranks.size()}}.dump() << '\n';
    }
    {
        std::ofstream out(dir / "per_relation.jsonl");
        for (const auto& [name, s] : report.per_relation)
            out << nlohmann::json{{"relation", name}, {"count", s.count}, {"mrr", s.mrr}, {"hits@10", s.hits10}}.dump()
                << '\n';
    }
    {
        std::ofstream out(dir / "ranks.txt");
        for (auto r : report.ranks) out << r << '\n';
    }
    {
        std::ofstream out(dir / "report.txt");
        char line[256];
        std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s\n", "split", "MRR", "H@1", "H@3", "H@10");
        out << line;
        std::snprintf(line, sizeof line, "%-10s %8.4f %8.4f %8.4f %8.4f\n\n", label.c_str(), report.mrr,
                      report.hits.at(1), report.hits.at(3), report.hits.at(10));
        out << line;
        std::snprintf(line, sizeof line, "%-36s %7s %8s %8s\n", "relation", "count", "MRR", "H@10");
        out << line;
        for (const auto& [name, s] : report.per_relation) {
            std::snprintf(line, sizeof line, "%-36s %7zu %8.4f %8.4f\n", name.c_str(), s.count, s.mrr, s.hits10);
            out << line;
        }
    }
}

}  // namespace kge
