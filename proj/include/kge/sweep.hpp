#pragma once
/// @file sweep.hpp
/// @brief Train-and-evaluate grid over model kinds and embedding dimensions.

#include <ostream>
#include <span>
#include <vector>

#include "kge/eval.hpp"
#include "kge/training.hpp"

namespace kge {

struct SweepRow {
    ModelKind kind = ModelKind::RotE;
    std::size_t dim = 0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
};

/// Trains every (kind, dim) pair from the same seed and evaluates it on the
/// test split.
inline std::vector<SweepRow> dimension_sweep(std::span<const ModelKind> kinds, std::span<const std::size_t> dims,
                                             const Dataset& ds, const ModelConfig& base, const TrainConfig& cfg,
                                             std::ostream* progress = nullptr) {
    std::vector<SweepRow> rows;
    for (ModelKind kind : kinds) {
        for (std::size_t d : dims) {
            ModelConfig mc = base;
            mc.kind = kind;
            mc.dim = d;
            mc.n_entities = ds.dict.n_entities();
            mc.n_relations = ds.dict.n_relations();
            auto res = train(Model(mc, cfg.seed), ds, cfg);
            const auto rep = evaluate(res.model, ds, {Split::Test, true, cfg.threads});
            rows.push_back({kind, d, rep.mrr, rep.hits.at(1), rep.hits.at(3), rep.hits.at(10)});
            if (progress)
                *progress << to_string(kind) << " d=" << d << " mrr=" << rep.mrr << " hits@10=" << rep.hits.at(10)
                          << '\n';
        }
    }
    return rows;
}

/// model,dim,mrr,hits@1,hits@3,hits@10
inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "model,dim,mrr,hits@1,hits@3,hits@10\n";
    for (const auto& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%s,%zu,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(r.kind)).c_str(), r.dim,
                      r.mrr, r.hits1, r.hits3, r.hits10);
        out << line;
    }
}

}  // namespace kge
