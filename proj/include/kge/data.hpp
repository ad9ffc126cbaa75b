#pragma once
/// @file data.hpp
/// @brief Triple files, id dictionaries, splits, filter index and negative sampling.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kge/error.hpp"
#include "kge/models.hpp"

namespace kge {

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    bool operator==(const Triple&) const = default;
};

/// Bijective name <-> dense id map.
class Vocabulary {
public:
    /// Returns the id of `name`, inserting it if unseen.
    std::int32_t intern(const std::string& name) {
        auto [it, inserted] = ids_.try_emplace(name, static_cast<std::int32_t>(names_.size()));
        if (inserted) names_.push_back(name);
        return it->second;
    }

    void insert_with_id(std::int32_t id, const std::string& name) {
        if (id != static_cast<std::int32_t>(names_.size()))
            throw DataError("dictionary ids must be dense and in order (got " + std::to_string(id) + ")");
        if (!ids_.try_emplace(name, id).second) throw DataError("duplicate dictionary entry '" + name + "'");
        names_.push_back(name);
    }

    std::int32_t find(const std::string& name) const {
        auto it = ids_.find(name);
        return it == ids_.end() ? -1 : it->second;
    }

    const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    /// FNV-1a over the newline-joined names; stable across platforms.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& n : names_) {
            for (unsigned char ch : n) {
                h ^= ch;
                h *= 1099511628211ULL;
            }
            h ^= static_cast<unsigned char>('\n');
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    std::unordered_map<std::string, std::int32_t> ids_;
    std::vector<std::string> names_;
};

struct Dictionary {
    Vocabulary entities;
    Vocabulary relations;
    /// Relations present in the files; with reciprocal mode the model sees
    /// 2 * base_relations ids, where id r + base_relations is the inverse of r.
    std::size_t base_relations = 0;
    bool reciprocal = false;

    std::size_t n_entities() const { return entities.size(); }
    std::size_t n_relations() const { return reciprocal ? 2 * base_relations : base_relations; }

    RelationId inverse(RelationId r) const {
        const auto n = static_cast<RelationId>(base_relations);
        return r < n ? r + n : r - n;
    }

    std::string relation_name(RelationId r) const {
        if (static_cast<std::size_t>(r) < base_relations) return relations.name(r);
        return relations.name(r - static_cast<RelationId>(base_relations)) + "_reverse";
    }
};

struct TripleStore {
    /// Training triples, including mirrored (t, r^-1, h) triples in reciprocal mode.
    std::vector<Triple> train;
    /// Validation and test triples as they appear in the files.
    std::vector<Triple> valid;
    std::vector<Triple> test;
};

/// (h, r) -> true tails and (t, r) -> true heads over all splits.
class FilterIndex {
public:
    void add(const Triple& t) {
        tails_[key(t.head, t.relation)].push_back(t.tail);
        heads_[key(t.tail, t.relation)].push_back(t.head);
    }

    /// Sorts and deduplicates the stored sets; call once after all adds.
    void finalize() {
        for (auto* m : {&tails_, &heads_}) {
            for (auto& [k, v] : *m) {
                std::sort(v.begin(), v.end());
                v.erase(std::unique(v.begin(), v.end()), v.end());
            }
        }
    }

    std::span<const EntityId> tails(EntityId head, RelationId r) const { return lookup(tails_, key(head, r)); }
    std::span<const EntityId> heads(EntityId tail, RelationId r) const { return lookup(heads_, key(tail, r)); }

    bool contains_tail(EntityId head, RelationId r, EntityId tail) const {
        auto s = tails(head, r);
        return std::binary_search(s.begin(), s.end(), tail);
    }
    bool contains_head(EntityId tail, RelationId r, EntityId head) const {
        auto s = heads(tail, r);
        return std::binary_search(s.begin(), s.end(), head);
    }

private:
    using Map = std::unordered_map<std::uint64_t, std::vector<EntityId>>;
    Map tails_, heads_;

    static std::uint64_t key(EntityId e, RelationId r) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e)) << 32) | static_cast<std::uint32_t>(r);
    }
    static std::span<const EntityId> lookup(const Map& m, std::uint64_t k) {
        auto it = m.find(k);
        if (it == m.end()) return {};
        return it->second;
    }
};

struct Dataset {
    Dictionary dict;
    TripleStore store;
    FilterIndex filter;
};

namespace detail {

struct RawTriple {
    std::string head, relation, tail;
};

inline std::vector<RawTriple> read_triples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<RawTriple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        RawTriple t;
        const auto a = line.find('\t');
        const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
        if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected head<TAB>relation<TAB>tail");
        t.head = line.substr(0, a);
        t.relation = line.substr(a + 1, b - a - 1);
        t.tail = line.substr(b + 1);
        if (t.head.empty() || t.relation.empty() || t.tail.empty())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty field");
        out.push_back(std::move(t));
    }
    return out;
}

inline void read_dict(const std::filesystem::path& path, Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected id<TAB>name");
        std::int32_t id = 0;
        try {
            id = std::stoi(line.substr(0, tab));
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad id");
        }
        vocab.insert_with_id(id, line.substr(tab + 1));
    }
}

}  // namespace detail

/// Loads `train.txt`, `valid.txt` and `test.txt` from `dir`.
///
/// Without dictionary files, ids follow first appearance while reading the
/// split files in sorted file-name order. `entities.dict` / `relations.dict`
/// (id<TAB>name) fix the ids instead, and any name missing from them is an
/// error. In reciprocal mode each training triple (h, r, t) also yields
/// (t, r^-1, h) and the filter index covers both directions.
inline Dataset load_dataset(const std::filesystem::path& dir, bool reciprocal) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());

    const std::vector<std::string> files = {"test.txt", "train.txt", "valid.txt"};  // sorted
    std::unordered_map<std::string, std::vector<detail::RawTriple>> raw;
    for (const auto& f : files) raw[f] = detail::read_triples(dir / f);

    Dataset ds;
    ds.dict.reciprocal = reciprocal;
    const bool fixed_entities = fs::exists(dir / "entities.dict");
    const bool fixed_relations = fs::exists(dir / "relations.dict");
    if (fixed_entities) detail::read_dict(dir / "entities.dict", ds.dict.entities);
    if (fixed_relations) detail::read_dict(dir / "relations.dict", ds.dict.relations);

    auto entity_id = [&](const std::string& name, const std::string& file) {
        if (!fixed_entities) return ds.dict.entities.intern(name);
        const auto id = ds.dict.entities.find(name);
        if (id < 0) throw DataError(file + ": unknown entity '" + name + "'");
        return id;
    };
    auto relation_id = [&](const std::string& name, const std::string& file) {
        if (!fixed_relations) return ds.dict.relations.intern(name);
        const auto id = ds.dict.relations.find(name);
        if (id < 0) throw DataError(file + ": unknown relation '" + name + "'");
        return id;
    };

    std::unordered_map<std::string, std::vector<Triple>> encoded;
    for (const auto& f : files) {
        auto& out = encoded[f];
        out.reserve(raw[f].size());
        for (const auto& t : raw[f])
            out.push_back({entity_id(t.head, f), relation_id(t.relation, f), entity_id(t.tail, f)});
    }
    ds.dict.base_relations = ds.dict.relations.size();

    ds.store.valid = std::move(encoded["valid.txt"]);
    ds.store.test = std::move(encoded["test.txt"]);
    ds.store.train = std::move(encoded["train.txt"]);
    if (reciprocal) {
        const std::size_t n = ds.store.train.size();
        ds.store.train.reserve(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const Triple t = ds.store.train[i];
            ds.store.train.push_back({t.tail, ds.dict.inverse(t.relation), t.head});
        }
    }

    for (const auto* split : {&ds.store.train, &ds.store.valid, &ds.store.test}) {
        for (const Triple& t : *split) {
            ds.filter.add(t);
            if (reciprocal && static_cast<std::size_t>(t.relation) < ds.dict.base_relations)
                ds.filter.add({t.tail, ds.dict.inverse(t.relation), t.head});
        }
    }
    ds.filter.finalize();
    return ds;
}

/// Corrupts `triple` k times with uniformly drawn entities. With
/// `tails_only` every sample replaces the tail; otherwise each sample
/// independently replaces the head or the tail with probability 1/2.
template <class Rng>
std::vector<Triple> negative_sample(const Triple& triple, std::size_t k, std::size_t n_entities, bool tails_only,
                                    Rng& rng) {
    if (k == 0) throw InputError("negative sample count must be at least 1");
    std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(n_entities) - 1);
    std::bernoulli_distribution coin(0.5);
    std::vector<Triple> out(k, triple);
    for (auto& t : out) {
        const bool corrupt_head = !tails_only && coin(rng);
        (corrupt_head ? t.head : t.tail) = pick(rng);
    }
    return out;
}

}  // namespace kge
