#pragma once
// In-memory knowledge graph with a chosen shape, for timing runs that must
// not depend on downloaded benchmarks.

#include <random>
#include <string>

#include "kge/data.hpp"

namespace synthetic {

inline kge::Dataset make(std::size_t n_entities, std::size_t n_relations, std::size_t n_train, std::size_t n_test,
                         std::uint64_t seed, bool reciprocal) {
    kge::Dataset ds;
    for (std::size_t e = 0; e < n_entities; ++e) ds.dict.entities.intern("e" + std::to_string(e));
    for (std::size_t r = 0; r < n_relations; ++r) ds.dict.relations.intern("r" + std::to_string(r));
    ds.dict.base_relations = n_relations;
    ds.dict.reciprocal = reciprocal;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<kge::EntityId> e(0, static_cast<kge::EntityId>(n_entities) - 1);
    std::uniform_int_distribution<kge::RelationId> r(0, static_cast<kge::RelationId>(n_relations) - 1);
    auto draw = [&] { return kge::Triple{e(rng), r(rng), e(rng)}; };
    for (std::size_t i = 0; i < n_train; ++i) ds.store.train.push_back(draw());
    for (std::size_t i = 0; i < n_test; ++i) ds.store.test.push_back(draw());
    if (reciprocal) {
        for (std::size_t i = 0; i < n_train; ++i) {
            const auto t = ds.store.train[i];
            ds.store.train.push_back({t.tail, ds.dict.inverse(t.relation), t.head});
        }
    }
    for (const auto* split : {&ds.store.train, &ds.store.test})
        for (const auto& t : *split) {
            ds.filter.add(t);
            if (reciprocal && static_cast<std::size_t>(t.relation) < n_relations)
                ds.filter.add({t.tail, ds.dict.inverse(t.relation), t.head});
        }
    ds.filter.finalize();
    return ds;
}

}  // namespace synthetic
