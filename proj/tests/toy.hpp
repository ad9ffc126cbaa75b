#pragma once
// Temporary dataset directories for tests.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace toy {

using Rows = std::vector<std::vector<std::string>>;

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("kge_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_rows(const std::filesystem::path& file, const Rows& rows) {
    std::ofstream out(file);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << r[i];
        out << '\n';
    }
}

inline std::filesystem::path dataset(const std::string& name, const Rows& train, const Rows& valid, const Rows& test) {
    const auto dir = temp_dir(name);
    write_rows(dir / "train.txt", train);
    write_rows(dir / "valid.txt", valid);
    write_rows(dir / "test.txt", test);
    return dir;
}

/// Random KG: n_triples distinct facts over n_entities and n_relations,
/// split 80/10/10. Names are "e<i>" and "r<j>".
inline std::filesystem::path random_dataset(const std::string& name, int n_entities, int n_relations, int n_triples,
                                            unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> e(0, n_entities - 1), r(0, n_relations - 1);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> seen;
    while (static_cast<int>(rows.size()) < n_triples) {
        const int h = e(rng), rel = r(rng);
        // mostly structured: tail = h + rel + 1 (mod n), sometimes random
        const int t = (rng() % 5 == 0) ? e(rng) : (h + rel + 1) % n_entities;
        std::string key = std::to_string(h) + "," + std::to_string(rel) + "," + std::to_string(t);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        rows.push_back({"e" + std::to_string(h), "r" + std::to_string(rel), "e" + std::to_string(t)});
    }
    const std::size_t n_train = rows.size() * 8 / 10, n_valid = rows.size() / 10;
    Rows train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    Rows valid(rows.begin() + static_cast<std::ptrdiff_t>(n_train),
               rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    Rows test(rows.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), rows.end());
    return dataset(name, train, valid, test);
}

}  // namespace toy
