#pragma once
/// @file checkpoint.hpp
/// @brief Model persistence: a JSON manifest plus one flat little-endian array per tensor.
///
/// Layout of a checkpoint directory:
///
///     manifest.json      kind, dim, sizes, gamma, alpha mode, distance, seed,
///                        dictionary hashes and the tensor table
///     <tensor>.f64       rows * cols little-endian IEEE-754 doubles, row-major
///     entities.dict      id<TAB>name, one line per entity
///     relations.dict     id<TAB>name, one line per base relation
///
/// Exported embeddings use the same layout, optionally with `.f32` arrays.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kge/data.hpp"
#include "kge/error.hpp"
#include "kge/models.hpp"

namespace kge {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

template <class U>
U byteswap(U v) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out = static_cast<U>((out << 8) | (v & 0xff));
        v >>= 8;
    }
    return out;
}

template <class T>
void write_le(std::ofstream& out, const std::vector<double>& values) {
    std::vector<char> buf(values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const T v = static_cast<T>(values[i]);
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        U bits = std::bit_cast<U>(v);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap(bits);
        std::memcpy(buf.data() + i * sizeof(T), &bits, sizeof(T));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<double> read_f64(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<char> buf(count * 8);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()) || in.peek() != std::char_traits<char>::eof())
        throw DataError(path.string() + ": size does not match the manifest");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, buf.data() + i * 8, 8);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap(bits);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

inline void write_dict(const std::filesystem::path& path, const std::vector<std::string>& names) {
    std::ofstream out(path);
    for (std::size_t i = 0; i < names.size(); ++i) out << i << '\t' << names[i] << '\n';
}

}  // namespace detail

/// Everything besides the tensors that identifies a saved model.
struct CheckpointInfo {
    ModelConfig config;
    std::uint64_t seed = 0;
    bool reciprocal = false;
    std::uint64_t entity_dict_hash = 0;
    std::uint64_t relation_dict_hash = 0;
};

inline CheckpointInfo checkpoint_info(const Model& model, const Dictionary& dict, std::uint64_t seed) {
    return {model.config(), seed, dict.reciprocal, dict.entities.hash(), dict.relations.hash()};
}

inline nlohmann::json manifest_json(const CheckpointInfo& info, const ParamSet& params, const char* ext) {
    const auto& c = info.config;
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["model"] = std::string(to_string(c.kind));
    j["dim"] = c.dim;
    j["n_entities"] = c.n_entities;
    j["n_relations"] = c.n_relations;
    j["gamma"] = c.gamma;
    j["alpha_mode"] = std::string(to_string(c.alpha_mode));
    j["distance"] = std::string(to_string(c.distance));
    j["init_scale"] = c.init_scale;
    j["reciprocal"] = info.reciprocal;
    j["seed"] = info.seed;
    // hex strings: JSON numbers lose precision above 2^53 in many readers
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(info.entity_dict_hash));
    j["entity_dict_hash"] = buf;
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(info.relation_dict_hash));
    j["relation_dict_hash"] = buf;
    j["byte_order"] = "little";
    j["tensors"] = nlohmann::json::array();
    for (const auto& t : params)
        j["tensors"].push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"file", t.name + ext}});
    return j;
}

/// Writes the manifest, tensors and (when given) dictionaries to `dir`.
inline void save_checkpoint(const Model& model, const CheckpointInfo& info, const std::filesystem::path& dir,
                            const Dictionary* dict = nullptr, bool f32 = false) {
    std::filesystem::create_directories(dir);
    const char* ext = f32 ? ".f32" : ".f64";
    for (const auto& t : model.params()) {
        std::ofstream out(dir / (t.name + ext), std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / (t.name + ext)).string());
        if (f32)
            detail::write_le<float>(out, t.data);
        else
            detail::write_le<double>(out, t.data);
    }
    if (dict) {
        detail::write_dict(dir / "entities.dict", dict->entities.names());
        detail::write_dict(dir / "relations.dict", dict->relations.names());
    }
    std::ofstream out(dir / "manifest.json");
    out << manifest_json(info, model.params(), ext).dump(2) << '\n';
}

struct LoadedCheckpoint {
    Model model;
    CheckpointInfo info;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest.json: " + std::string(e.what()));
    }
    try {
        if (j.at("format_version").get<int>() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
        CheckpointInfo info;
        auto& c = info.config;
        c.kind = parse_model_kind(j.at("model").get<std::string>());
        c.dim = j.at("dim").get<std::size_t>();
        c.n_entities = j.at("n_entities").get<std::size_t>();
        c.n_relations = j.at("n_relations").get<std::size_t>();
        c.gamma = j.at("gamma").get<double>();
        c.alpha_mode = parse_alpha_mode(j.at("alpha_mode").get<std::string>());
        c.distance = parse_distance_kind(j.at("distance").get<std::string>());
        c.init_scale = j.value("init_scale", 1e-3);
        info.reciprocal = j.at("reciprocal").get<bool>();
        info.seed = j.at("seed").get<std::uint64_t>();
        info.entity_dict_hash = std::stoull(j.at("entity_dict_hash").get<std::string>(), nullptr, 16);
        info.relation_dict_hash = std::stoull(j.at("relation_dict_hash").get<std::string>(), nullptr, 16);
        ParamSet params;
        for (const auto& tj : j.at("tensors")) {
            Tensor t(tj.at("name").get<std::string>(), tj.at("rows").get<std::size_t>(), tj.at("cols").get<std::size_t>());
            const auto file = tj.at("file").get<std::string>();
            if (!file.ends_with(".f64")) throw DataError("only f64 tensors can be loaded: " + file);
            t.data = detail::read_f64(dir / file, t.rows * t.cols);
            params.add(std::move(t));
        }
        return {Model(c, std::move(params)), info};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest.json: " + std::string(e.what()));
    } catch (const InputError& e) {
        throw DataError("manifest.json: " + std::string(e.what()));
    }
}

/// Rejects a checkpoint whose dictionaries differ from the loaded dataset's.
inline void check_compatible(const CheckpointInfo& info, const Dictionary& dict) {
    if (info.entity_dict_hash != dict.entities.hash() || info.relation_dict_hash != dict.relations.hash())
        throw DataError("checkpoint dictionaries do not match the dataset");
    if (info.reciprocal != dict.reciprocal) throw DataError("checkpoint reciprocal mode does not match --reciprocal");
}

}  // namespace kge
