#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowplan/binio.hpp"
#include "flowplan/optim.hpp"
#include "flowplan/tensor.hpp"

// Checkpoint layout: <dir>/model.json (version, kind, seed, hyperparameters,
// parameter name -> shape table) + <dir>/weights.f32 (little-endian f32,
// concatenated in the declared order). Round-trips are value-exact at f32.

namespace flowplan {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    int format_version = kCheckpointVersion;
    std::string kind;
    std::uint64_t seed = 0;
    nlohmann::json hyper = nlohmann::json::object();
};

inline std::vector<float> params_to_f32(const ParamStore& store) {
    std::vector<float> out;
    out.reserve(store.param_count());
    for (const auto& e : store.entries()) {
        for (double v : e.value.values) out.push_back(static_cast<float>(v));
    }
    return out;
}

// Digest of the serialized f32 weights; matches the weights.f32 file bytes.
inline std::string weights_checksum(const ParamStore& store) {
    const std::vector<float> w = params_to_f32(store);
    return hex64(fnv1a64(w.data(), w.size() * sizeof(float)));
}

inline void save_checkpoint(const std::filesystem::path& dir, const ParamStore& store, const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["format_version"] = meta.format_version;
    j["kind"] = meta.kind;
    j["seed"] = meta.seed;
    j["hyper"] = meta.hyper;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& e : store.entries()) {
        params.push_back({{"name", e.name}, {"shape", e.value.shape}});
    }
    j["params"] = params;

    std::ofstream jf(dir / "model.json");
    if (!jf) throw std::runtime_error("checkpoint: cannot write " + (dir / "model.json").string());
    jf << j.dump(2) << "\n";

    const std::vector<float> w = params_to_f32(store);
    std::ofstream wf(dir / "weights.f32", std::ios::binary);
    if (!wf) throw std::runtime_error("checkpoint: cannot write " + (dir / "weights.f32").string());
    wf.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(float)));
}

inline nlohmann::json read_checkpoint_json(const std::filesystem::path& dir) {
    std::ifstream jf(dir / "model.json");
    if (!jf) throw std::runtime_error("checkpoint: cannot open " + (dir / "model.json").string());
    nlohmann::json j;
    jf >> j;
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: format version " + std::to_string(version) + " != supported " +
                                 std::to_string(kCheckpointVersion) + " in " + (dir / "model.json").string());
    }
    return j;
}

inline CheckpointMeta meta_from_json(const nlohmann::json& j) {
    CheckpointMeta meta;
    meta.format_version = j.at("format_version").get<int>();
    meta.kind = j.at("kind").get<std::string>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.hyper = j.at("hyper");
    return meta;
}

// Loads weights into an already-constructed store; names and shapes must
// match the json declaration exactly.
inline void load_weights(const std::filesystem::path& dir, ParamStore& store) {
    const nlohmann::json j = read_checkpoint_json(dir);
    const auto& params = j.at("params");
    if (params.size() != store.size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch in " + dir.string());
    }
    std::ifstream wf(dir / "weights.f32", std::ios::binary);
    if (!wf) throw std::runtime_error("checkpoint: cannot open " + (dir / "weights.f32").string());
    std::size_t idx = 0;
    for (auto& e : store.mutable_entries()) {
        const auto& decl = params[idx];
        const std::string name = decl.at("name").get<std::string>();
        const std::vector<std::size_t> shape = decl.at("shape").get<std::vector<std::size_t>>();
        if (name != e.name || shape != e.value.shape) {
            throw std::runtime_error("checkpoint: parameter '" + name + "' " + Tensor::shape_str(shape) +
                                     " does not match model '" + e.name + "' " + e.value.shape_str());
        }
        std::vector<float> buf(e.value.numel());
        wf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!wf) throw std::runtime_error("checkpoint: truncated weights.f32 in " + dir.string());
        for (std::size_t i = 0; i < buf.size(); ++i) e.value.values[i] = static_cast<double>(buf[i]);
        ++idx;
    }
}

}  // namespace flowplan
