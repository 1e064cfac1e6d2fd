#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowplan/binio.hpp"
#include "flowplan/sound_world.hpp"

// Dataset generation and persistence, prompt perturbation, and the hard
// editing-benchmark builder. Shards regenerate bit-exactly from (count, seed,
// grammar): clip i uses the derived stream seed ^ i.

namespace flowplan {

inline constexpr int kDatasetVersion = 1;
inline constexpr int kBenchmarkVersion = 1;

struct DatasetShard {
    WorldConfig world;
    std::uint64_t seed = 0;
    std::vector<Tensor> clips;      // [kFrames x kChannels] each
    std::vector<Tensor> semantics;  // [kSemFrames x kSemDims] each
    std::vector<PromptSpec> prompts;

    std::size_t count() const { return clips.size(); }
};

inline DatasetShard generate_dataset(std::size_t count, std::uint64_t seed, const WorldConfig& world) {
    if (count == 0) throw std::invalid_argument("generate_dataset: count must be >= 1");
    DatasetShard shard;
    shard.world = world;
    shard.seed = seed;
    shard.clips.reserve(count);
    shard.semantics.reserve(count);
    shard.prompts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t clip_seed = derive_seed(seed, i);
        Rng rng(clip_seed);
        PromptSpec prompt = sample_prompt(rng, world);
        EventTimeline timeline = realize_timeline(prompt, rng, world);
        RenderedClip clip = render_clip(timeline, rng, world, clip_seed);
        shard.semantics.push_back(oracle_encode_semantics(clip.spectrogram, world));
        shard.clips.push_back(std::move(clip.spectrogram));
        shard.prompts.push_back(std::move(prompt));
    }
    return shard;
}

inline void save_dataset(const DatasetShard& shard, const std::filesystem::path& dir, bool force = false) {
    namespace fs = std::filesystem;
    if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
        throw std::runtime_error("save_dataset: " + dir.string() + " exists and is not empty (use --force)");
    }
    fs::create_directories(dir);

    nlohmann::json meta;
    meta["format_version"] = kDatasetVersion;
    meta["count"] = shard.count();
    meta["seed"] = shard.seed;
    meta["grammar"] = shard.world.to_json();
    meta["dims"] = {{"frames", WorldConfig::kFrames},
                    {"channels", WorldConfig::kChannels},
                    {"sem_frames", WorldConfig::kSemFrames},
                    {"sem_dims", WorldConfig::kSemDims},
                    {"classes", WorldConfig::kClasses}};
    std::ofstream mf(dir / "meta.json");
    if (!mf) throw std::runtime_error("save_dataset: cannot write " + (dir / "meta.json").string());
    mf << meta.dump(2) << "\n";

    std::vector<float> clip_buf, sem_buf;
    clip_buf.reserve(shard.count() * WorldConfig::kFrames * WorldConfig::kChannels);
    sem_buf.reserve(shard.count() * WorldConfig::kSemFrames * WorldConfig::kSemDims);
    for (const Tensor& c : shard.clips) {
        for (double v : c.values) clip_buf.push_back(static_cast<float>(v));
    }
    for (const Tensor& s : shard.semantics) {
        for (double v : s.values) sem_buf.push_back(static_cast<float>(v));
    }
    write_f32_file(dir / "clips.f32", clip_buf);
    write_f32_file(dir / "semantics.f32", sem_buf);

    std::ofstream pf(dir / "prompts.jsonl");
    if (!pf) throw std::runtime_error("save_dataset: cannot write " + (dir / "prompts.jsonl").string());
    for (const PromptSpec& p : shard.prompts) pf << nlohmann::json(p.tokens).dump() << "\n";
}

inline DatasetShard load_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "meta.json");
    if (!mf) throw std::runtime_error("load_dataset: cannot open " + (dir / "meta.json").string());
    nlohmann::json meta;
    mf >> meta;
    const int version = meta.at("format_version").get<int>();
    if (version != kDatasetVersion) {
        throw std::runtime_error("load_dataset: format version " + std::to_string(version) + " != supported " +
                                 std::to_string(kDatasetVersion));
    }

    DatasetShard shard;
    shard.world = WorldConfig::from_json(meta.at("grammar"));
    shard.seed = meta.at("seed").get<std::uint64_t>();
    const std::size_t count = meta.at("count").get<std::size_t>();

    constexpr std::size_t clip_elems = WorldConfig::kFrames * WorldConfig::kChannels;
    constexpr std::size_t sem_elems = WorldConfig::kSemFrames * WorldConfig::kSemDims;
    const std::vector<float> clip_buf = read_f32_file(dir / "clips.f32", count * clip_elems);
    const std::vector<float> sem_buf = read_f32_file(dir / "semantics.f32", count * sem_elems);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor c({WorldConfig::kFrames, WorldConfig::kChannels});
        for (std::size_t j = 0; j < clip_elems; ++j) c.values[j] = static_cast<double>(clip_buf[i * clip_elems + j]);
        Tensor s({WorldConfig::kSemFrames, WorldConfig::kSemDims});
        for (std::size_t j = 0; j < sem_elems; ++j) s.values[j] = static_cast<double>(sem_buf[i * sem_elems + j]);
        shard.clips.push_back(std::move(c));
        shard.semantics.push_back(std::move(s));
    }

    std::ifstream pf(dir / "prompts.jsonl");
    if (!pf) throw std::runtime_error("load_dataset: cannot open " + (dir / "prompts.jsonl").string());
    std::string line;
    while (std::getline(pf, line)) {
        if (line.empty()) continue;
        PromptSpec p;
        p.tokens = nlohmann::json::parse(line).get<std::vector<std::size_t>>();
        shard.prompts.push_back(std::move(p));
    }
    if (shard.prompts.size() != count) {
        throw std::runtime_error("load_dataset: prompts.jsonl has " + std::to_string(shard.prompts.size()) +
                                 " lines, expected " + std::to_string(count));
    }
    return shard;
}

// ---------------------------------------------------------------------------
// prompt perturbation

enum class EditKind { Replace, SwapAdjacent, Insert, Delete };

// One uniformly chosen edit among the kinds applicable to this prompt; the
// result is always a valid prompt (length bounds, no immediate repeats).
inline PromptSpec perturb_prompt(const PromptSpec& prompt, Rng& rng, const WorldConfig& cfg) {
    validate_prompt(prompt, cfg);
    const auto& t = prompt.tokens;
    const std::size_t len = t.size();

    auto class_ok = [&](std::size_t cls, const std::vector<std::size_t>& seq, std::size_t pos) {
        // valid to place cls at position pos of seq (insertion semantics)
        if (pos > 0 && seq[pos - 1] == cls) return false;
        if (pos < seq.size() && seq[pos] == cls) return false;
        return true;
    };

    std::vector<std::size_t> swap_positions;  // i to swap with i+1
    for (std::size_t i = 0; i + 1 < len; ++i) {
        const std::size_t a = t[i], b = t[i + 1];
        const bool left_ok = i == 0 || t[i - 1] != b;
        const bool right_ok = i + 2 >= len || t[i + 2] != a;
        if (left_ok && right_ok) swap_positions.push_back(i);
    }
    std::vector<std::size_t> delete_positions;
    for (std::size_t i = 0; i < len && len >= 2; ++i) {
        const bool merge_ok = i == 0 || i + 1 >= len || t[i - 1] != t[i + 1];
        if (merge_ok) delete_positions.push_back(i);
    }

    std::vector<EditKind> kinds{EditKind::Replace};  // replace is always applicable
    if (!swap_positions.empty()) kinds.push_back(EditKind::SwapAdjacent);
    if (len < cfg.max_events) kinds.push_back(EditKind::Insert);
    if (!delete_positions.empty()) kinds.push_back(EditKind::Delete);

    PromptSpec out = prompt;
    switch (kinds[rng.uniform_int(kinds.size())]) {
        case EditKind::Replace: {
            const std::size_t pos = rng.uniform_int(len);
            std::vector<std::size_t> candidates;
            for (std::size_t c = 0; c < WorldConfig::kClasses; ++c) {
                if (c == t[pos]) continue;
                if (pos > 0 && t[pos - 1] == c) continue;
                if (pos + 1 < len && t[pos + 1] == c) continue;
                candidates.push_back(c);
            }
            out.tokens[pos] = candidates[rng.uniform_int(candidates.size())];
            break;
        }
        case EditKind::SwapAdjacent: {
            const std::size_t i = swap_positions[rng.uniform_int(swap_positions.size())];
            std::swap(out.tokens[i], out.tokens[i + 1]);
            break;
        }
        case EditKind::Insert: {
            const std::size_t pos = rng.uniform_int(len + 1);
            std::vector<std::size_t> candidates;
            for (std::size_t c = 0; c < WorldConfig::kClasses; ++c) {
                if (class_ok(c, t, pos)) candidates.push_back(c);
            }
            out.tokens.insert(out.tokens.begin() + pos, candidates[rng.uniform_int(candidates.size())]);
            break;
        }
        case EditKind::Delete: {
            const std::size_t pos = delete_positions[rng.uniform_int(delete_positions.size())];
            out.tokens.erase(out.tokens.begin() + pos);
            break;
        }
    }
    validate_prompt(out, cfg);
    return out;
}

// ---------------------------------------------------------------------------
// similarity and the hard benchmark

inline std::size_t lcs_length(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<std::size_t> dp(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = 0;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t tmp = dp[j];
            dp[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(dp[j], dp[j - 1]);
            diag = tmp;
        }
    }
    return dp[b.size()];
}

// 0.5 * Jaccard of class sets + 0.5 * LCS normalized by the longer sequence.
inline double prompt_similarity(const PromptSpec& a, const PromptSpec& b) {
    const std::set<std::size_t> sa(a.tokens.begin(), a.tokens.end());
    const std::set<std::size_t> sb(b.tokens.begin(), b.tokens.end());
    std::size_t inter = 0;
    for (std::size_t c : sa) inter += sb.count(c);
    const std::size_t uni = sa.size() + sb.size() - inter;
    const double jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    const double lcs = static_cast<double>(lcs_length(a.tokens, b.tokens)) /
                       static_cast<double>(std::max(a.tokens.size(), b.tokens.size()));
    return 0.5 * jaccard + 0.5 * lcs;
}

struct EditCase {
    std::size_t source_index = 0;
    std::size_t perturbation_index = 0;
    PromptSpec source;
    PromptSpec target;
    double similarity = 0.0;
};

inline std::uint64_t benchmark_sub_seed(std::uint64_t seed, std::size_t source, std::size_t j) {
    std::uint64_t h = seed;
    h = fnv1a64(&source, sizeof(source), h);
    h = fnv1a64(&j, sizeof(j), h);
    return h;
}

// Ranks source x perturbation pairs by ascending similarity and keeps the
// lowest `keep` (the hardest edits). Stable tie-break on (source index,
// perturbation index) makes the output independent of input order.
inline std::vector<EditCase> build_hard_benchmark(const std::vector<PromptSpec>& sources, std::size_t per_source,
                                                  std::size_t keep, std::uint64_t seed, const WorldConfig& cfg) {
    std::vector<EditCase> candidates;
    candidates.reserve(sources.size() * per_source);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = 0; j < per_source; ++j) {
            Rng rng(benchmark_sub_seed(seed, i, j));
            EditCase ec;
            ec.source_index = i;
            ec.perturbation_index = j;
            ec.source = sources[i];
            ec.target = perturb_prompt(sources[i], rng, cfg);
            ec.similarity = prompt_similarity(ec.source, ec.target);
            candidates.push_back(std::move(ec));
        }
    }
    if (candidates.size() < keep) {
        throw std::runtime_error("build_hard_benchmark: only " + std::to_string(candidates.size()) +
                                 " candidate pairs, need " + std::to_string(keep));
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const EditCase& a, const EditCase& b) {
        if (a.similarity != b.similarity) return a.similarity < b.similarity;
        if (a.source_index != b.source_index) return a.source_index < b.source_index;
        return a.perturbation_index < b.perturbation_index;
    });
    candidates.resize(keep);
    return candidates;
}

inline void save_benchmark(const std::vector<EditCase>& cases, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format_version"] = kBenchmarkVersion;
    nlohmann::json pairs = nlohmann::json::array();
    for (const EditCase& ec : cases) {
        pairs.push_back({{"source_index", ec.source_index},
                         {"perturbation_index", ec.perturbation_index},
                         {"source_tokens", ec.source.tokens},
                         {"target_tokens", ec.target.tokens},
                         {"similarity", ec.similarity}});
    }
    j["pairs"] = pairs;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_benchmark: cannot write " + path.string());
    f << j.dump(2) << "\n";
}

inline std::vector<EditCase> load_benchmark(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_benchmark: cannot open " + path.string());
    nlohmann::json j;
    f >> j;
    const int version = j.at("format_version").get<int>();
    if (version != kBenchmarkVersion) {
        throw std::runtime_error("load_benchmark: format version " + std::to_string(version) + " != supported " +
                                 std::to_string(kBenchmarkVersion));
    }
    std::vector<EditCase> cases;
    for (const auto& p : j.at("pairs")) {
        EditCase ec;
        ec.source_index = p.at("source_index").get<std::size_t>();
        ec.perturbation_index = p.at("perturbation_index").get<std::size_t>();
        ec.source.tokens = p.at("source_tokens").get<std::vector<std::size_t>>();
        ec.target.tokens = p.at("target_tokens").get<std::vector<std::size_t>>();
        ec.similarity = p.at("similarity").get<double>();
        cases.push_back(std::move(ec));
    }
    return cases;
}

}  // namespace flowplan
