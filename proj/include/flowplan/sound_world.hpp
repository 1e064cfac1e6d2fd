#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowplan/rng.hpp"
#include "flowplan/tensor.hpp"

// Synthetic sound world: an event grammar over 8 classes, spectrogram-style
// clip rendering, a fixed frame-level semantic encoder, prompt encoders, and
// an exact event decoder used as the evaluation judge. Every function here is
// a pure function of its inputs and the supplied RNG.

namespace flowplan {

struct WorldConfig {
    // Representation dims, fixed across the project.
    static constexpr std::size_t kClasses = 8;
    static constexpr std::size_t kFrames = 64;     // acoustic frames per clip
    static constexpr std::size_t kChannels = 16;   // acoustic channels
    static constexpr std::size_t kSemFrames = 16;  // semantic frames
    static constexpr std::size_t kSemDims = 32;    // semantic feature dims
    static constexpr std::size_t kPool = kFrames / kSemFrames;

    // Grammar and rendering knobs.
    std::size_t min_events = 1;
    std::size_t max_events = 4;
    std::size_t min_duration = 8;
    std::size_t max_duration = 16;
    double channel_sigma = 1.5;      // spread of each class's channel profile
    double envelope_decay = 0.1;     // per-frame decay after the attack
    double noise_floor = 0.01;       // stddev of the additive noise
    double decode_threshold = 0.15;  // activity gate on matched-filter energy

    nlohmann::json to_json() const {
        return {{"min_events", min_events},       {"max_events", max_events},
                {"min_duration", min_duration},   {"max_duration", max_duration},
                {"channel_sigma", channel_sigma}, {"envelope_decay", envelope_decay},
                {"noise_floor", noise_floor},     {"decode_threshold", decode_threshold}};
    }
    static WorldConfig from_json(const nlohmann::json& j) {
        WorldConfig c;
        c.min_events = j.at("min_events").get<std::size_t>();
        c.max_events = j.at("max_events").get<std::size_t>();
        c.min_duration = j.at("min_duration").get<std::size_t>();
        c.max_duration = j.at("max_duration").get<std::size_t>();
        c.channel_sigma = j.at("channel_sigma").get<double>();
        c.envelope_decay = j.at("envelope_decay").get<double>();
        c.noise_floor = j.at("noise_floor").get<double>();
        c.decode_threshold = j.at("decode_threshold").get<double>();
        return c;
    }
};

struct Event {
    std::size_t cls = 0;
    std::size_t onset = 0;
    std::size_t duration = 0;
};

struct EventTimeline {
    std::vector<Event> events;

    std::vector<std::size_t> class_sequence() const {
        std::vector<std::size_t> out;
        out.reserve(events.size());
        for (const Event& e : events) out.push_back(e.cls);
        return out;
    }
};

inline void validate_timeline(const EventTimeline& tl, const WorldConfig& cfg) {
    if (tl.events.empty() || tl.events.size() > cfg.max_events) {
        throw std::invalid_argument("timeline: event count " + std::to_string(tl.events.size()) +
                                    " outside [1, " + std::to_string(cfg.max_events) + "]");
    }
    std::size_t prev_end = 0;
    bool first = true;
    for (const Event& e : tl.events) {
        if (e.cls >= WorldConfig::kClasses) throw std::invalid_argument("timeline: class out of range");
        if (!first && e.onset < prev_end) throw std::invalid_argument("timeline: overlapping or unordered events");
        if (e.onset + e.duration > WorldConfig::kFrames) throw std::invalid_argument("timeline: event exceeds clip");
        prev_end = e.onset + e.duration;
        first = false;
    }
}

struct PromptSpec {
    std::vector<std::size_t> tokens;  // ordered event classes, no immediate repeats

    bool operator==(const PromptSpec& o) const { return tokens == o.tokens; }
};

inline void validate_prompt(const PromptSpec& p, const WorldConfig& cfg) {
    if (p.tokens.empty() || p.tokens.size() > cfg.max_events) {
        throw std::invalid_argument("prompt: length outside [1, " + std::to_string(cfg.max_events) + "]");
    }
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        if (p.tokens[i] >= WorldConfig::kClasses) throw std::invalid_argument("prompt: class out of range");
        if (i > 0 && p.tokens[i] == p.tokens[i - 1]) throw std::invalid_argument("prompt: immediate repeat");
    }
}

struct RenderedClip {
    Tensor spectrogram;  // [kFrames x kChannels]
    EventTimeline timeline;
    std::uint64_t seed = 0;
};

// Condition encodings: a normalized class histogram (global) plus per-token
// one-hot rows with a position feature (detail).
struct PromptCondition {
    Tensor global;  // [kClasses]
    Tensor detail;  // [max_events x (kClasses + 1)]

    Tensor flat() const {
        Tensor out({global.numel() + detail.numel()});
        std::copy(global.values.begin(), global.values.end(), out.values.begin());
        std::copy(detail.values.begin(), detail.values.end(), out.values.begin() + global.numel());
        return out;
    }

    static std::size_t flat_dim(const WorldConfig& cfg) {
        return WorldConfig::kClasses + cfg.max_events * (WorldConfig::kClasses + 1);
    }
};

// ---------------------------------------------------------------------------
// grammar

inline PromptSpec sample_prompt(Rng& rng, const WorldConfig& cfg) {
    const std::size_t len = cfg.min_events + rng.uniform_int(cfg.max_events - cfg.min_events + 1);
    PromptSpec p;
    p.tokens.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        if (i == 0) {
            p.tokens.push_back(rng.uniform_int(WorldConfig::kClasses));
        } else {
            // uniform over the 7 classes distinct from the previous token
            std::size_t draw = rng.uniform_int(WorldConfig::kClasses - 1);
            p.tokens.push_back(draw < p.tokens[i - 1] ? draw : draw + 1);
        }
    }
    return p;
}

inline EventTimeline realize_timeline(const PromptSpec& prompt, Rng& rng, const WorldConfig& cfg) {
    validate_prompt(prompt, cfg);
    const std::size_t m = prompt.tokens.size();
    std::vector<std::size_t> durations(m);
    for (std::size_t i = 0; i < m; ++i) {
        durations[i] = cfg.min_duration + rng.uniform_int(cfg.max_duration - cfg.min_duration + 1);
    }

    constexpr int kMaxRetries = 64;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        std::vector<std::size_t> onsets(m);
        for (std::size_t i = 0; i < m; ++i) onsets[i] = rng.uniform_int(WorldConfig::kFrames - durations[i] + 1);
        std::sort(onsets.begin(), onsets.end());
        bool ok = true;
        for (std::size_t i = 0; i < m && ok; ++i) {
            if (i > 0 && onsets[i] < onsets[i - 1] + durations[i - 1]) ok = false;
            if (onsets[i] + durations[i] > WorldConfig::kFrames) ok = false;
        }
        if (ok) {
            EventTimeline tl;
            for (std::size_t i = 0; i < m; ++i) tl.events.push_back({prompt.tokens[i], onsets[i], durations[i]});
            validate_timeline(tl, cfg);
            return tl;
        }
    }

    // even spacing fallback, always valid since max_duration <= kFrames/max_events
    const std::size_t slot = WorldConfig::kFrames / m;
    EventTimeline tl;
    for (std::size_t i = 0; i < m; ++i) tl.events.push_back({prompt.tokens[i], i * slot, durations[i]});
    validate_timeline(tl, cfg);
    return tl;
}

// ---------------------------------------------------------------------------
// rendering

// Channel profile of class k, centered at channel 2k.
inline std::vector<double> class_profile(std::size_t cls, const WorldConfig& cfg) {
    std::vector<double> p(WorldConfig::kChannels);
    const double mu = 2.0 * static_cast<double>(cls);
    for (std::size_t c = 0; c < WorldConfig::kChannels; ++c) {
        const double d = static_cast<double>(c) - mu;
        p[c] = std::exp(-d * d / (2.0 * cfg.channel_sigma * cfg.channel_sigma));
    }
    return p;
}

// Two-frame linear attack, then exponential decay.
inline double event_envelope(std::size_t frames_since_onset, const WorldConfig& cfg) {
    if (frames_since_onset == 0) return 0.5;
    return std::exp(-cfg.envelope_decay * static_cast<double>(frames_since_onset - 1));
}

inline RenderedClip render_clip(const EventTimeline& timeline, Rng& rng, const WorldConfig& cfg,
                                std::uint64_t seed = 0) {
    validate_timeline(timeline, cfg);
    Tensor spec({WorldConfig::kFrames, WorldConfig::kChannels});
    for (const Event& e : timeline.events) {
        const std::vector<double> profile = class_profile(e.cls, cfg);
        for (std::size_t j = 0; j < e.duration; ++j) {
            const double a = event_envelope(j, cfg);
            double* row = spec.values.data() + (e.onset + j) * WorldConfig::kChannels;
            for (std::size_t c = 0; c < WorldConfig::kChannels; ++c) row[c] += a * profile[c];
        }
    }
    for (double& v : spec.values) v = std::max(0.0, v + cfg.noise_floor * rng.normal());
    return RenderedClip{std::move(spec), timeline, seed};
}

// ---------------------------------------------------------------------------
// oracle encoders / decoder

// Matched-filter energies per semantic window: e[n][k] is the inner product of
// the pooled window with class k's unit-normalized channel profile.
inline Tensor window_energies(const Tensor& spectrogram, const WorldConfig& cfg) {
    if (spectrogram.shape != std::vector<std::size_t>{WorldConfig::kFrames, WorldConfig::kChannels}) {
        throw ShapeError("window_energies", "expected [" + std::to_string(WorldConfig::kFrames) + "x" +
                                                std::to_string(WorldConfig::kChannels) + "], got " +
                                                spectrogram.shape_str());
    }
    std::vector<std::vector<double>> profiles(WorldConfig::kClasses);
    std::vector<double> norms(WorldConfig::kClasses);
    for (std::size_t k = 0; k < WorldConfig::kClasses; ++k) {
        profiles[k] = class_profile(k, cfg);
        double s = 0.0;
        for (double v : profiles[k]) s += v * v;
        norms[k] = std::sqrt(s);
    }

    Tensor energies({WorldConfig::kSemFrames, WorldConfig::kClasses});
    for (std::size_t n = 0; n < WorldConfig::kSemFrames; ++n) {
        double pooled[WorldConfig::kChannels] = {};
        for (std::size_t j = 0; j < WorldConfig::kPool; ++j) {
            const double* row = spectrogram.values.data() + (n * WorldConfig::kPool + j) * WorldConfig::kChannels;
            for (std::size_t c = 0; c < WorldConfig::kChannels; ++c) pooled[c] += row[c];
        }
        for (std::size_t c = 0; c < WorldConfig::kChannels; ++c) pooled[c] /= static_cast<double>(WorldConfig::kPool);
        for (std::size_t k = 0; k < WorldConfig::kClasses; ++k) {
            double dot = 0.0;
            for (std::size_t c = 0; c < WorldConfig::kChannels; ++c) dot += pooled[c] * profiles[k][c];
            energies.at(n, k) = dot / norms[k];
        }
    }
    return energies;
}

// Fixed semantic encoder: dims 0..7 matched-filter energies, 8..15 their first
// differences across windows, 16..31 the energies modulated by sin/cos(pi n/N).
// The trailing 24 dims are derivable from the first 8; the redundancy is what
// the projection head is expected to compress away.
inline Tensor oracle_encode_semantics(const Tensor& spectrogram, const WorldConfig& cfg) {
    const Tensor e = window_energies(spectrogram, cfg);
    constexpr std::size_t N = WorldConfig::kSemFrames;
    constexpr std::size_t K = WorldConfig::kClasses;
    Tensor f({N, WorldConfig::kSemDims});
    for (std::size_t n = 0; n < N; ++n) {
        const double phase = 3.14159265358979323846 * static_cast<double>(n) / static_cast<double>(N);
        for (std::size_t k = 0; k < K; ++k) {
            const double ek = e.at(n, k);
            f.at(n, k) = ek;
            f.at(n, 8 + k) = n == 0 ? 0.0 : ek - e.at(n - 1, k);
            f.at(n, 16 + k) = ek * std::sin(phase);
            f.at(n, 24 + k) = ek * std::cos(phase);
        }
    }
    return f;
}

inline constexpr std::size_t kSilence = WorldConfig::kClasses;

// Per window: argmax class when its energy clears the threshold, else silence;
// ties break toward the lower class index. Runs are merged and silence dropped.
inline std::vector<std::size_t> oracle_decode_events(const Tensor& spectrogram, const WorldConfig& cfg) {
    const Tensor e = window_energies(spectrogram, cfg);
    std::vector<std::size_t> decoded;
    std::size_t prev_label = kSilence + 1;  // not a valid label
    for (std::size_t n = 0; n < WorldConfig::kSemFrames; ++n) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < WorldConfig::kClasses; ++k) {
            if (e.at(n, k) > e.at(n, best)) best = k;
        }
        const std::size_t label = e.at(n, best) > cfg.decode_threshold ? best : kSilence;
        if (label != prev_label && label != kSilence) decoded.push_back(label);
        prev_label = label;
    }
    return decoded;
}

// ---------------------------------------------------------------------------
// prompt encoding

inline PromptCondition encode_prompt(const PromptSpec& prompt, const WorldConfig& cfg) {
    if (prompt.tokens.empty()) throw std::invalid_argument("encode_prompt: empty prompt");
    validate_prompt(prompt, cfg);
    PromptCondition cond;
    cond.global = Tensor::zeros({WorldConfig::kClasses});
    for (std::size_t t : prompt.tokens) cond.global.values[t] += 1.0;
    for (double& v : cond.global.values) v /= static_cast<double>(prompt.tokens.size());

    const std::size_t row = WorldConfig::kClasses + 1;
    cond.detail = Tensor::zeros({cfg.max_events, row});
    for (std::size_t i = 0; i < prompt.tokens.size(); ++i) {
        cond.detail.values[i * row + prompt.tokens[i]] = 1.0;
        cond.detail.values[i * row + WorldConfig::kClasses] = static_cast<double>(i) / static_cast<double>(cfg.max_events);
    }
    return cond;
}

}  // namespace flowplan
