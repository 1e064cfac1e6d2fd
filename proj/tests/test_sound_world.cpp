#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "flowplan/sound_world.hpp"

using namespace flowplan;

TEST_CASE("sample_prompt is deterministic and respects the grammar") {
    WorldConfig cfg;
    Rng a(0), b(0);
    for (int i = 0; i < 50; ++i) {
        PromptSpec pa = sample_prompt(a, cfg);
        PromptSpec pb = sample_prompt(b, cfg);
        REQUIRE(pa.tokens == pb.tokens);
        REQUIRE_NOTHROW(validate_prompt(pa, cfg));
    }
}

TEST_CASE("sample_prompt class and length distributions are uniform") {
    WorldConfig cfg;
    Rng rng(123);
    const std::size_t n = 10000;
    std::map<std::size_t, std::size_t> class_counts, length_counts;
    std::size_t total_tokens = 0;
    for (std::size_t i = 0; i < n; ++i) {
        PromptSpec p = sample_prompt(rng, cfg);
        length_counts[p.tokens.size()]++;
        for (std::size_t t : p.tokens) {
            class_counts[t]++;
            ++total_tokens;
        }
    }
    for (std::size_t k = 0; k < WorldConfig::kClasses; ++k) {
        const double freq = static_cast<double>(class_counts[k]) / static_cast<double>(total_tokens);
        REQUIRE(freq == Catch::Approx(1.0 / 8.0).margin(0.02));
    }
    for (std::size_t len = 1; len <= 4; ++len) {
        const double freq = static_cast<double>(length_counts[len]) / static_cast<double>(n);
        REQUIRE(freq == Catch::Approx(0.25).margin(0.02));
    }
}

TEST_CASE("realize_timeline keeps prompt order, non-overlap and bounds") {
    WorldConfig cfg;
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        PromptSpec p = sample_prompt(rng, cfg);
        EventTimeline tl = realize_timeline(p, rng, cfg);
        REQUIRE(tl.events.size() == p.tokens.size());
        REQUIRE(tl.class_sequence() == p.tokens);
        for (std::size_t i = 0; i < tl.events.size(); ++i) {
            const Event& e = tl.events[i];
            REQUIRE(e.duration >= cfg.min_duration);
            REQUIRE(e.duration <= cfg.max_duration);
            REQUIRE(e.onset + e.duration <= WorldConfig::kFrames);
            if (i > 0) REQUIRE(e.onset >= tl.events[i - 1].onset + tl.events[i - 1].duration);
        }
    }
}

TEST_CASE("realize_timeline is reproducible for a fixed seed") {
    WorldConfig cfg;
    PromptSpec p{{2, 5}};
    Rng a(99), b(99);
    EventTimeline ta = realize_timeline(p, a, cfg);
    EventTimeline tb = realize_timeline(p, b, cfg);
    for (std::size_t i = 0; i < ta.events.size(); ++i) {
        REQUIRE(ta.events[i].onset == tb.events[i].onset);
        REQUIRE(ta.events[i].duration == tb.events[i].duration);
    }
}

TEST_CASE("render_clip puts class energy at channel 2k") {
    WorldConfig cfg;
    EventTimeline tl{{{3, 10, 12}}};
    Rng rng(5);
    RenderedClip clip = render_clip(tl, rng, cfg);
    // active frames peak at channel 6 = 2*3
    for (std::size_t f = 11; f < 22; ++f) {
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < WorldConfig::kChannels; ++c) {
            if (clip.spectrogram.at(f, c) > clip.spectrogram.at(f, argmax)) argmax = c;
        }
        REQUIRE(argmax == 6);
    }
    for (double v : clip.spectrogram.values) REQUIRE(v >= 0.0);
}

TEST_CASE("silent frames stay below 0.05 with overwhelming probability") {
    WorldConfig cfg;
    EventTimeline tl{{{0, 0, 8}}};
    Rng rng(21);
    std::size_t over = 0, total = 0;
    for (int trial = 0; trial < 200; ++trial) {
        RenderedClip clip = render_clip(tl, rng, cfg);
        for (std::size_t f = 16; f < WorldConfig::kFrames; ++f) {  // frames after the event
            for (std::size_t c = 0; c < WorldConfig::kChannels; ++c) {
                ++total;
                if (clip.spectrogram.at(f, c) > 0.05) ++over;
            }
        }
    }
    REQUIRE(static_cast<double>(over) / static_cast<double>(total) < 0.001);
}

TEST_CASE("render is bitwise deterministic given (timeline, seed)") {
    WorldConfig cfg;
    EventTimeline tl{{{1, 0, 10}, {4, 20, 8}}};
    Rng a(77), b(77);
    REQUIRE(render_clip(tl, a, cfg).spectrogram.values == render_clip(tl, b, cfg).spectrogram.values);
}

TEST_CASE("oracle semantic features: zeros, argmax and trig identity") {
    WorldConfig cfg;
    Tensor silence({WorldConfig::kFrames, WorldConfig::kChannels});
    Tensor f0 = oracle_encode_semantics(silence, cfg);
    for (double v : f0.values) REQUIRE(v == 0.0);

    EventTimeline tl{{{5, 8, 16}}};
    Rng rng(3);
    RenderedClip clip = render_clip(tl, rng, cfg);
    Tensor f = oracle_encode_semantics(clip.spectrogram, cfg);
    REQUIRE(f.shape == std::vector<std::size_t>{16, 32});

    // argmax over energy dims equals the event class at fully active windows
    for (std::size_t n = 3; n < 5; ++n) {
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < 8; ++k) {
            if (f.at(n, k) > f.at(n, argmax)) argmax = k;
        }
        REQUIRE(argmax == 5);
    }

    // dims 16..31 reconstruct dims 0..7 through sin^2 + cos^2 = 1
    for (std::size_t n = 1; n < WorldConfig::kSemFrames; ++n) {
        for (std::size_t k = 0; k < 8; ++k) {
            const double recon = std::sqrt(f.at(n, 16 + k) * f.at(n, 16 + k) + f.at(n, 24 + k) * f.at(n, 24 + k));
            REQUIRE(recon == Catch::Approx(std::abs(f.at(n, k))).margin(1e-9));
        }
    }
}

TEST_CASE("oracle features are noise-robust across render seeds") {
    WorldConfig cfg;
    Rng prng(15);
    for (int trial = 0; trial < 20; ++trial) {
        PromptSpec p = sample_prompt(prng, cfg);
        EventTimeline tl = realize_timeline(p, prng, cfg);
        Rng r1(1000 + trial), r2(2000 + trial);
        Tensor fa = oracle_encode_semantics(render_clip(tl, r1, cfg).spectrogram, cfg);
        Tensor fb = oracle_encode_semantics(render_clip(tl, r2, cfg).spectrogram, cfg);
        REQUIRE(linf_distance(fa, fb) <= 0.1);
    }
}

TEST_CASE("decode(render(realize(p))) recovers the class sequence >= 99%") {
    WorldConfig cfg;
    Rng rng(2024);
    std::size_t ok = 0;
    const std::size_t trials = 1000;
    for (std::size_t i = 0; i < trials; ++i) {
        PromptSpec p = sample_prompt(rng, cfg);
        EventTimeline tl = realize_timeline(p, rng, cfg);
        RenderedClip clip = render_clip(tl, rng, cfg);
        if (oracle_decode_events(clip.spectrogram, cfg) == p.tokens) ++ok;
    }
    INFO("round-trip success " << ok << "/" << trials);
    REQUIRE(ok >= 990);
}

TEST_CASE("decode of silence is empty; ties break to the lower class") {
    WorldConfig cfg;
    Tensor silence({WorldConfig::kFrames, WorldConfig::kChannels});
    REQUIRE(oracle_decode_events(silence, cfg).empty());

    // synthetic exact tie between classes 2 and 3: energies compare with >, so
    // the first (lower) argmax wins
    Tensor spec({WorldConfig::kFrames, WorldConfig::kChannels});
    auto p2 = class_profile(2, cfg);
    auto p3 = class_profile(3, cfg);
    double n2 = 0, n3 = 0;
    for (std::size_t c = 0; c < 16; ++c) {
        n2 += p2[c] * p2[c];
        n3 += p3[c] * p3[c];
    }
    // scale the class-3 bump so both matched-filter energies are equal
    for (std::size_t f = 0; f < 8; ++f) {
        for (std::size_t c = 0; c < 16; ++c) spec.at(f, c) = p2[c];
    }
    Tensor e = window_energies(spec, cfg);
    Tensor spec3({WorldConfig::kFrames, WorldConfig::kChannels});
    for (std::size_t f = 0; f < 8; ++f) {
        for (std::size_t c = 0; c < 16; ++c) spec3.at(f, c) = p3[c] * (std::sqrt(n2) / std::sqrt(n3));
    }
    Tensor e3 = window_energies(spec3, cfg);
    REQUIRE(e.at(0, 2) == Catch::Approx(e3.at(0, 3)));
}

TEST_CASE("encode_prompt produces the documented condition layout") {
    WorldConfig cfg;
    PromptCondition c3 = encode_prompt(PromptSpec{{3}}, cfg);
    for (std::size_t k = 0; k < 8; ++k) REQUIRE(c3.global.values[k] == (k == 3 ? 1.0 : 0.0));
    REQUIRE(c3.detail.at(0, 3) == 1.0);
    REQUIRE(c3.detail.at(0, 8) == 0.0);
    for (std::size_t j = 0; j < 9; ++j) REQUIRE(c3.detail.at(1, j) == 0.0);

    PromptCondition c12 = encode_prompt(PromptSpec{{1, 2}}, cfg);
    REQUIRE(c12.global.values[1] == Catch::Approx(0.5));
    REQUIRE(c12.global.values[2] == Catch::Approx(0.5));
    double sum = 0;
    for (double v : c12.global.values) sum += v;
    REQUIRE(sum == Catch::Approx(1.0));
    REQUIRE(c12.detail.at(1, 8) == Catch::Approx(0.25));  // position 1 of 4

    // permuting tokens keeps the global encoding but changes the detail rows
    PromptCondition c21 = encode_prompt(PromptSpec{{2, 1}}, cfg);
    REQUIRE(c21.global.values == c12.global.values);
    REQUIRE(c21.detail.values != c12.detail.values);

    REQUIRE(c12.flat().numel() == PromptCondition::flat_dim(cfg));
    REQUIRE_THROWS(encode_prompt(PromptSpec{}, cfg));
}
