#pragma once

#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowplan/editor.hpp"
#include "flowplan/metrics.hpp"
#include "flowplan/report.hpp"

// Experiment harness: the parameter-matched single-stage baseline, generation
// and editing evaluations, and the semantic-dimension ablation.

namespace flowplan {

inline std::size_t velocity_param_count(const VelocityNetConfig& c) {
    std::size_t n = 0;
    std::size_t in = c.state_dim + c.cond_dim + c.time_dim;
    for (std::size_t l = 0; l < c.depth; ++l) {
        n += in * c.width + c.width;
        in = c.width;
    }
    n += c.width * c.state_dim + c.state_dim;  // output layer
    n += c.state_dim * c.state_dim;            // x projection
    return n;
}

// ---------------------------------------------------------------------------
// single-stage baseline: prompt conditioning straight to acoustic latents

struct BaselineConfig {
    std::size_t width = 0;  // 0: match the two-stage parameter budget
    std::size_t depth = 3;
    VaeConfig vae;

    VelocityNetConfig net(const WorldConfig& world) const {
        VelocityNetConfig n;
        n.state_dim = WorldConfig::kFrames * vae.latent_channels;
        n.cond_dim = PromptCondition::flat_dim(world);
        n.width = width;
        n.depth = depth;
        return n;
    }
};

// Width whose parameter count comes closest to the combined planner +
// synthesizer + projection-head budget.
inline std::size_t matched_baseline_width(const SynthConfig& synth, const PlannerConfig& planner,
                                          const WorldConfig& world, std::size_t depth) {
    const std::size_t head_params =
        WorldConfig::kSemDims * WorldConfig::kSemDims + WorldConfig::kSemDims +
        WorldConfig::kSemDims * synth.semantic_dim + synth.semantic_dim;
    const std::size_t target =
        velocity_param_count(synth.net()) + velocity_param_count(planner.net(world)) + head_params;

    BaselineConfig probe;
    probe.depth = depth;
    probe.vae = synth.vae;
    std::size_t best_width = 8;
    std::size_t best_diff = SIZE_MAX;
    for (std::size_t w = 8; w <= 2048; ++w) {
        probe.width = w;
        const std::size_t count = velocity_param_count(probe.net(world));
        const std::size_t diff = count > target ? count - target : target - count;
        if (diff < best_diff) {
            best_diff = diff;
            best_width = w;
        }
    }
    return best_width;
}

struct BaselineTrainResult {
    VelocityModel model;
    std::vector<double> losses;
    std::size_t dropped_conditions = 0;
    std::size_t total_conditions = 0;
};

// Flow matching from prompt conditions to normalized acoustic latents, with
// condition dropout for CFG, mirroring the planner's training recipe.
inline BaselineTrainResult train_baseline(const DatasetShard& dataset, const AcousticVae& vae,
                                          const BaselineConfig& bcfg, const TrainConfig& cfg) {
    if (dataset.count() == 0) throw std::invalid_argument("train_baseline: empty dataset");
    if (bcfg.width == 0) throw std::invalid_argument("train_baseline: width must be resolved before training");
    const std::size_t state = WorldConfig::kFrames * vae.config().latent_channels;
    const std::size_t cond_dim = PromptCondition::flat_dim(dataset.world);

    Tensor latents({dataset.count(), state});
    Tensor conds({dataset.count(), cond_dim});
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        const Tensor z = vae.encode_norm_flat(dataset.clips[i]);
        std::copy(z.values.begin(), z.values.end(), latents.values.begin() + i * state);
        const Tensor c = encode_prompt(dataset.prompts[i], dataset.world).flat();
        std::copy(c.values.begin(), c.values.end(), conds.values.begin() + i * cond_dim);
    }

    BaselineTrainResult result;
    Rng init_rng(derive_seed(cfg.seed, 0xba5e));
    result.model = VelocityModel(bcfg.net(dataset.world), init_rng);
    Rng rng(cfg.seed);
    detail::EmaTracker ema(result.model.params(), cfg.ema_decay);
    result.losses.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::size_t B = cfg.batch;
        Tensor z1({B, state});
        Tensor cond({B, cond_dim});
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t idx = rng.uniform_int(dataset.count());
            std::copy(latents.values.begin() + idx * state, latents.values.begin() + (idx + 1) * state,
                      z1.values.begin() + b * state);
            ++result.total_conditions;
            if (rng.uniform() <= cfg.cond_dropout) {
                ++result.dropped_conditions;
            } else {
                std::copy(conds.values.begin() + idx * cond_dim, conds.values.begin() + (idx + 1) * cond_dim,
                          cond.values.begin() + b * cond_dim);
            }
        }
        Tensor z0 = rng.normal_tensor({B, state});
        std::vector<double> t(B);
        for (double& ti : t) ti = sample_timestep(rng, cfg.timestep_mu, cfg.timestep_sigma);
        Tensor zt = interpolate_rows(z0, z1, t);

        Tape tape;
        Var v = result.model.forward_tape(tape, t, zt, cond);
        Var loss = fm_loss_tape(tape, v, z0, z1);
        const double loss_val = tape.value(loss).item();
        detail::check_loss_finite(loss_val, step, "train_baseline");
        result.losses.push_back(loss_val);

        result.model.params().zero_grads();
        tape.backward(loss);
        detail::clip_and_step(result.model.params(), cfg.lr.at(step + 1), cfg);
        ema.update(result.model.params());
    }
    ema.apply(result.model.params());
    return result;
}

inline std::vector<Tensor> baseline_generate_batch(const VelocityModel& model, const AcousticVae& vae,
                                                   const std::vector<PromptSpec>& prompts, const WorldConfig& world,
                                                   std::uint64_t seed, const SamplerConfig& cfg = {50, 3.0, 0}) {
    const std::size_t B = prompts.size();
    const std::size_t cond_dim = PromptCondition::flat_dim(world);
    Tensor conds({B, cond_dim});
    for (std::size_t i = 0; i < B; ++i) {
        const Tensor c = encode_prompt(prompts[i], world).flat();
        std::copy(c.values.begin(), c.values.end(), conds.values.begin() + i * cond_dim);
    }
    Rng rng(seed);
    Tensor z = synth_sample_batch(model, vae, conds, cfg, rng);
    std::vector<Tensor> specs;
    specs.reserve(B);
    for (std::size_t i = 0; i < B; ++i) {
        Tensor zi({WorldConfig::kFrames, vae.config().latent_channels});
        std::copy(z.values.begin() + i * z.cols(), z.values.begin() + (i + 1) * z.cols(), zi.values.begin());
        specs.push_back(vae.decode(zi));
    }
    return specs;
}

// ---------------------------------------------------------------------------
// evaluation runs

struct EvalConfig {
    std::size_t eval_prompts = 200;
    std::uint64_t seed_plan = 101;
    std::uint64_t seed_synth = 202;
    PipelineSamplerConfig pipeline;
    SamplerConfig baseline_sampler{50, 3.0, 0};
};

inline std::vector<double> alignment_summary(const std::vector<Tensor>& specs, const std::vector<PromptSpec>& prompts,
                                             const WorldConfig& world) {
    double f1 = 0.0, order = 0.0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const AlignmentScore a = alignment_score(specs[i], prompts[i], world);
        f1 += a.set_f1;
        order += a.order_accuracy;
    }
    const double n = static_cast<double>(specs.size());
    return {f1 / n, order / n};
}

// Table-1-style comparison: the two-stage pipeline and the matched baseline
// generate one clip per held-out prompt; alignment, FD, KL and IS are judged
// by the oracle against the prompts' real clips.
inline MetricReport run_generation_eval(const PlannerModel& planner, const SynthStack& synth, const AcousticVae& vae,
                                        const VelocityModel& baseline, const DatasetShard& heldout,
                                        const EvalConfig& cfg) {
    if (heldout.count() < cfg.eval_prompts) {
        throw std::invalid_argument("run_generation_eval: held-out shard smaller than eval_prompts");
    }
    const WorldConfig& world = heldout.world;
    std::vector<PromptSpec> prompts(heldout.prompts.begin(), heldout.prompts.begin() + cfg.eval_prompts);
    std::vector<Tensor> real(heldout.clips.begin(), heldout.clips.begin() + cfg.eval_prompts);
    const FeatureStats real_stats = feature_stats(real, world);

    MetricReport report;
    report.kind = "generation";
    report.columns = {"alignment_f1", "order_accuracy", "fd", "kl", "is_analog"};

    auto add_model_row = [&](const std::string& name, const std::vector<Tensor>& specs) {
        const std::vector<double> align = alignment_summary(specs, prompts, world);
        const double fd = frechet_distance(real_stats, feature_stats(specs, world));
        const double kl = kl_event_divergence(real, specs, world);
        const double is = is_analog(specs, world);
        report.add_row(name, {align[0], align[1], fd, kl, is});
    };

    add_model_row("two_stage", generate_batch(planner, synth, vae, prompts, world, cfg.seed_plan, cfg.seed_synth,
                                              cfg.pipeline));
    add_model_row("baseline", baseline_generate_batch(baseline, vae, prompts, world, cfg.seed_plan,
                                                      cfg.baseline_sampler));
    return report;
}

// Editing evaluation over the hard benchmark. Reports the target-prompt F1 of
// the untouched sources and of conditional / unconditional edits, plus FD of
// each edited set against a balanced reference (sources + disjoint real
// clips). No KL column: edits have no paired reference distribution.
inline MetricReport run_editing_eval(const std::vector<EditCase>& benchmark,
                                     const std::vector<std::size_t>& source_clip_indices, const PlannerModel& planner,
                                     const SynthStack& synth, const AcousticVae& vae, const DatasetShard& heldout,
                                     const std::vector<std::size_t>& reference_clip_indices, const EditConfig& edit_cfg,
                                     const SamplerConfig& synth_cfg = {25, 1.0, 0}) {
    const WorldConfig& world = heldout.world;
    if (benchmark.size() != 100) {
        std::cerr << "warning: editing benchmark has " << benchmark.size() << " pairs, expected 100; proceeding\n";
    }
    std::vector<Tensor> reference;
    for (std::size_t idx : source_clip_indices) reference.push_back(heldout.clips[idx]);
    for (std::size_t idx : reference_clip_indices) reference.push_back(heldout.clips[idx]);
    const FeatureStats ref_stats = feature_stats(reference, world);

    double src_f1 = 0.0;
    std::vector<Tensor> cond_edits, uncond_edits;
    std::vector<double> cond_f1s, uncond_f1s;
    for (std::size_t i = 0; i < benchmark.size(); ++i) {
        const EditCase& ec = benchmark[i];
        const Tensor& src_clip = heldout.clips[source_clip_indices.at(ec.source_index)];
        const PromptCondition cond_tgt = encode_prompt(ec.target, world);
        const PromptCondition cond_src = encode_prompt(ec.source, world);
        src_f1 += alignment_score(src_clip, ec.target, world).set_f1;

        EditConfig per_case = edit_cfg;
        per_case.seed = derive_seed(edit_cfg.seed, 0x0e00 + i);

        per_case.conditional_source = true;
        Tensor e_cond = edit_end_to_end(planner, synth, vae, src_clip, cond_tgt, &cond_src, per_case, world, synth_cfg);
        cond_f1s.push_back(alignment_score(e_cond, ec.target, world).set_f1);
        cond_edits.push_back(std::move(e_cond));

        per_case.conditional_source = false;
        Tensor e_unc = edit_end_to_end(planner, synth, vae, src_clip, cond_tgt, nullptr, per_case, world, synth_cfg);
        uncond_f1s.push_back(alignment_score(e_unc, ec.target, world).set_f1);
        uncond_edits.push_back(std::move(e_unc));
    }
    const double n = static_cast<double>(benchmark.size());
    auto mean = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };

    MetricReport report;
    report.kind = "editing";
    report.columns = {"target_f1", "fd", "is_analog"};
    std::vector<Tensor> sources;
    for (std::size_t idx : source_clip_indices) sources.push_back(heldout.clips[idx]);
    report.add_row("source_audio", {src_f1 / n, frechet_distance(ref_stats, feature_stats(sources, world)),
                                    is_analog(sources, world)});
    report.add_row("conditional", {mean(cond_f1s), frechet_distance(ref_stats, feature_stats(cond_edits, world)),
                                   is_analog(cond_edits, world)});
    report.add_row("unconditional", {mean(uncond_f1s), frechet_distance(ref_stats, feature_stats(uncond_edits, world)),
                                     is_analog(uncond_edits, world)});
    return report;
}

// ---------------------------------------------------------------------------
// dimension ablation

struct AblationOutcome {
    std::size_t semantic_dim = 0;
    SynthStack synth;
    PlannerTrainResult planner;
};

// Trains the synthesizer(+head) and planner per semantic dimension with the
// same data and seeds, then reports alignment of generated clips and
// reconstruction losses of ground-truth-conditioned resynthesis on held-out
// clips.
inline MetricReport ablate_d(const DatasetShard& train, const DatasetShard& heldout, const AcousticVae& vae,
                             const std::vector<std::size_t>& dims, SynthConfig synth_cfg, PlannerConfig planner_cfg,
                             const TrainConfig& tcfg, const EvalConfig& ecfg,
                             std::vector<AblationOutcome>* outcomes = nullptr) {
    const WorldConfig& world = train.world;
    MetricReport report;
    report.kind = "ablation";
    report.columns = {"alignment_f1", "order_accuracy", "mel_analog", "multiscale"};

    for (std::size_t d : dims) {
        synth_cfg.semantic_dim = d;
        planner_cfg.semantic_dim = d;
        SynthStack stack = train_synthesizer(train, vae, synth_cfg, tcfg);
        PlannerTrainResult planner = train_planner(train, stack.head, planner_cfg, tcfg);

        // reconstruction: resynthesize held-out clips from their ground-truth
        // projected semantics
        const std::size_t n_recon = std::min<std::size_t>(ecfg.eval_prompts, heldout.count());
        Tensor plans({n_recon, WorldConfig::kSemFrames * d});
        for (std::size_t i = 0; i < n_recon; ++i) {
            const Tensor s1 = project_clip_semantics(stack.head, heldout.semantics[i]);
            std::copy(s1.values.begin(), s1.values.end(), plans.values.begin() + i * s1.numel());
        }
        Rng rng(derive_seed(ecfg.seed_synth, d));
        Tensor z = synth_sample_batch(stack.model, vae, plans, {25, 1.0, 0}, rng);
        double mel = 0.0, multi = 0.0;
        for (std::size_t i = 0; i < n_recon; ++i) {
            Tensor zi({WorldConfig::kFrames, vae.config().latent_channels});
            std::copy(z.values.begin() + i * z.cols(), z.values.begin() + (i + 1) * z.cols(), zi.values.begin());
            const ReconMetrics m = recon_metrics(heldout.clips[i], vae.decode(zi));
            mel += m.mel_analog;
            multi += m.multiscale;
        }
        mel /= static_cast<double>(n_recon);
        multi /= static_cast<double>(n_recon);

        // alignment of prompt-driven generation
        std::vector<PromptSpec> prompts(heldout.prompts.begin(), heldout.prompts.begin() + ecfg.eval_prompts);
        const std::vector<Tensor> specs = generate_batch(planner.model, stack, vae, prompts, world, ecfg.seed_plan,
                                                         ecfg.seed_synth, ecfg.pipeline);
        const std::vector<double> align = alignment_summary(specs, prompts, world);

        report.add_row("d=" + std::to_string(d), {align[0], align[1], mel, multi});
        if (outcomes != nullptr) outcomes->push_back({d, std::move(stack), std::move(planner)});
    }
    return report;
}

}  // namespace flowplan
