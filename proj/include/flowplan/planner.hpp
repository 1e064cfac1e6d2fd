#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowplan/acoustic.hpp"

// Text-to-semantic flow model: trains a velocity field over projected
// semantics against frozen-head targets and samples plans with classifier-free
// guidance. A planner records the checksum of the head it was trained against
// and refuses to compose with a synthesizer trained against a different one.

namespace flowplan {

struct PlannerConfig {
    std::size_t semantic_dim = 8;  // d, must match the frozen head
    std::size_t width = 256;
    std::size_t depth = 3;

    VelocityNetConfig net(const WorldConfig& world) const {
        VelocityNetConfig n;
        n.state_dim = WorldConfig::kSemFrames * semantic_dim;
        n.cond_dim = PromptCondition::flat_dim(world);
        n.width = width;
        n.depth = depth;
        return n;
    }
};

struct PlannerModel {
    VelocityModel net;
    LatentScaler sem_scaler;  // normalization of the frozen head's output space
    std::string head_checksum;
    std::size_t semantic_dim = 8;
};

struct PlannerTrainResult {
    PlannerModel model;
    std::vector<double> losses;
    std::size_t dropped_conditions = 0;  // rows nulled for CFG training
    std::size_t total_conditions = 0;
};

inline void require_matching_head(const std::string& planner_checksum, const std::string& synth_checksum) {
    if (planner_checksum != synth_checksum) {
        throw std::runtime_error("head checksum mismatch: planner trained against " + planner_checksum +
                                 ", synthesizer provides " + synth_checksum);
    }
}

inline PlannerTrainResult train_planner(const DatasetShard& dataset, const ProjectionHead& head,
                                        const PlannerConfig& pcfg, const TrainConfig& cfg) {
    if (!head.frozen()) throw std::runtime_error("train_planner: projection head must be frozen");
    if (dataset.count() == 0) throw std::invalid_argument("train_planner: empty dataset");

    const std::size_t state = WorldConfig::kSemFrames * head.out_dim();
    const std::size_t cond_dim = PromptCondition::flat_dim(dataset.world);

    // frozen-head targets and prompt encodings, computed once
    Tensor targets({dataset.count(), state});
    Tensor conds({dataset.count(), cond_dim});
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        const Tensor s1 = project_clip_semantics(head, dataset.semantics[i]);
        std::copy(s1.values.begin(), s1.values.end(), targets.values.begin() + i * state);
        const Tensor c = encode_prompt(dataset.prompts[i], dataset.world).flat();
        std::copy(c.values.begin(), c.values.end(), conds.values.begin() + i * cond_dim);
    }

    PlannerTrainResult result;
    result.model.semantic_dim = head.out_dim();
    result.model.head_checksum = head.checksum();
    result.model.sem_scaler = LatentScaler::fit(targets);
    Rng init_rng(derive_seed(cfg.seed, 0x914a));
    result.model.net = VelocityModel(pcfg.net(dataset.world), init_rng);

    const Tensor targets_norm = result.model.sem_scaler.apply_rows(targets);
    Rng rng(cfg.seed);
    detail::EmaTracker ema(result.model.net.params(), cfg.ema_decay);
    result.losses.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::size_t B = cfg.batch;
        Tensor s1({B, state});
        Tensor cond({B, cond_dim});
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t idx = rng.uniform_int(dataset.count());
            std::copy(targets_norm.values.begin() + idx * state, targets_norm.values.begin() + (idx + 1) * state,
                      s1.values.begin() + b * state);
            ++result.total_conditions;
            if (rng.uniform() <= cfg.cond_dropout) {
                ++result.dropped_conditions;  // row stays zero: null condition
            } else {
                std::copy(conds.values.begin() + idx * cond_dim, conds.values.begin() + (idx + 1) * cond_dim,
                          cond.values.begin() + b * cond_dim);
            }
        }
        Tensor s0 = rng.normal_tensor({B, state});
        std::vector<double> t(B);
        for (double& ti : t) ti = sample_timestep(rng, cfg.timestep_mu, cfg.timestep_sigma);
        Tensor st = interpolate_rows(s0, s1, t);

        Tape tape;
        Var v = result.model.net.forward_tape(tape, t, st, cond);
        Var loss = fm_loss_tape(tape, v, s0, s1);

        const double loss_val = tape.value(loss).item();
        detail::check_loss_finite(loss_val, step, "train_planner");
        result.losses.push_back(loss_val);

        result.model.net.params().zero_grads();
        tape.backward(loss);
        detail::clip_and_step(result.model.net.params(), cfg.lr.at(step + 1), cfg);
        ema.update(result.model.net.params());
    }
    ema.apply(result.model.net.params());
    return result;
}

// CFG sampling of semantic plans; rows come back de-normalized in the frozen
// head's output space, ready to condition the synthesizer.
inline Tensor plan_sample_batch(const PlannerModel& planner, const Tensor& cond_rows, const SamplerConfig& cfg,
                                Rng& rng) {
    return planner.sem_scaler.unapply_rows(flow_sample_batch(planner.net, cond_rows, cfg, rng));
}

// Single prompt -> plan [kSemFrames x d].
inline Tensor plan_sample(const PlannerModel& planner, const PromptCondition& cond, const SamplerConfig& cfg,
                          Rng& rng) {
    Tensor flat = cond.flat();
    Tensor s = plan_sample_batch(planner, reshape(flat, {1, flat.numel()}), cfg, rng);
    return reshape(s, {WorldConfig::kSemFrames, planner.semantic_dim});
}

struct PipelineSamplerConfig {
    SamplerConfig plan{50, 3.0, 0};
    SamplerConfig synth{25, 1.0, 0};
};

// plan -> synthesize -> decode. Refuses to run across mismatched heads.
inline Tensor generate_end_to_end(const PlannerModel& planner, const SynthStack& synth, const AcousticVae& vae,
                                  const PromptSpec& prompt, const WorldConfig& world, std::uint64_t seed_plan,
                                  std::uint64_t seed_synth, const PipelineSamplerConfig& cfg = {}) {
    require_matching_head(planner.head_checksum, synth.head_checksum);
    Rng plan_rng(seed_plan);
    Tensor plan = plan_sample(planner, encode_prompt(prompt, world), cfg.plan, plan_rng);
    Rng synth_rng(seed_synth);
    Tensor z = synth_sample(synth.model, vae, plan, cfg.synth, synth_rng);
    return vae.decode(z);
}

// Batched pipeline over many prompts with one shared rng per stage.
inline std::vector<Tensor> generate_batch(const PlannerModel& planner, const SynthStack& synth,
                                          const AcousticVae& vae, const std::vector<PromptSpec>& prompts,
                                          const WorldConfig& world, std::uint64_t seed_plan, std::uint64_t seed_synth,
                                          const PipelineSamplerConfig& cfg = {}) {
    require_matching_head(planner.head_checksum, synth.head_checksum);
    const std::size_t B = prompts.size();
    const std::size_t cond_dim = PromptCondition::flat_dim(world);
    Tensor conds({B, cond_dim});
    for (std::size_t i = 0; i < B; ++i) {
        const Tensor c = encode_prompt(prompts[i], world).flat();
        std::copy(c.values.begin(), c.values.end(), conds.values.begin() + i * cond_dim);
    }
    Rng plan_rng(seed_plan);
    Tensor plans = plan_sample_batch(planner, conds, cfg.plan, plan_rng);
    Rng synth_rng(seed_synth);
    Tensor z = synth_sample_batch(synth.model, vae, plans, cfg.synth, synth_rng);

    std::vector<Tensor> specs;
    specs.reserve(B);
    const std::size_t zdim = z.cols();
    for (std::size_t i = 0; i < B; ++i) {
        Tensor zi({WorldConfig::kFrames, vae.config().latent_channels});
        std::copy(z.values.begin() + i * zdim, z.values.begin() + (i + 1) * zdim, zi.values.begin());
        specs.push_back(vae.decode(zi));
    }
    return specs;
}

}  // namespace flowplan
