#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flowplan/planner.hpp"

// Training-free semantic editing. The edit trajectory is kept as a
// displacement on top of the source latent: at each grid time the delta
// velocity (planner field under target minus source conditioning, evaluated at
// shared noisy realizations) is averaged and accumulated. An identity edit
// (equal conditions) leaves the displacement at exactly zero, and the source
// never passes through pure noise.

namespace flowplan {

struct EditConfig {
    std::size_t n_avg = 8;
    std::size_t steps = 50;
    double t_start = 1.0 / 3.0;
    bool conditional_source = true;  // false: null (zero) source conditioning
    std::uint64_t seed = 0;
};

// v_plan(s_tgt, t, C_tgt) - v_plan(s_src, t, C_src) on state rows in the
// planner's normalized space. cond_* are flattened prompt conditions; the
// source condition may be all zeros (null conditioning).
inline Tensor delta_velocity(const PlannerModel& planner, const Tensor& s_t_tgt, const Tensor& s_t_src, double t,
                             const Tensor& cond_tgt_rows, const Tensor& cond_src_rows) {
    require_same_shape("delta_velocity", s_t_tgt, s_t_src);
    Tensor v_tgt = planner.net.forward(t, s_t_tgt, cond_tgt_rows);
    Tensor v_src = planner.net.forward(t, s_t_src, cond_src_rows);
    return sub(v_tgt, v_src);
}

namespace detail {
inline Tensor repeat_row(const Tensor& row, std::size_t n) {
    Tensor out({n, row.numel()});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(row.values.begin(), row.values.end(), out.values.begin() + i * row.numel());
    }
    return out;
}
}  // namespace detail

// Eq-style averaging over fresh noisy realizations: each realization draws one
// noise vector shared between the source and target branches, so the average
// is exactly zero whenever the displacement is zero and the conditions match.
inline Tensor averaged_delta(const PlannerModel& planner, const Tensor& s_src_norm, const Tensor& displacement,
                             double t, const Tensor& cond_tgt, const Tensor& cond_src, std::size_t n_avg, Rng& rng) {
    if (n_avg == 0) throw std::invalid_argument("averaged_delta: n_avg must be >= 1");
    if (t < 0.0 || t >= 1.0) throw std::invalid_argument("averaged_delta: t outside [0,1)");
    const std::size_t dim = s_src_norm.numel();
    Tensor src_states({n_avg, dim});
    Tensor tgt_states({n_avg, dim});
    for (std::size_t i = 0; i < n_avg; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double noisy = (1.0 - t) * rng.normal() + t * s_src_norm.values[j];
            src_states.values[i * dim + j] = noisy;
            tgt_states.values[i * dim + j] = noisy + displacement.values[j];
        }
    }
    Tensor delta = delta_velocity(planner, tgt_states, src_states, t, detail::repeat_row(cond_tgt, n_avg),
                                  detail::repeat_row(cond_src, n_avg));
    Tensor mean = Tensor::zeros({dim});
    for (std::size_t i = 0; i < n_avg; ++i) {
        for (std::size_t j = 0; j < dim; ++j) mean.values[j] += delta.values[i * dim + j];
    }
    for (double& v : mean.values) v /= static_cast<double>(n_avg);
    return mean;
}

// Integrates the averaged delta field over the uniform grid restricted to
// [t_start, 1) and returns s_src + displacement in the raw head space.
// cond_src == nullptr selects null (zero) source conditioning.
inline Tensor edit_semantics(const PlannerModel& planner, const Tensor& s_src, const PromptCondition& cond_tgt,
                             const PromptCondition* cond_src, const EditConfig& cfg) {
    if (cfg.steps == 0) throw std::invalid_argument("edit_semantics: steps must be >= 1");
    const Tensor src_flat = reshape(s_src, {s_src.numel()});
    const Tensor src_norm = planner.sem_scaler.apply(src_flat);
    const Tensor tgt_cond = cond_tgt.flat();
    const Tensor src_cond = cond_src != nullptr ? cond_src->flat() : Tensor::zeros(tgt_cond.shape);

    Rng rng(cfg.seed);
    Tensor displacement = Tensor::zeros({src_flat.numel()});
    const double h = 1.0 / static_cast<double>(cfg.steps);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double t = static_cast<double>(k) * h;
        if (t < cfg.t_start) continue;
        Tensor delta = averaged_delta(planner, src_norm, displacement, t, tgt_cond, src_cond, cfg.n_avg, rng);
        for (std::size_t j = 0; j < displacement.numel(); ++j) displacement.values[j] += h * delta.values[j];
        if (!displacement.all_finite()) {
            throw std::runtime_error("edit_semantics: non-finite displacement at step " + std::to_string(k));
        }
    }
    return add(s_src, reshape(planner.sem_scaler.unapply_displacement(displacement), s_src.shape));
}

// Full editing pipeline: project the source clip's oracle semantics through
// the frozen head, steer them toward the target prompt, re-synthesize.
inline Tensor edit_end_to_end(const PlannerModel& planner, const SynthStack& synth, const AcousticVae& vae,
                              const Tensor& source_clip, const PromptCondition& cond_tgt,
                              const PromptCondition* cond_src, const EditConfig& cfg, const WorldConfig& world,
                              const SamplerConfig& synth_cfg = {25, 1.0, 0}) {
    require_matching_head(planner.head_checksum, synth.head_checksum);
    Tensor s_src = reshape(project_clip_semantics(synth.head, oracle_encode_semantics(source_clip, world)),
                           {WorldConfig::kSemFrames, planner.semantic_dim});
    Tensor s_edit = edit_semantics(planner, s_src, cond_tgt, cond_src, cfg);
    Rng synth_rng(derive_seed(cfg.seed, 0xed17));
    return vae.decode(synth_sample(synth.model, vae, s_edit, synth_cfg, synth_rng));
}

}  // namespace flowplan
