#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowplan/checkpoint.hpp"
#include "flowplan/dataset.hpp"
#include "flowplan/flow.hpp"
#include "flowplan/scaler.hpp"
#include "flowplan/velocity_net.hpp"

// Acoustic side of the pipeline: the per-frame autoencoder over spectrogram
// frames, the projection head that compresses oracle semantics into the
// planning space, and the synthesizer that flows noise to acoustic latents
// conditioned on projected semantics. The head trains jointly with the
// synthesizer and is frozen afterwards; everything downstream of the freeze
// treats its weights as immutable.

namespace flowplan {

struct TrainConfig {
    std::size_t steps = 20000;
    std::size_t batch = 32;
    LrSchedule lr;             // defaults: 1e-4, 1k warmup, step decay 0.5/5k
    AdamwConfig adamw;
    double grad_clip = 0.0;    // global L2 clip, 0 disables
    double ema_decay = 0.0;    // parameter EMA applied at the end, 0 disables
    double cond_dropout = 0.1; // condition nulling probability (CFG training)
    double timestep_mu = 0.4;
    double timestep_sigma = 1.0;
    std::uint64_t seed = 0;
};

namespace detail {

// Tracks an exponential moving average of every parameter; swapped in when
// training finishes.
class EmaTracker {
public:
    EmaTracker(const ParamStore& store, double decay) : decay_(decay) {
        if (decay_ <= 0.0) return;
        for (const auto& e : store.entries()) shadow_.push_back(e.value);
    }

    void update(const ParamStore& store) {
        if (decay_ <= 0.0) return;
        for (std::size_t i = 0; i < shadow_.size(); ++i) {
            const auto& v = store.entries()[i].value.values;
            auto& s = shadow_[i].values;
            for (std::size_t j = 0; j < s.size(); ++j) s[j] = decay_ * s[j] + (1.0 - decay_) * v[j];
        }
    }

    void apply(ParamStore& store) {
        if (decay_ <= 0.0) return;
        for (std::size_t i = 0; i < shadow_.size(); ++i) store.mutable_entries()[i].value = shadow_[i];
    }

private:
    double decay_ = 0.0;
    std::vector<Tensor> shadow_;
};

inline void clip_and_step(ParamStore& store, double lr, const TrainConfig& cfg) {
    if (cfg.grad_clip > 0.0) {
        const double norm = store.grad_l2_norm();
        if (norm > cfg.grad_clip) store.scale_grads(cfg.grad_clip / norm);
    }
    store.adamw_step(lr, cfg.adamw);
}

inline void check_loss_finite(double loss, std::size_t step, const char* what) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error(std::string(what) + ": non-finite loss at step " + std::to_string(step));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// acoustic autoencoder

struct VaeConfig {
    std::size_t latent_channels = 6;
    std::size_t hidden = 32;

    nlohmann::json to_json() const { return {{"latent_channels", latent_channels}, {"hidden", hidden}}; }
    static VaeConfig from_json(const nlohmann::json& j) {
        VaeConfig c;
        c.latent_channels = j.at("latent_channels").get<std::size_t>();
        c.hidden = j.at("hidden").get<std::size_t>();
        return c;
    }
};

// Deterministic per-frame autoencoder (affine + SiLU + affine each way).
// Frame-local by construction: permuting time frames permutes latents.
class AcousticVae {
public:
    AcousticVae() = default;
    AcousticVae(VaeConfig cfg, std::uint64_t init_seed) : cfg_(cfg), init_seed_(init_seed) {
        Rng rng(init_seed);
        mlp_init(params_, enc_spec(), rng);
        mlp_init(params_, dec_spec(), rng);
        scaler_ = LatentScaler::identity(latent_dim());
    }

    const VaeConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::uint64_t init_seed() const { return init_seed_; }

    std::size_t latent_dim() const { return WorldConfig::kFrames * cfg_.latent_channels; }

    Tensor encode_rows(const Tensor& frames) const {
        EvalCtx ctx{params_};
        return mlp_forward(ctx, enc_spec(), ctx.input(frames));
    }
    Tensor decode_rows(const Tensor& latents) const {
        EvalCtx ctx{params_};
        return mlp_forward(ctx, dec_spec(), ctx.input(latents));
    }

    // [kFrames x kChannels] -> [kFrames x latent_channels]
    Tensor encode(const Tensor& clip) const {
        if (clip.shape != std::vector<std::size_t>{WorldConfig::kFrames, WorldConfig::kChannels}) {
            throw ShapeError("vae_encode", "expected clip [64x16], got " + clip.shape_str());
        }
        return encode_rows(clip);
    }
    Tensor decode(const Tensor& z) const {
        if (z.shape != std::vector<std::size_t>{WorldConfig::kFrames, cfg_.latent_channels}) {
            throw ShapeError("vae_decode", "expected latent [64x" + std::to_string(cfg_.latent_channels) +
                                               "], got " + z.shape_str());
        }
        return decode_rows(z);
    }

    MlpSpec enc_spec() const { return {"enc_", {WorldConfig::kChannels, cfg_.hidden, cfg_.latent_channels}}; }
    MlpSpec dec_spec() const { return {"dec_", {cfg_.latent_channels, cfg_.hidden, WorldConfig::kChannels}}; }

    // Flat-latent statistics fitted on the training set after optimization;
    // flow models operate on the normalized latents.
    const LatentScaler& latent_scaler() const { return scaler_; }
    void set_latent_scaler(LatentScaler s) { scaler_ = std::move(s); }

    // [kFrames x kChannels] -> normalized flat latent [kFrames*latent_channels]
    Tensor encode_norm_flat(const Tensor& clip) const {
        return scaler_.apply(reshape(encode(clip), {latent_dim()}));
    }
    // normalized flat latent -> [kFrames x kChannels]
    Tensor decode_norm_flat(const Tensor& z_norm) const {
        return decode(reshape(scaler_.unapply(z_norm), {WorldConfig::kFrames, cfg_.latent_channels}));
    }

private:
    VaeConfig cfg_;
    ParamStore params_;
    std::uint64_t init_seed_ = 0;
    LatentScaler scaler_;
};

struct VaeTrainResult {
    AcousticVae vae;
    std::vector<double> losses;
};

inline VaeTrainResult train_vae(const DatasetShard& dataset, const VaeConfig& vae_cfg, const TrainConfig& cfg) {
    if (dataset.count() == 0) throw std::invalid_argument("train_vae: empty dataset");
    AcousticVae vae(vae_cfg, derive_seed(cfg.seed, 0x9a5e));
    Rng rng(cfg.seed);
    detail::EmaTracker ema(vae.params(), cfg.ema_decay);
    std::vector<double> losses;
    losses.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Tensor rows({cfg.batch * WorldConfig::kFrames, WorldConfig::kChannels});
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const Tensor& clip = dataset.clips[rng.uniform_int(dataset.count())];
            std::copy(clip.values.begin(), clip.values.end(),
                      rows.values.begin() + b * clip.numel());
        }
        Tape tape;
        TapeCtx ctx{tape, vae.params()};
        Var recon = mlp_forward(ctx, vae.dec_spec(), mlp_forward(ctx, vae.enc_spec(), ctx.input(rows)));
        Var diff = tape.sub(recon, tape.constant(rows));
        Var loss = tape.reduce_mean(tape.mul(diff, diff));

        const double loss_val = tape.value(loss).item();
        detail::check_loss_finite(loss_val, step, "train_vae");
        losses.push_back(loss_val);

        vae.params().zero_grads();
        tape.backward(loss);
        detail::clip_and_step(vae.params(), cfg.lr.at(step + 1), cfg);
        ema.update(vae.params());
    }
    ema.apply(vae.params());

    // fit the flat-latent normalization on the trained encoder
    Tensor latents({dataset.count(), vae.latent_dim()});
    for (std::size_t i = 0; i < dataset.count(); ++i) {
        const Tensor z = vae.encode(dataset.clips[i]);
        std::copy(z.values.begin(), z.values.end(), latents.values.begin() + i * vae.latent_dim());
    }
    vae.set_latent_scaler(LatentScaler::fit(latents));
    return {std::move(vae), std::move(losses)};
}

inline double vae_heldout_mse(const AcousticVae& vae, const DatasetShard& heldout) {
    double total = 0.0;
    for (const Tensor& clip : heldout.clips) total += mse(vae.decode(vae.encode(clip)), clip);
    return total / static_cast<double>(heldout.count());
}

// ---------------------------------------------------------------------------
// projection head

class ProjectionHead {
public:
    static constexpr std::size_t kMaxOutDim = WorldConfig::kSemDims / 2;

    ProjectionHead() = default;
    ProjectionHead(std::size_t out_dim, std::uint64_t init_seed) : out_dim_(out_dim) {
        if (out_dim_ == 0 || out_dim_ > kMaxOutDim) {
            throw std::invalid_argument("projection head: output dim " + std::to_string(out_dim_) +
                                        " outside [1, " + std::to_string(kMaxOutDim) + "]");
        }
        Rng rng(init_seed);
        mlp_init(params_, spec(), rng);
    }

    std::size_t out_dim() const { return out_dim_; }
    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    const ParamStore& params() const { return params_; }
    ParamStore& mutable_params() {
        if (frozen_) throw std::runtime_error("projection head: frozen, weights are immutable");
        return params_;
    }

    // [R x kSemDims] -> [R x out_dim]; per-frame application.
    Tensor project(const Tensor& sem_rows) const {
        if (sem_rows.rank() != 2 || sem_rows.shape[1] != WorldConfig::kSemDims) {
            throw ShapeError("project_semantics", "expected rows [Rx" + std::to_string(WorldConfig::kSemDims) +
                                                      "], got " + sem_rows.shape_str());
        }
        EvalCtx ctx{params_};
        return mlp_forward(ctx, spec(), ctx.input(sem_rows));
    }

    // Trainable projection; rejected once frozen.
    Var project_tape(Tape& tape, const Tensor& sem_rows) {
        TapeCtx ctx{tape, mutable_params()};
        return mlp_forward(ctx, spec(), ctx.input(sem_rows));
    }

    std::string checksum() const { return weights_checksum(params_); }

    MlpSpec spec() const { return {"proj_", {WorldConfig::kSemDims, WorldConfig::kSemDims, out_dim_}}; }

private:
    std::size_t out_dim_ = 8;
    ParamStore params_;
    bool frozen_ = false;
};

// Projected semantics of one clip, flattened to the planner/synthesizer
// condition layout [kSemFrames * d].
inline Tensor project_clip_semantics(const ProjectionHead& head, const Tensor& semantics) {
    return reshape(head.project(semantics), {WorldConfig::kSemFrames * head.out_dim()});
}

// ---------------------------------------------------------------------------
// synthesizer

struct SynthConfig {
    std::size_t semantic_dim = 8;  // d
    std::size_t width = 256;
    std::size_t depth = 3;
    VaeConfig vae;

    VelocityNetConfig net() const {
        VelocityNetConfig n;
        n.state_dim = WorldConfig::kFrames * vae.latent_channels;
        n.cond_dim = WorldConfig::kSemFrames * semantic_dim;
        n.width = width;
        n.depth = depth;
        return n;
    }
};

struct SynthStack {
    VelocityModel model;
    ProjectionHead head;
    std::string head_checksum;
    std::vector<double> losses;
};

// Joint optimization of the synthesizer and the projection head: gradients of
// the flow loss reach both. The head is frozen on completion and its checksum
// recorded so downstream consumers can verify they compose with it.
inline SynthStack train_synthesizer(const DatasetShard& dataset, const AcousticVae& vae, const SynthConfig& synth_cfg,
                                    const TrainConfig& cfg) {
    if (dataset.count() == 0) throw std::invalid_argument("train_synthesizer: empty dataset");
    Rng init_rng(derive_seed(cfg.seed, 0x51f7));
    SynthStack stack{VelocityModel(synth_cfg.net(), init_rng),
                     ProjectionHead(synth_cfg.semantic_dim, derive_seed(cfg.seed, 0x6ead)), "", {}};
    Rng rng(cfg.seed);
    detail::EmaTracker ema_model(stack.model.params(), cfg.ema_decay);
    detail::EmaTracker ema_head(stack.head.params(), cfg.ema_decay);

    const std::size_t state = synth_cfg.net().state_dim;
    const std::size_t sem_rows_per_clip = WorldConfig::kSemFrames;
    stack.losses.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::size_t B = cfg.batch;
        Tensor clip_rows({B * WorldConfig::kFrames, WorldConfig::kChannels});
        Tensor sem_rows({B * sem_rows_per_clip, WorldConfig::kSemDims});
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t idx = rng.uniform_int(dataset.count());
            const Tensor& clip = dataset.clips[idx];
            const Tensor& sem = dataset.semantics[idx];
            std::copy(clip.values.begin(), clip.values.end(), clip_rows.values.begin() + b * clip.numel());
            std::copy(sem.values.begin(), sem.values.end(), sem_rows.values.begin() + b * sem.numel());
        }
        // normalized acoustic targets through the frozen codec
        Tensor z1 = vae.latent_scaler().apply_rows(reshape(vae.encode_rows(clip_rows), {B, state}));
        Tensor z0 = rng.normal_tensor({B, state});
        std::vector<double> t(B);
        for (double& ti : t) ti = sample_timestep(rng, cfg.timestep_mu, cfg.timestep_sigma);
        Tensor zt = interpolate_rows(z0, z1, t);

        Tape tape;
        Var s1 = tape.reshape(stack.head.project_tape(tape, sem_rows),
                              {B, sem_rows_per_clip * synth_cfg.semantic_dim});
        Var v = stack.model.forward_tape(tape, t, zt, s1);
        Var loss = fm_loss_tape(tape, v, z0, z1);

        const double loss_val = tape.value(loss).item();
        detail::check_loss_finite(loss_val, step, "train_synthesizer");
        stack.losses.push_back(loss_val);

        stack.model.params().zero_grads();
        stack.head.mutable_params().zero_grads();
        tape.backward(loss);
        const double lr = cfg.lr.at(step + 1);
        detail::clip_and_step(stack.model.params(), lr, cfg);
        detail::clip_and_step(stack.head.mutable_params(), lr, cfg);
        ema_model.update(stack.model.params());
        ema_head.update(stack.head.params());
    }
    ema_model.apply(stack.model.params());
    ema_head.apply(stack.head.mutable_params());
    stack.head.freeze();
    stack.head_checksum = stack.head.checksum();
    return stack;
}

// Generic CFG-aware Euler sampling of a velocity model from N(0,I) noise.
// Guidance 1.0 uses the conditional field directly and never evaluates the
// unconditional (zero-condition) branch.
inline Tensor flow_sample_batch(const VelocityModel& model, const Tensor& cond_rows, const SamplerConfig& cfg,
                                Rng& rng) {
    const std::size_t B = cond_rows.rows();
    Tensor x0 = rng.normal_tensor({B, model.config().state_dim});
    Tensor zeros_cond;
    if (cfg.guidance_scale != 1.0) zeros_cond = Tensor::zeros(cond_rows.shape);
    auto field = [&](double t, const Tensor& x) {
        Tensor v_cond = model.forward(t, x, cond_rows);
        if (cfg.guidance_scale == 1.0) return v_cond;
        return cfg_velocity(v_cond, model.forward(t, x, zeros_cond), cfg.guidance_scale);
    };
    return euler_integrate(field, std::move(x0), cfg);
}

// Samples raw acoustic latents for a batch of flattened semantic plans
// [B x kSemFrames*d]; rows are de-normalized and decodable by the vae.
inline Tensor synth_sample_batch(const VelocityModel& model, const AcousticVae& vae, const Tensor& plans,
                                 const SamplerConfig& cfg, Rng& rng) {
    return vae.latent_scaler().unapply_rows(flow_sample_batch(model, plans, cfg, rng));
}

// Single-plan convenience: plan [kSemFrames x d] or already flat; returns the
// acoustic latent [kFrames x latent_channels].
inline Tensor synth_sample(const VelocityModel& model, const AcousticVae& vae, const Tensor& plan,
                           const SamplerConfig& cfg, Rng& rng) {
    Tensor flat = reshape(plan, {1, plan.numel()});
    Tensor z = synth_sample_batch(model, vae, flat, cfg, rng);
    return reshape(z, {WorldConfig::kFrames, vae.config().latent_channels});
}

// ---------------------------------------------------------------------------
// reconstruction metrics

struct ReconMetrics {
    double mel_analog = 0.0;
    double multiscale = 0.0;
};

inline Tensor avg_pool_rows(const Tensor& x, std::size_t window) {
    const std::size_t rows = x.shape[0] / window, cols = x.shape[1];
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t w = 0; w < window; ++w) {
            for (std::size_t j = 0; j < cols; ++j) out.at(i, j) += x.at(i * window + w, j);
        }
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) /= static_cast<double>(window);
    }
    return out;
}

inline double mean_l1(const Tensor& a, const Tensor& b) {
    require_same_shape("mean_l1", a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return s / static_cast<double>(a.numel());
}

// mel analog: full-resolution mean L1. multiscale analog: mean of the L1 at
// 1x, 2x and 4x average pooling along time.
inline ReconMetrics recon_metrics(const Tensor& reference, const Tensor& generated) {
    require_same_shape("recon_metrics", reference, generated);
    ReconMetrics m;
    m.mel_analog = mean_l1(reference, generated);
    double total = 0.0;
    for (std::size_t window : {1u, 2u, 4u}) {
        total += mean_l1(avg_pool_rows(reference, window), avg_pool_rows(generated, window));
    }
    m.multiscale = total / 3.0;
    return m;
}

}  // namespace flowplan
