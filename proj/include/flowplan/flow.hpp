#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "flowplan/autodiff.hpp"
#include "flowplan/rng.hpp"
#include "flowplan/tensor.hpp"

// Flow matching primitives: straight-path interpolation, the velocity
// regression loss, logit-normal timestep sampling, Euler ODE integration and
// classifier-free guidance. Convention: t=0 is noise, t=1 is data.

namespace flowplan {

struct SamplerConfig {
    std::size_t steps = 50;
    double guidance_scale = 1.0;
    std::uint64_t seed = 0;
};

inline Tensor interpolate(const Tensor& x0, const Tensor& x1, double t) {
    require_same_shape("interpolate", x0, x1);
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolate: t=" + std::to_string(t) + " outside [0,1]");
    Tensor out(x0.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] = (1.0 - t) * x0.values[i] + t * x1.values[i];
    return out;
}

// Batched variant with one t per row; used by training loops.
inline Tensor interpolate_rows(const Tensor& x0, const Tensor& x1, const std::vector<double>& t) {
    require_same_shape("interpolate", x0, x1);
    if (x0.rank() != 2 || t.size() != x0.shape[0]) {
        throw ShapeError("interpolate", "need one t per row of " + x0.shape_str());
    }
    Tensor out(x0.shape);
    const std::size_t n = x0.shape[1];
    for (std::size_t i = 0; i < x0.shape[0]; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.values[i * n + j] = (1.0 - t[i]) * x0.values[i * n + j] + t[i] * x1.values[i * n + j];
        }
    }
    return out;
}

inline Tensor fm_target(const Tensor& x0, const Tensor& x1) { return sub(x1, x0); }

// Mean over all elements of (v_pred - (x1 - x0))^2.
inline double fm_loss(const Tensor& v_pred, const Tensor& x0, const Tensor& x1) {
    require_same_shape("fm_loss", v_pred, x0);
    require_same_shape("fm_loss", v_pred, x1);
    double s = 0.0;
    for (std::size_t i = 0; i < v_pred.numel(); ++i) {
        const double d = v_pred.values[i] - (x1.values[i] - x0.values[i]);
        s += d * d;
    }
    return s / static_cast<double>(v_pred.numel());
}

// Tape version for training; gradients flow into v_pred only.
inline Var fm_loss_tape(Tape& tape, Var v_pred, const Tensor& x0, const Tensor& x1) {
    require_same_shape("fm_loss", tape.value(v_pred), x0);
    require_same_shape("fm_loss", tape.value(v_pred), x1);
    Var diff = tape.sub(v_pred, tape.constant(fm_target(x0, x1)));
    return tape.reduce_mean(tape.mul(diff, diff));
}

// t = sigmoid(mu + sigma * n), n ~ N(0,1); strictly inside (0,1).
inline double sample_timestep(Rng& rng, double mu = 0.4, double sigma = 1.0) {
    if (sigma <= 0.0) throw std::invalid_argument("sample_timestep: sigma must be positive");
    return sigmoid(mu + sigma * rng.normal());
}

inline Tensor cfg_velocity(const Tensor& v_cond, const Tensor& v_uncond, double g) {
    require_same_shape("cfg_velocity", v_cond, v_uncond);
    Tensor out(v_cond.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values[i] = v_uncond.values[i] + g * (v_cond.values[i] - v_uncond.values[i]);
    }
    return out;
}

// Euler integration of dx/dt = field(t, x) over the uniform grid t_k = k/steps
// from t=0 (noise) to t=1 (data).
using VelocityField = std::function<Tensor(double, const Tensor&)>;

inline Tensor euler_integrate(const VelocityField& field, Tensor x, const SamplerConfig& config) {
    if (config.steps == 0) throw std::invalid_argument("euler_integrate: steps must be >= 1");
    const double h = 1.0 / static_cast<double>(config.steps);
    for (std::size_t k = 0; k < config.steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const Tensor v = field(t, x);
        require_same_shape("euler_integrate", x, v);
        for (std::size_t i = 0; i < x.numel(); ++i) x.values[i] += h * v.values[i];
        if (!x.all_finite()) {
            throw std::runtime_error("euler_integrate: non-finite state at step " + std::to_string(k));
        }
    }
    return x;
}

}  // namespace flowplan
