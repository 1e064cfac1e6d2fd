#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowplan/nn.hpp"

// The velocity network v(t, x, cond): an MLP over concat[x, cond,
// time-embedding] with SiLU hidden layers, plus a residual linear projection
// of x straight into the output. Both output-side weight matrices start at
// zero, so the initial velocity field is identically zero and the untrained
// flow is the identity map. The full-rank x projection carries the
// state-proportional component of the field; the trunk only has to model the
// conditional and time-dependent remainder.

namespace flowplan {

struct VelocityNetConfig {
    std::size_t state_dim = 0;
    std::size_t cond_dim = 0;
    std::size_t width = 256;
    std::size_t depth = 3;  // hidden SiLU layers
    std::size_t time_dim = 32;

    nlohmann::json to_json() const {
        return {{"state_dim", state_dim}, {"cond_dim", cond_dim}, {"width", width},
                {"depth", depth},         {"time_dim", time_dim}};
    }
    static VelocityNetConfig from_json(const nlohmann::json& j) {
        VelocityNetConfig c;
        c.state_dim = j.at("state_dim").get<std::size_t>();
        c.cond_dim = j.at("cond_dim").get<std::size_t>();
        c.width = j.at("width").get<std::size_t>();
        c.depth = j.at("depth").get<std::size_t>();
        c.time_dim = j.at("time_dim").get<std::size_t>();
        return c;
    }
};

// Sinusoidal embedding with geometric frequencies from 1 to 1000, one row per
// timestep value.
inline Tensor time_embedding(const std::vector<double>& t, std::size_t dim = 32) {
    const std::size_t half = dim / 2;
    Tensor out({t.size(), dim});
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t j = 0; j < half; ++j) {
            const double freq =
                half > 1 ? std::pow(1000.0, static_cast<double>(j) / static_cast<double>(half - 1)) : 1.0;
            out.values[i * dim + 2 * j] = std::sin(freq * t[i]);
            out.values[i * dim + 2 * j + 1] = std::cos(freq * t[i]);
        }
    }
    return out;
}

class VelocityModel {
public:
    VelocityModel() = default;
    VelocityModel(VelocityNetConfig cfg, Rng& rng) : cfg_(cfg) { init(rng); }

    const VelocityNetConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // x [B x state], cond [B x cond], one t per row -> velocity [B x state].
    Tensor forward(const std::vector<double>& t, const Tensor& x, const Tensor& cond) const {
        EvalCtx ctx{params_};
        return forward_impl(ctx, t, x, ctx.input(cond));
    }

    Tensor forward(double t, const Tensor& x, const Tensor& cond) const {
        return forward(std::vector<double>(x.rows(), t), x, cond);
    }

    // Training path; cond may itself be a tape node (joint training of an
    // upstream module).
    Var forward_tape(Tape& tape, const std::vector<double>& t, const Tensor& x, Var cond) {
        TapeCtx ctx{tape, params_};
        return forward_impl(ctx, t, x, cond);
    }

    Var forward_tape(Tape& tape, const std::vector<double>& t, const Tensor& x, const Tensor& cond) {
        TapeCtx ctx{tape, params_};
        return forward_impl(ctx, t, x, ctx.input(cond));
    }

private:
    template <class Ctx, class V>
    V forward_impl(Ctx& ctx, const std::vector<double>& t, const Tensor& x, V cond) const {
        if (x.rank() != 2 || x.shape[1] != cfg_.state_dim) {
            throw ShapeError("velocity_forward", "state " + x.shape_str() + " does not match dim " +
                                                     std::to_string(cfg_.state_dim));
        }
        V xin = ctx.input(x);
        V h = ctx.concat_cols({xin, cond, ctx.input(time_embedding(t, cfg_.time_dim))});
        for (std::size_t l = 0; l < cfg_.depth; ++l) {
            const std::string id = std::to_string(l);
            h = ctx.silu(ctx.add_rowwise(ctx.matmul(h, ctx.param("w" + id)), ctx.param("b" + id)));
        }
        V out = ctx.add_rowwise(ctx.matmul(h, ctx.param("w_out")), ctx.param("b_out"));
        return ctx.add(out, ctx.matmul(xin, ctx.param("w_skip")));
    }

    void init(Rng& rng) {
        std::size_t in = cfg_.state_dim + cfg_.cond_dim + cfg_.time_dim;
        for (std::size_t l = 0; l < cfg_.depth; ++l) {
            Tensor w({in, cfg_.width});
            const double s = std::sqrt(2.0 / static_cast<double>(in));
            for (double& v : w.values) v = s * rng.normal();
            params_.create("w" + std::to_string(l), std::move(w));
            params_.create("b" + std::to_string(l), Tensor::zeros({cfg_.width}));
            in = cfg_.width;
        }
        // output layer and x projection both start at zero
        params_.create("w_out", Tensor::zeros({cfg_.width, cfg_.state_dim}));
        params_.create("b_out", Tensor::zeros({cfg_.state_dim}));
        params_.create("w_skip", Tensor::zeros({cfg_.state_dim, cfg_.state_dim}));
    }

    VelocityNetConfig cfg_;
    ParamStore params_;
};

}  // namespace flowplan
