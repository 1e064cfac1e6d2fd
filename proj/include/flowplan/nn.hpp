#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flowplan/autodiff.hpp"
#include "flowplan/optim.hpp"
#include "flowplan/rng.hpp"
#include "flowplan/tensor.hpp"

// Shared dense-network building blocks. Forward passes are written once as a
// template over an evaluation context: EvalCtx computes plain tensors, TapeCtx
// records the same graph for autodiff. Finite-difference tests exercise both
// paths against each other.

namespace flowplan {

struct EvalCtx {
    const ParamStore& store;

    const Tensor& param(const std::string& name) const { return store.value(name); }
    Tensor input(Tensor t) const { return t; }
    Tensor matmul(const Tensor& a, const Tensor& b) const { return flowplan::matmul(a, b); }
    Tensor add(const Tensor& a, const Tensor& b) const { return flowplan::add(a, b); }
    Tensor add_rowwise(const Tensor& x, const Tensor& bias) const { return flowplan::add_rowwise(x, bias); }
    Tensor silu(const Tensor& a) const { return flowplan::silu(a); }
    Tensor concat_cols(const std::vector<Tensor>& parts) const { return flowplan::concat_cols(parts); }
    Tensor reshape(const Tensor& a, std::vector<std::size_t> s) const { return flowplan::reshape(a, std::move(s)); }
};

struct TapeCtx {
    Tape& tape;
    ParamStore& store;

    Var param(const std::string& name) { return tape.param(store, name); }
    Var input(Tensor t) { return tape.constant(std::move(t)); }
    Var matmul(Var a, Var b) { return tape.matmul(a, b); }
    Var add(Var a, Var b) { return tape.add(a, b); }
    Var add_rowwise(Var x, Var bias) { return tape.add_rowwise(x, bias); }
    Var silu(Var a) { return tape.silu(a); }
    Var concat_cols(const std::vector<Var>& parts) { return tape.concat_cols(parts); }
    Var reshape(Var a, std::vector<std::size_t> s) { return tape.reshape(a, std::move(s)); }
};

// Plain MLP: dense layers with SiLU between them, linear last layer.
struct MlpSpec {
    std::string prefix;
    std::vector<std::size_t> dims;  // e.g. {in, hidden, out}
};

inline void mlp_init(ParamStore& store, const MlpSpec& spec, Rng& rng) {
    for (std::size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        const std::size_t in = spec.dims[l], out = spec.dims[l + 1];
        Tensor w({in, out});
        const double s = std::sqrt(2.0 / static_cast<double>(in));
        for (double& v : w.values) v = s * rng.normal();
        store.create(spec.prefix + "w" + std::to_string(l), std::move(w));
        store.create(spec.prefix + "b" + std::to_string(l), Tensor::zeros({out}));
    }
}

template <class Ctx, class V>
V mlp_forward(Ctx& ctx, const MlpSpec& spec, V x) {
    for (std::size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        x = ctx.add_rowwise(ctx.matmul(x, ctx.param(spec.prefix + "w" + std::to_string(l))),
                            ctx.param(spec.prefix + "b" + std::to_string(l)));
        if (l + 2 < spec.dims.size()) x = ctx.silu(x);
    }
    return x;
}

}  // namespace flowplan
