#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "flowplan/optim.hpp"
#include "flowplan/tensor.hpp"

// Shared test helpers. The finite-difference oracle here is the independent
// reference every analytic gradient in the library is checked against; it only
// ever calls plain (non-tape) forward evaluations.

namespace flowplan::testutil {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
};

// Central finite differences (default h=1e-5) over every element of every
// parameter in the store. `loss_fn` must be a pure function of the store's
// current values. Analytic gradients must already be accumulated in the store.
template <class F>
GradCheckResult finite_difference_check(ParamStore& store, F loss_fn, double h = 1e-5) {
    GradCheckResult res;
    for (auto& e : store.mutable_entries()) {
        for (std::size_t i = 0; i < e.value.numel(); ++i) {
            const double orig = e.value.values[i];
            e.value.values[i] = orig + h;
            const double up = loss_fn();
            e.value.values[i] = orig - h;
            const double down = loss_fn();
            e.value.values[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double an = e.grad.values[i];
            const double abs_err = std::abs(fd - an);
            if (abs_err <= 1e-7) continue;  // both effectively zero
            const double rel = abs_err / std::max(std::abs(fd), std::abs(an));
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = e.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace flowplan::testutil
