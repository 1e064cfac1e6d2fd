#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "flowplan/tensor.hpp"

// Per-coordinate affine normalization of a latent space. Generative flows here
// transport N(0,I) noise, so their data endpoints are z-scored with statistics
// fitted once on the training set and carried in the owning checkpoint.

namespace flowplan {

class LatentScaler {
public:
    LatentScaler() = default;

    static LatentScaler identity(std::size_t dim) {
        LatentScaler s;
        s.mean_ = Tensor::zeros({dim});
        s.std_ = Tensor::full({dim}, 1.0);
        return s;
    }

    // samples: [N x dim] rows. std floor keeps near-constant coordinates from
    // exploding under normalization.
    static LatentScaler fit(const Tensor& samples, double std_floor = 1e-3) {
        if (samples.rank() != 2 || samples.shape[0] < 2) {
            throw ShapeError("latent_scaler", "need [N>=2 x dim] samples, got " + samples.shape_str());
        }
        const std::size_t n = samples.shape[0], dim = samples.shape[1];
        LatentScaler s;
        s.mean_ = Tensor::zeros({dim});
        s.std_ = Tensor::zeros({dim});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) s.mean_.values[j] += samples.at(i, j);
        }
        for (double& m : s.mean_.values) m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = samples.at(i, j) - s.mean_.values[j];
                s.std_.values[j] += d * d;
            }
        }
        for (double& v : s.std_.values) v = std::max(std::sqrt(v / static_cast<double>(n)), std_floor);
        return s;
    }

    std::size_t dim() const { return mean_.numel(); }
    const Tensor& mean() const { return mean_; }
    const Tensor& stddev() const { return std_; }

    // (x - mean) / std, rowwise over [R x dim].
    Tensor apply_rows(const Tensor& rows) const {
        check(rows);
        Tensor out(rows.shape);
        const std::size_t d = dim();
        for (std::size_t i = 0; i < rows.shape[0]; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                out.values[i * d + j] = (rows.values[i * d + j] - mean_.values[j]) / std_.values[j];
            }
        }
        return out;
    }

    Tensor unapply_rows(const Tensor& rows) const {
        check(rows);
        Tensor out(rows.shape);
        const std::size_t d = dim();
        for (std::size_t i = 0; i < rows.shape[0]; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                out.values[i * d + j] = rows.values[i * d + j] * std_.values[j] + mean_.values[j];
            }
        }
        return out;
    }

    Tensor apply(const Tensor& flat) const { return reshape(apply_rows(reshape(flat, {1, flat.numel()})), flat.shape); }
    Tensor unapply(const Tensor& flat) const {
        return reshape(unapply_rows(reshape(flat, {1, flat.numel()})), flat.shape);
    }

    // Maps a displacement from normalized space back to raw space (no mean
    // shift, so a zero displacement stays exactly zero).
    Tensor unapply_displacement(const Tensor& flat) const {
        Tensor out(flat.shape);
        const std::size_t d = dim();
        if (flat.numel() % d != 0) throw ShapeError("latent_scaler", "displacement " + flat.shape_str());
        for (std::size_t i = 0; i < flat.numel(); ++i) out.values[i] = flat.values[i] * std_.values[i % d];
        return out;
    }

    nlohmann::json to_json() const { return {{"mean", mean_.values}, {"std", std_.values}}; }
    static LatentScaler from_json(const nlohmann::json& j) {
        LatentScaler s;
        auto mean = j.at("mean").get<std::vector<double>>();
        auto stdv = j.at("std").get<std::vector<double>>();
        s.mean_ = Tensor({mean.size()}, std::move(mean));
        s.std_ = Tensor({stdv.size()}, std::move(stdv));
        return s;
    }

private:
    void check(const Tensor& rows) const {
        if (rows.rank() != 2 || rows.shape[1] != dim()) {
            throw ShapeError("latent_scaler", "rows " + rows.shape_str() + " vs dim " + std::to_string(dim()));
        }
    }

    Tensor mean_;
    Tensor std_;
};

}  // namespace flowplan
