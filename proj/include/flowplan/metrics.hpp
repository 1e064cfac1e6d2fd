#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "flowplan/dataset.hpp"
#include "flowplan/sound_world.hpp"

// Evaluation metrics: event alignment against prompts, Frechet distance over
// pooled oracle features, per-clip event-distribution KL and the inception
// analog. All are pure functions of their inputs; the oracle decoder plays the
// fixed-judge role throughout.

namespace flowplan {

struct AlignmentScore {
    double set_f1 = 0.0;
    double order_accuracy = 0.0;
};

// set_f1: F1 between decoded and prompt class sets. order_accuracy:
// LCS(decoded, prompt) / |prompt|.
inline AlignmentScore alignment_score(const Tensor& spectrogram, const PromptSpec& prompt, const WorldConfig& cfg) {
    const std::vector<std::size_t> decoded = oracle_decode_events(spectrogram, cfg);
    const std::set<std::size_t> dec_set(decoded.begin(), decoded.end());
    const std::set<std::size_t> ref_set(prompt.tokens.begin(), prompt.tokens.end());
    std::size_t inter = 0;
    for (std::size_t c : dec_set) inter += ref_set.count(c);

    AlignmentScore s;
    if (!dec_set.empty() && !ref_set.empty() && inter > 0) {
        const double precision = static_cast<double>(inter) / static_cast<double>(dec_set.size());
        const double recall = static_cast<double>(inter) / static_cast<double>(ref_set.size());
        s.set_f1 = 2.0 * precision * recall / (precision + recall);
    }
    if (!prompt.tokens.empty()) {
        s.order_accuracy =
            static_cast<double>(lcs_length(decoded, prompt.tokens)) / static_cast<double>(prompt.tokens.size());
    }
    return s;
}

// ---------------------------------------------------------------------------
// feature statistics and Frechet distance

struct FeatureStats {
    Tensor mean;  // [D]
    Tensor cov;   // [D x D], regularized (+eps I), symmetric PSD
};

// Pooled oracle features of one clip: mean over semantic frames -> [kSemDims].
inline Tensor pooled_features(const Tensor& spectrogram, const WorldConfig& cfg) {
    const Tensor f = oracle_encode_semantics(spectrogram, cfg);
    Tensor out({WorldConfig::kSemDims});
    for (std::size_t n = 0; n < WorldConfig::kSemFrames; ++n) {
        for (std::size_t j = 0; j < WorldConfig::kSemDims; ++j) out.values[j] += f.at(n, j);
    }
    for (double& v : out.values) v /= static_cast<double>(WorldConfig::kSemFrames);
    return out;
}

inline FeatureStats feature_stats(const std::vector<Tensor>& clips, const WorldConfig& cfg, double eps = 1e-6) {
    if (clips.size() < 2) throw std::invalid_argument("feature_stats: need at least 2 clips");
    const std::size_t D = WorldConfig::kSemDims;
    std::vector<Tensor> feats;
    feats.reserve(clips.size());
    for (const Tensor& c : clips) feats.push_back(pooled_features(c, cfg));

    FeatureStats st;
    st.mean = Tensor::zeros({D});
    for (const Tensor& f : feats) {
        for (std::size_t j = 0; j < D; ++j) st.mean.values[j] += f.values[j];
    }
    for (double& v : st.mean.values) v /= static_cast<double>(feats.size());

    st.cov = Tensor::zeros({D, D});
    for (const Tensor& f : feats) {
        for (std::size_t i = 0; i < D; ++i) {
            const double di = f.values[i] - st.mean.values[i];
            for (std::size_t j = 0; j < D; ++j) st.cov.at(i, j) += di * (f.values[j] - st.mean.values[j]);
        }
    }
    for (double& v : st.cov.values) v /= static_cast<double>(feats.size());
    for (std::size_t i = 0; i < D; ++i) st.cov.at(i, i) += eps;
    return st;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix: A = V diag(w) V^T.
inline void symmetric_eigen(const Tensor& a, Tensor& eigenvalues, Tensor& eigenvectors) {
    if (a.rank() != 2 || a.shape[0] != a.shape[1]) {
        throw ShapeError("symmetric_eigen", "expected square matrix, got " + a.shape_str());
    }
    const std::size_t n = a.shape[0];
    Tensor m = a;
    eigenvectors = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) eigenvectors.at(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
        }
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m.at(k, p), mkq = m.at(k, q);
                    m.at(k, p) = c * mkp - s * mkq;
                    m.at(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m.at(p, k), mqk = m.at(q, k);
                    m.at(p, k) = c * mpk - s * mqk;
                    m.at(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = eigenvectors.at(k, p), vkq = eigenvectors.at(k, q);
                    eigenvectors.at(k, p) = c * vkp - s * vkq;
                    eigenvectors.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    eigenvalues = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) eigenvalues.values[i] = m.at(i, i);
}

// Symmetric PSD square root via eigendecomposition; negative eigenvalues from
// numerical noise are clamped to zero.
inline Tensor sqrtm_psd(const Tensor& a) {
    Tensor w, v;
    symmetric_eigen(a, w, v);
    const std::size_t n = w.numel();
    Tensor scaled({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        const double root = std::sqrt(std::max(0.0, w.values[i]));
        for (std::size_t k = 0; k < n; ++k) scaled.at(k, i) = v.at(k, i) * root;
    }
    return matmul(scaled, transpose(v));
}

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)
inline double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    require_same_shape("frechet_distance", a.mean, b.mean);
    require_same_shape("frechet_distance", a.cov, b.cov);
    double mean_term = 0.0;
    for (std::size_t i = 0; i < a.mean.numel(); ++i) {
        const double d = a.mean.values[i] - b.mean.values[i];
        mean_term += d * d;
    }
    const Tensor root_a = sqrtm_psd(a.cov);
    const Tensor inner = sqrtm_psd(matmul(matmul(root_a, b.cov), root_a));
    double trace = 0.0;
    for (std::size_t i = 0; i < a.cov.shape[0]; ++i) {
        trace += a.cov.at(i, i) + b.cov.at(i, i) - 2.0 * inner.at(i, i);
    }
    return mean_term + trace;
}

// ---------------------------------------------------------------------------
// event-distribution divergences

// Per-clip class distribution: softmax of the per-class total matched-filter
// energy across windows.
inline std::vector<double> clip_class_distribution(const Tensor& spectrogram, const WorldConfig& cfg) {
    const Tensor e = window_energies(spectrogram, cfg);
    std::vector<double> total(WorldConfig::kClasses, 0.0);
    for (std::size_t n = 0; n < WorldConfig::kSemFrames; ++n) {
        for (std::size_t k = 0; k < WorldConfig::kClasses; ++k) total[k] += e.at(n, k);
    }
    const double mx = *std::max_element(total.begin(), total.end());
    double z = 0.0;
    for (double& v : total) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : total) v /= z;
    return total;
}

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, double eps = 1e-8) {
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] + eps, qi = q[i] + eps;
        kl += pi * std::log(pi / qi);
    }
    return std::max(0.0, kl);
}

// Paired: mean KL(ref_i || gen_i) over index-aligned clips. Unpaired: KL
// between the dataset-level mean distributions.
inline double kl_event_divergence(const std::vector<Tensor>& reference, const std::vector<Tensor>& generated,
                                  const WorldConfig& cfg, bool paired = true) {
    if (reference.empty() || generated.empty()) {
        throw std::invalid_argument("kl_event_divergence: empty clip set");
    }
    if (paired) {
        if (reference.size() != generated.size()) {
            throw std::invalid_argument("kl_event_divergence: paired evaluation needs equal counts");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < reference.size(); ++i) {
            total += kl_divergence(clip_class_distribution(reference[i], cfg),
                                   clip_class_distribution(generated[i], cfg));
        }
        return total / static_cast<double>(reference.size());
    }
    auto mean_dist = [&](const std::vector<Tensor>& clips) {
        std::vector<double> m(WorldConfig::kClasses, 0.0);
        for (const Tensor& c : clips) {
            const std::vector<double> p = clip_class_distribution(c, cfg);
            for (std::size_t k = 0; k < m.size(); ++k) m[k] += p[k];
        }
        for (double& v : m) v /= static_cast<double>(clips.size());
        return m;
    };
    return kl_divergence(mean_dist(reference), mean_dist(generated));
}

// exp(mean_i KL(p(y|x_i) || mean_j p(y|x_j))); in [1, kClasses].
inline double is_analog(const std::vector<Tensor>& clips, const WorldConfig& cfg) {
    if (clips.empty()) throw std::invalid_argument("is_analog: empty clip set");
    std::vector<std::vector<double>> dists;
    dists.reserve(clips.size());
    std::vector<double> marginal(WorldConfig::kClasses, 0.0);
    for (const Tensor& c : clips) {
        dists.push_back(clip_class_distribution(c, cfg));
        for (std::size_t k = 0; k < marginal.size(); ++k) marginal[k] += dists.back()[k];
    }
    for (double& v : marginal) v /= static_cast<double>(clips.size());
    double mean_kl = 0.0;
    for (const auto& p : dists) mean_kl += kl_divergence(p, marginal, 0.0);
    return std::exp(mean_kl / static_cast<double>(clips.size()));
}

}  // namespace flowplan
