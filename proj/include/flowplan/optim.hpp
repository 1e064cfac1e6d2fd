#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowplan/tensor.hpp"

// Named parameter storage with per-parameter gradient accumulators and AdamW
// moments, plus the warmup + step-decay learning-rate schedule.

namespace flowplan {

struct AdamwConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct LrSchedule {
    double base_lr = 1e-4;
    std::size_t warmup_steps = 1000;
    std::size_t decay_interval = 5000;
    double decay_factor = 0.5;

    double at(std::size_t step) const {
        if (step < warmup_steps) {
            return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
        }
        const std::size_t decays = (step - warmup_steps) / decay_interval;
        return base_lr * std::pow(decay_factor, static_cast<double>(decays));
    }
};

class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        Tensor m;
        Tensor v;
    };

    std::size_t create(const std::string& name, Tensor init) {
        if (index_.count(name)) throw std::invalid_argument("param store: duplicate parameter '" + name + "'");
        Entry e;
        e.name = name;
        e.grad = Tensor::zeros(init.shape);
        e.m = Tensor::zeros(init.shape);
        e.v = Tensor::zeros(init.shape);
        e.value = std::move(init);
        entries_.push_back(std::move(e));
        index_[name] = entries_.size() - 1;
        return entries_.size() - 1;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t slot(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("param store: unknown parameter '" + name + "'");
        return it->second;
    }

    const Tensor& value(const std::string& name) const { return entries_[slot(name)].value; }
    Tensor& mutable_value(const std::string& name) { return entries_[slot(name)].value; }
    const Tensor& grad(const std::string& name) const { return entries_[slot(name)].grad; }

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& mutable_entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const Entry& e : entries_) n += e.value.numel();
        return n;
    }

    void accumulate_grad(std::size_t slot, const Tensor& g) {
        Entry& e = entries_[slot];
        require_same_shape("grad", e.value, g);
        for (std::size_t i = 0; i < g.numel(); ++i) e.grad.values[i] += g.values[i];
        grads_ready_ = true;
    }

    void zero_grads() {
        for (Entry& e : entries_) std::fill(e.grad.values.begin(), e.grad.values.end(), 0.0);
        grads_ready_ = false;
    }

    bool grads_ready() const { return grads_ready_; }
    void mark_grads_ready() { grads_ready_ = true; }

    double grad_l2_norm() const {
        double s = 0.0;
        for (const Entry& e : entries_) {
            for (double g : e.grad.values) s += g * g;
        }
        return std::sqrt(s);
    }

    void scale_grads(double s) {
        for (Entry& e : entries_) {
            for (double& g : e.grad.values) g *= s;
        }
    }

    std::size_t step_count() const { return step_; }

    // Decoupled weight decay; gradients are cleared after the update.
    void adamw_step(double lr, const AdamwConfig& cfg = {}) {
        if (!grads_ready_) throw std::runtime_error("adamw: step with no accumulated gradients");
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
        for (Entry& e : entries_) {
            for (std::size_t i = 0; i < e.value.numel(); ++i) {
                const double g = e.grad.values[i];
                e.m.values[i] = cfg.beta1 * e.m.values[i] + (1.0 - cfg.beta1) * g;
                e.v.values[i] = cfg.beta2 * e.v.values[i] + (1.0 - cfg.beta2) * g * g;
                const double m_hat = e.m.values[i] / bc1;
                const double v_hat = e.v.values[i] / bc2;
                e.value.values[i] -=
                    lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * e.value.values[i]);
            }
        }
        zero_grads();
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
    std::size_t step_ = 0;
    bool grads_ready_ = false;
};

}  // namespace flowplan
