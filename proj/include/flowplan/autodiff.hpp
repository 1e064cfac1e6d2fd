#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowplan/optim.hpp"
#include "flowplan/tensor.hpp"

// Reverse-mode autodiff on an append-only tape. Nodes are created in
// topological order, so backward() is a single reverse sweep from the loss.
// Parameter leaves deposit their gradients into the bound ParamStore.

namespace flowplan {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t node = 0;

    const Tensor& value() const;
};

class Tape {
public:
    Var constant(Tensor v) { return make_node(std::move(v), {}, nullptr); }

    // Leaf bound to a named parameter; backward() accumulates into the store.
    Var param(ParamStore& store, const std::string& name) {
        const std::size_t slot = store.slot(name);
        Var v = make_node(store.value(name), {}, nullptr);
        nodes_[v.node].store = &store;
        nodes_[v.node].param_slot = static_cast<int>(slot);
        return v;
    }

    const Tensor& value(Var v) const { return nodes_[v.node].value; }
    const Tensor& grad(Var v) const { return nodes_[v.node].grad; }

    Var add(Var a, Var b) {
        Tensor out = flowplan::add(value(a), value(b));
        return make_node(std::move(out), {a.node, b.node}, [](Tape& t, const Node& n) {
            t.add_grad(n.parents[0], n.grad);
            t.add_grad(n.parents[1], n.grad);
        });
    }

    Var sub(Var a, Var b) {
        Tensor out = flowplan::sub(value(a), value(b));
        return make_node(std::move(out), {a.node, b.node}, [](Tape& t, const Node& n) {
            t.add_grad(n.parents[0], n.grad);
            t.add_grad_scaled(n.parents[1], n.grad, -1.0);
        });
    }

    Var mul(Var a, Var b) {
        Tensor out = flowplan::mul(value(a), value(b));
        return make_node(std::move(out), {a.node, b.node}, [](Tape& t, const Node& n) {
            t.add_grad_elemwise(n.parents[0], n.grad, t.nodes_[n.parents[1]].value);
            t.add_grad_elemwise(n.parents[1], n.grad, t.nodes_[n.parents[0]].value);
        });
    }

    Var scale(Var a, double s) {
        Tensor out = flowplan::scale(value(a), s);
        return make_node(std::move(out), {a.node}, [s](Tape& t, const Node& n) {
            t.add_grad_scaled(n.parents[0], n.grad, s);
        });
    }

    Var silu(Var a) {
        Tensor out = flowplan::silu(value(a));
        return make_node(std::move(out), {a.node}, [](Tape& t, const Node& n) {
            const Tensor& x = t.nodes_[n.parents[0]].value;
            Tensor& gx = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < x.numel(); ++i) {
                const double s = sigmoid(x.values[i]);
                gx.values[i] += n.grad.values[i] * s * (1.0 + x.values[i] * (1.0 - s));
            }
        });
    }

    Var matmul(Var a, Var b) {
        Tensor out = flowplan::matmul(value(a), value(b));
        return make_node(std::move(out), {a.node, b.node}, [](Tape& t, const Node& n) {
            const Tensor& av = t.nodes_[n.parents[0]].value;
            const Tensor& bv = t.nodes_[n.parents[1]].value;
            t.add_grad(n.parents[0], flowplan::matmul(n.grad, transpose(bv)));
            t.add_grad(n.parents[1], flowplan::matmul(transpose(av), n.grad));
        });
    }

    Var add_rowwise(Var x, Var bias) {
        Tensor out = flowplan::add_rowwise(value(x), value(bias));
        return make_node(std::move(out), {x.node, bias.node}, [](Tape& t, const Node& n) {
            t.add_grad(n.parents[0], n.grad);
            Tensor& gb = t.nodes_[n.parents[1]].grad;
            const std::size_t m = n.grad.shape[0], c = n.grad.shape[1];
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < c; ++j) gb.values[j] += n.grad.values[i * c + j];
            }
        });
    }

    Var reduce_mean(Var a) {
        Tensor out = flowplan::reduce_mean(value(a));
        return make_node(std::move(out), {a.node}, [](Tape& t, const Node& n) {
            Tensor& ga = t.nodes_[n.parents[0]].grad;
            const double g = n.grad.values[0] / static_cast<double>(ga.numel());
            for (double& v : ga.values) v += g;
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        std::vector<Tensor> vals;
        std::vector<std::size_t> parents;
        vals.reserve(parts.size());
        for (Var p : parts) {
            vals.push_back(value(p));
            parents.push_back(p.node);
        }
        Tensor out = flowplan::concat_cols(vals);
        return make_node(std::move(out), std::move(parents), [](Tape& t, const Node& n) {
            const std::size_t m = n.grad.shape[0], total = n.grad.shape[1];
            std::size_t off = 0;
            for (std::size_t p : n.parents) {
                Tensor& gp = t.nodes_[p].grad;
                const std::size_t c = gp.shape[1];
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < c; ++j) gp.values[i * c + j] += n.grad.values[i * total + off + j];
                }
                off += c;
            }
        });
    }

    Var slice_cols(Var x, std::size_t start, std::size_t len) {
        Tensor out = flowplan::slice_cols(value(x), start, len);
        return make_node(std::move(out), {x.node}, [start, len](Tape& t, const Node& n) {
            Tensor& gx = t.nodes_[n.parents[0]].grad;
            const std::size_t m = gx.shape[0], c = gx.shape[1];
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < len; ++j) gx.values[i * c + start + j] += n.grad.values[i * len + j];
            }
        });
    }

    Var reshape(Var x, std::vector<std::size_t> s) {
        Tensor out = flowplan::reshape(value(x), std::move(s));
        return make_node(std::move(out), {x.node}, [](Tape& t, const Node& n) {
            Tensor& gx = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < gx.numel(); ++i) gx.values[i] += n.grad.values[i];
        });
    }

    // Reverse sweep from a scalar loss. Parameter gradients land in their
    // bound ParamStore; every other gradient stays on the tape.
    void backward(Var loss) {
        if (backward_done_) throw std::runtime_error("backward: tape already swept; reset() first");
        if (!value(loss).is_scalar()) {
            throw ShapeError("backward", "loss must be scalar, got " + value(loss).shape_str());
        }
        backward_done_ = true;
        nodes_[loss.node].grad.values[0] = 1.0;
        for (std::size_t i = loss.node + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backprop) n.backprop(*this, n);
            if (n.store != nullptr) n.store->accumulate_grad(static_cast<std::size_t>(n.param_slot), n.grad);
        }
    }

    void reset() {
        nodes_.clear();
        backward_done_ = false;
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> parents;
        std::function<void(Tape&, const Node&)> backprop;
        ParamStore* store = nullptr;
        int param_slot = -1;
    };

    Var make_node(Tensor value, std::vector<std::size_t> parents, std::function<void(Tape&, const Node&)> bp) {
        Node n;
        n.grad = Tensor::zeros(value.shape);
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backprop = std::move(bp);
        nodes_.push_back(std::move(n));
        return Var{this, nodes_.size() - 1};
    }

    void add_grad(std::size_t node, const Tensor& g) {
        Tensor& dst = nodes_[node].grad;
        for (std::size_t i = 0; i < dst.numel(); ++i) dst.values[i] += g.values[i];
    }

    void add_grad_scaled(std::size_t node, const Tensor& g, double s) {
        Tensor& dst = nodes_[node].grad;
        for (std::size_t i = 0; i < dst.numel(); ++i) dst.values[i] += s * g.values[i];
    }

    void add_grad_elemwise(std::size_t node, const Tensor& g, const Tensor& factor) {
        Tensor& dst = nodes_[node].grad;
        for (std::size_t i = 0; i < dst.numel(); ++i) dst.values[i] += g.values[i] * factor.values[i];
    }

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    friend struct Var;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

}  // namespace flowplan
