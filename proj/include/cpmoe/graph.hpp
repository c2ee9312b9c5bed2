#pragma once

#include <functional>
#include <vector>

#include "cpmoe/tensor.hpp"

namespace cpmoe::nn {

class Graph;

// Handle into a Graph's node arena.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Tape-based reverse-mode autodiff. Nodes are appended in evaluation order,
// so walking the arena backwards is a topological order of the compute DAG.
// Gradients are allocated lazily; leaves created with needs_grad=false (and
// everything derived only from them) are skipped entirely during backward.
class Graph {
  public:
    Var leaf(Tensor val, bool needs_grad);
    Var constant(Tensor val) { return leaf(std::move(val), false); }

    // Op implementations: value, inputs (for needs_grad propagation), and a
    // backward closure that pulls this node's grad and accumulates into the
    // inputs' grad buffers.
    Var make(Tensor val, const std::vector<Var>& inputs, std::function<void(Graph&)> bw);

    Tensor& val(Var v) { return nodes_[v.id].val; }
    const Tensor& val(Var v) const { return nodes_[v.id].val; }
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

    // Gradient of v, allocated as zeros on first access. Only valid for
    // needs_grad nodes.
    Tensor& grad(Var v);
    // nullptr when v does not participate in differentiation; backward
    // closures use this to skip dead branches.
    double* grad_buf(Var v);
    bool has_grad(Var v) const { return nodes_[v.id].has_grad; }

    // Seeds d(root)/d(root) = 1 (root must be scalar) and runs the tape in
    // reverse. May be called once per graph.
    void backward(Var root);

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        bool has_grad = false;
        std::function<void(Graph&)> bw;
    };
    std::vector<Node> nodes_;
};

}  // namespace cpmoe::nn
