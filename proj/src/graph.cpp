#include "cpmoe/graph.hpp"

#include <stdexcept>

namespace cpmoe::nn {

Var Graph::leaf(Tensor val, bool needs_grad) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Graph::make(Tensor val, const std::vector<Var>& inputs, std::function<void(Graph&)> bw) {
    Node n;
    n.val = std::move(val);
    for (Var in : inputs)
        if (in.valid() && nodes_[in.id].needs_grad) n.needs_grad = true;
    if (n.needs_grad) n.bw = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad(Var v) {
    Node& n = nodes_[v.id];
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.val.shape);
        n.has_grad = true;
    }
    return n.grad;
}

double* Graph::grad_buf(Var v) {
    if (!v.valid() || !nodes_[v.id].needs_grad) return nullptr;
    return grad(v).data.data();
}

void Graph::backward(Var root) {
    if (val(root).size() != 1) throw std::logic_error("backward root must be scalar");
    if (!needs_grad(root)) return;
    grad(root).data[0] = 1.0;
    for (int32_t i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.needs_grad && n.has_grad && n.bw) n.bw(*this);
    }
}

}  // namespace cpmoe::nn
