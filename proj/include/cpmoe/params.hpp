#pragma once

#include <map>
#include <string>

#include "cpmoe/graph.hpp"
#include "cpmoe/tensor.hpp"

namespace cpmoe::nn {

// Named parameter tensors. std::map keeps iteration in lexicographic name
// order, which fixes the order of initialization draws, checkpoint layout and
// optimizer updates.
struct ParameterStore {
    std::map<std::string, Tensor> tensors;

    bool has(const std::string& name) const { return tensors.count(name) > 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    // Weight matrices / vectors: U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    Tensor& create_weight(const std::string& name, std::vector<int> shape, int fan_in, uint64_t seed);
    // Embedding tables: N(0, 0.1^2).
    Tensor& create_embedding(const std::string& name, std::vector<int> shape, uint64_t seed);
    Tensor& create_zeros(const std::string& name, std::vector<int> shape);

    int64_t total_elements() const;
};

// Per-forward binding of parameters into a graph; each parameter becomes a
// needs_grad leaf on first use. After backward, grads() collects d(loss)/d(p).
class ParamBinding {
  public:
    ParamBinding(Graph& g, ParameterStore& store) : g_(&g), store_(&store) {}
    Var operator()(const std::string& name);
    std::map<std::string, Tensor> grads() const;

  private:
    Graph* g_;
    ParameterStore* store_;
    std::map<std::string, Var> vars_;
};

// Checkpoint format: one UTF-8 JSON header line (format version, tensor
// names, shapes, dtype, byte offsets, optional metadata), then raw
// little-endian row-major float64 payloads in header order. Round-trips
// bit-exactly.
void save_checkpoint(const ParameterStore& store, const std::string& path, const std::string& meta_json);
// Returns the metadata string; throws std::runtime_error on malformed files.
std::string load_checkpoint(ParameterStore& store, const std::string& path);

}  // namespace cpmoe::nn
