#pragma once

#include <string>
#include <vector>

#include "cpmoe/ops.hpp"
#include "cpmoe/params.hpp"

namespace cpmoe::nn {

// Fully connected stack: dims = {in, hidden..., out}. Parameters are named
// "<prefix>.<layer>.w" / ".b". Hidden layers use `hidden` activation followed
// by inverted dropout (training only); the final layer uses `out_act`.
void register_mlp(ParameterStore& params, const std::string& prefix, const std::vector<int>& dims,
                  uint64_t seed);

Var apply_mlp(Graph& g, ParamBinding& p, const std::string& prefix, Var x, int n_layers, Act hidden,
              Act out_act, double dropout_rate, bool training, uint64_t noise_key, uint64_t salt);

}  // namespace cpmoe::nn
