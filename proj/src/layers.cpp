#include "cpmoe/layers.hpp"

#include "cpmoe/rng.hpp"

namespace cpmoe::nn {

void register_mlp(ParameterStore& params, const std::string& prefix, const std::vector<int>& dims,
                  uint64_t seed) {
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        std::string base = prefix + "." + std::to_string(l);
        params.create_weight(base + ".w", {dims[l], dims[l + 1]}, dims[l], seed);
        params.create_weight(base + ".b", {dims[l + 1]}, dims[l], seed);
    }
}

Var apply_mlp(Graph& g, ParamBinding& p, const std::string& prefix, Var x, int n_layers, Act hidden,
              Act out_act, double dropout_rate, bool training, uint64_t noise_key, uint64_t salt) {
    Var h = x;
    for (int l = 0; l < n_layers; ++l) {
        std::string base = prefix + "." + std::to_string(l);
        h = affine(g, h, p(base + ".w"), p(base + ".b"));
        if (l + 1 < n_layers) {
            h = activation(g, h, hidden);
            h = dropout(g, h, dropout_rate, training, noise_key, hash_combine(salt, static_cast<uint64_t>(l)));
        } else {
            h = activation(g, h, out_act);
        }
    }
    return h;
}

}  // namespace cpmoe::nn
