#pragma once

#include <string>
#include <vector>

#include "cpmoe/citpe.hpp"
#include "cpmoe/dataset.hpp"
#include "cpmoe/magl.hpp"

namespace cpmoe::model {

enum class Variant { Full, WoLE, WoPL, WoIB, WoC, WA, WoR };

// Throws on unknown names. WoR only changes the training targets, so the
// forward pass treats it exactly like Full.
Variant parse_variant(const std::string& name);

struct ModelConfig {
    int d = 32;                        // hidden width
    int layers = 2;                    // mixture layers
    int n_up = 4, n_down = 4, n_glob = 2;
    int k = 6;                         // experts kept per link
    int tcn_layers = 2;
    int khop = 5;                      // gate pooling radius
    int d_l = 10;                      // embedding width
    int t_p = 12, t_f = 12;
    int heads = 2;
    int wavelet_levels = 2;
    int n_slices = 7;                  // history slices the periodic expert consumes
    int t_d = 288;                     // time-of-day vocabulary
    double dropout = 0.15;
    std::string variant = "full";
    // Diagnostics hooks: a value in [0,1] pins the corresponding cascade
    // confidence to that constant; negative keeps it learned.
    double force_c1 = -1.0, force_c2 = -1.0;

    int n_experts() const { return n_up + n_down + n_glob; }
};

// Precomputed index structures plus the standardized static attributes.
// Backward closures hold references into this, so an instance must outlive
// every Graph built against it.
struct GraphIndex {
    data::EdgeSetIdx up, down, undir;
    nn::Csr khop;
    Tensor statics;  // [N, D_s]
    int n = 0, d_s = 0;
};

GraphIndex build_graph_index(const data::TrafficNetwork& net, const Tensor& statics, int khop);

// Registers every parameter the configured variant reads, nothing more, so
// checkpoints are interchangeable exactly within a variant.
void init_params(nn::ParameterStore& ps, const ModelConfig& cfg, const GraphIndex& gi,
                 uint64_t seed);

struct ModelOutput {
    nn::Var logits;  // [B*N*T_f, 3], row (b*N + i)*T_f + s
    // Per-expert components in the same layout; invalid when the variant
    // skips them.
    nn::Var logits_m, logits_tr, logits_per;
    // [B*N*T_f, 1] cascade weights; invalid for variants without a cascade.
    nn::Var w_per, w_tr, w_m;
    std::vector<GateDiag> gates;  // one per mixture layer
};

ModelOutput model_forward(nn::Graph& g, nn::ParamBinding& p, const ModelConfig& cfg,
                          const GraphIndex& gi, const data::Batch& batch, const NnCtx& nc);

}  // namespace cpmoe::model
