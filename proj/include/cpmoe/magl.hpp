#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpmoe/layers.hpp"
#include "cpmoe/network.hpp"
#include "cpmoe/ops.hpp"
#include "cpmoe/params.hpp"

namespace cpmoe::model {

using nn::Var;

// Rows of a sequence tensor are ordered (sample, time, node); ops below keep
// that layout so [B*T*N, D] matrices flow through unchanged.
struct SeqShape {
    int b = 0, t = 0, n = 0;
    int64_t rows() const { return static_cast<int64_t>(b) * t * n; }
};

// Forward-pass-wide switches. `key` seeds every stochastic draw (dropout
// masks, gate noise) through counter hashing, so a frozen key makes the loss
// a pure function of the parameters.
struct NnCtx {
    bool training = false;
    double dropout = 0.0;
    uint64_t key = 0;
};

// Stable per-call-site salt for dropout masks, derived from the parameter
// prefix so adding ops elsewhere does not reshuffle masks.
uint64_t salt_of(const std::string& name);

// Parameter registration, one helper per op family; names match what the
// forward functions bind.
void register_tcn_params(nn::ParameterStore& ps, const std::string& prefix, int d, int layers,
                         uint64_t seed);
void register_attention_expert_params(nn::ParameterStore& ps, const std::string& prefix, int d,
                                      uint64_t seed);
void register_global_expert_params(nn::ParameterStore& ps, const std::string& prefix, int d,
                                   int n, int d_l, uint64_t seed);
void register_gate_params(nn::ParameterStore& ps, const std::string& prefix, int ctx_dim,
                          int hidden, int n_e, uint64_t seed);

// Dilated causal convolution stack with tanh/sigmoid output gating; dilation
// 2^l at depth l, filter size 2, zero left-padding keeps the length at s.t.
// Parameters: <prefix>.<l>.{filter,gate}.{w0,w1,b}.
Var gated_tcn(nn::Graph& g, nn::ParamBinding& p, const std::string& prefix, Var h,
              const SeqShape& s, int tcn_layers);

// Neighborhood sum of the final time step's rows: [B*N, D]. `khop` must
// outlive the graph.
Var khop_pool_last(nn::Graph& g, Var hp, const SeqShape& s, const nn::Csr& khop);

// Per-(sample, link) gate context [B*N, ctx_dim]: pooled temporal summary
// (when given), encoded static attributes, and the shared link/time-of-day/
// day-of-week embeddings (when enabled). Binds the shared tables embed.s,
// embed.tod, embed.dow and the encoder gate.statics.
Var gate_context(nn::Graph& g, nn::ParamBinding& p, Var pooled, const Tensor& statics,
                 const std::vector<int>& tod, const std::vector<int>& dow, const SeqShape& s,
                 bool use_embeddings, const NnCtx& nc);

// Per-(sample, link) noise draws for the gate, keyed by prediction origin so
// batch order does not matter: eps[(k*n + i)*n_e + e].
Tensor gate_noise(uint64_t key, int layer, const std::vector<int>& origins, int n, int n_e);

struct GateDiag {
    Var weights;  // [B*N, N_e], exactly min(k, N_e) nonzeros per row
    Var clean;    // [B*N, N_e] pre-noise logits
    Var sigma;    // [B*N, N_e] softplus noise scales; invalid at inference
    Tensor eps;   // the constant draws used; empty at inference
};

// Noisy top-k gate over the expert pool: softmax over the k largest noisy
// logits, zeros elsewhere; noise-free when !nc.training.
GateDiag noisy_topk_gate(nn::Graph& g, nn::ParamBinding& p, const std::string& prefix, Var ctx,
                         int k, const Tensor& eps, const NnCtx& nc);

// Edge-aware attention over one aggregation direction, per time step with
// time-shared parameters: out_i = sum_j alpha_ij (W_v h_j) + h_i where the
// attention score is LeakyReLU(a_dst.(W h_i) + a_src.(W h_j) + edge_w * r_ij).
// Links with no neighbors pass through unchanged. `es` must outlive the graph.
Var graph_attention_expert(nn::Graph& g, nn::ParamBinding& p, const std::string& prefix, Var h,
                           const SeqShape& s, const data::EdgeSetIdx& es);

// Row-stochastic latent adjacency softmax(ReLU(emb emb^T)); emb [N, D_l].
Var adaptive_adjacency(nn::Graph& g, Var emb);

// Spatial mixing over every link with a private learned adjacency:
// out = A (h W_v) + h per time step. Parameters: <prefix>.{emb,w_v}.
Var global_expert(nn::Graph& g, nn::ParamBinding& p, const std::string& prefix, Var h,
                  const SeqShape& s);

// The expert pool of one layer, ordered [up..., down..., global...]; the
// directional experts read the given edge sets (the undirected set is
// substituted for the direction-blind variant).
struct ExpertSet {
    const data::EdgeSetIdx* up = nullptr;
    const data::EdgeSetIdx* down = nullptr;
    int n_up = 0, n_down = 0, n_glob = 0;
    int n_total() const { return n_up + n_down + n_glob; }
};

struct LayerOut {
    Var h;
    GateDiag diag;
};

// One mixture layer: every expert evaluates the layer input, the gate mixes
// the top-k of them per link, broadcast across time steps. `eps` holds this
// layer's gate noise draws (ignored at inference).
LayerOut magl_layer(nn::Graph& g, nn::ParamBinding& p, const std::string& prefix, Var h,
                    const SeqShape& s, Var ctx, int k, const ExpertSet& experts,
                    const Tensor& eps, const NnCtx& nc);

// Prediction head: per link, flatten the time axis and map T*D features to
// horizon * 3 class logits. Output [B*N, t_f*3].
Var magl_predict(nn::Graph& g, nn::ParamBinding& p, const std::string& prefix, Var h,
                 const SeqShape& s, int t_f, const NnCtx& nc);

}  // namespace cpmoe::model
