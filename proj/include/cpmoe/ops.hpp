#pragma once

#include <cstdint>
#include <vector>

#include "cpmoe/graph.hpp"

namespace cpmoe::nn {

// Compressed row segments: items[offsets[g] .. offsets[g+1]) belong to group g.
struct Csr {
    std::vector<int32_t> offsets;
    std::vector<int32_t> items;
    int groups() const { return static_cast<int>(offsets.size()) - 1; }
};

enum class Act { None, ReLU, LeakyReLU, Sigmoid, Tanh, Softplus };

// ---- elementwise / linear ----
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var div_ew(Graph& g, Var a, Var b);
Var axpb(Graph& g, Var a, double k, double c);  // k*a + c
Var activation(Graph& g, Var x, Act act, double leaky_slope = 0.01);
Var relu(Graph& g, Var x);
Var leaky_relu(Graph& g, Var x, double slope = 0.01);
Var sigmoid(Graph& g, Var x);
Var tanh_op(Graph& g, Var x);
Var softplus(Graph& g, Var x);
Var log_op(Graph& g, Var x);   // elementwise ln, inputs must be positive
Var sqrt_op(Graph& g, Var x);  // d/dx at 0 taken as 0

// ---- matrix ----
Var matmul(Graph& g, Var a, Var b);     // [M,K]x[K,N]
Var matmul_nt(Graph& g, Var a, Var b);  // [M,K]x[N,K]^T
Var affine(Graph& g, Var x, Var w, Var b);

// ---- shape / indexing ----
Var reshape(Graph& g, Var x, std::vector<int> shape);
Var concat_cols(Graph& g, const std::vector<Var>& xs);
Var gather_rows(Graph& g, Var x, std::vector<int64_t> idx);
// [B,T,N,D] rows regrouped per (b,n): output [B*N, T*D]
Var permute_tn(Graph& g, Var x, int B, int T, int N);

// ---- reductions / broadcasts ----
Var sum_all(Graph& g, Var x);
Var mean_all(Graph& g, Var x);
Var sum_cols(Graph& g, Var x);           // [R,K] -> [1,K]
Var sum_lastdim(Graph& g, Var x);        // [R,K] -> [R,1]
Var mean_lastdim(Graph& g, Var x);       // [R,K] -> [R,1]
Var sub_bcast(Graph& g, Var x, Var m);   // [R,K] - [R,1]
Var mul_bcast(Graph& g, Var x, Var s);   // [R,K] * [R,1]
Var const_times_scalar(Graph& g, Tensor c, Var s);  // c * s, s scalar

// ---- softmax family ----
Var softmax_rows(Graph& g, Var x);
Var log_softmax_rows(Graph& g, Var x);

// ---- regularization ----
// Inverted dropout with a counter-based mask: deterministic in (key, salt).
// Identity when !training or rate == 0.
Var dropout(Graph& g, Var x, double rate, bool training, uint64_t key, uint64_t salt);

// ---- graph / attention structure ----
// The csr / index-vector arguments below are captured by reference in the
// backward closures and must outlive the graph.
// x [B*N, D], nbr a symmetric neighbor csr over N nodes: out[b,i] = sum_{j in nbr(i)} x[b,j]
Var khop_sum(Graph& g, Var x, const Csr& nbr, int B);
// Gather per-group node rows to edge rows: x [G*N, C], out[g*E+e] = x[g*N + nodes[e]]
Var edge_gather(Graph& g, Var x, const std::vector<int32_t>& nodes, int G, int N);
// scores [G*E, 1]; softmax over each destination's incoming edge segment.
// Empty segments produce no outputs (scores stay per-edge).
Var edge_softmax(Graph& g, Var scores, const Csr& by_dst, int G);
// out[g*N+i] = sum_{e in seg(i)} alpha[g*E+e] * msg[g*E+e]; alpha [G*E,1], msg [G*E,D]
Var edge_aggregate(Graph& g, Var alpha, Var msg, const Csr& by_dst, int G, int N);
// A [N,N] shared mixing matrix applied per group: out_g = A * x_g, x [G*N, D]
Var shared_mix(Graph& g, Var A, Var x, int G);

// Multi-head attention building blocks over rows grouped as (group, T):
// q,k [G0*T, D] -> scores [G0*H*T, T], scaled by 1/sqrt(D/H)
Var bmm_scores(Graph& g, Var q, Var k, int T, int heads);
// attn [G0*H*T, T], v [G0*T, D] -> [G0*T, D]
Var bmm_attend(Graph& g, Var attn, Var v, int T, int heads);

// ---- sparse gating ----
// Per row: softmax over the k largest entries (ties broken toward lower
// index), zero elsewhere. Gradients flow only through selected entries.
Var topk_softmax(Graph& g, Var logits, int k);
// Activation probabilities Phi((clean_j - threshold_j)/sigma_j) where
// threshold_j is the k-th largest competing noisy logit (noisy = clean +
// eps*sigma). k >= n_experts yields constant ones.
Var load_probs(Graph& g, Var clean, Var sigma, Tensor eps, int k);
// out[(b,t,n),:] = sum_e w[(b,n),e] * experts[e][(b,t,n),:]
Var mix_experts(Graph& g, Var weights, const std::vector<Var>& experts, int B, int T, int N);

}  // namespace cpmoe::nn
