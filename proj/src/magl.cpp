#include "cpmoe/magl.hpp"

#include <stdexcept>

#include "cpmoe/rng.hpp"

namespace cpmoe::model {

using namespace cpmoe::nn;

uint64_t salt_of(const std::string& name) {
    uint64_t h = 0x73616c74;
    for (char c : name) h = hash_combine(h, static_cast<uint64_t>(static_cast<uint8_t>(c)));
    return h;
}

void register_tcn_params(ParameterStore& ps, const std::string& prefix, int d, int layers,
                         uint64_t seed) {
    for (int l = 0; l < layers; ++l) {
        std::string base = prefix + "." + std::to_string(l);
        for (const char* part : {".filter", ".gate"}) {
            ps.create_weight(base + part + ".w0", {d, d}, 2 * d, seed);
            ps.create_weight(base + part + ".w1", {d, d}, 2 * d, seed);
            ps.create_zeros(base + part + ".b", {1, d});
        }
    }
}

void register_attention_expert_params(ParameterStore& ps, const std::string& prefix, int d,
                                      uint64_t seed) {
    ps.create_weight(prefix + ".w", {d, d}, d, seed);
    ps.create_weight(prefix + ".a_dst", {d, 1}, d, seed);
    ps.create_weight(prefix + ".a_src", {d, 1}, d, seed);
    ps.create_weight(prefix + ".edge_w", {1, 1}, 1, seed);
    ps.create_weight(prefix + ".w_v", {d, d}, d, seed);
}

void register_global_expert_params(ParameterStore& ps, const std::string& prefix, int d, int n,
                                   int d_l, uint64_t seed) {
    ps.create_embedding(prefix + ".emb", {n, d_l}, seed);
    ps.create_weight(prefix + ".w_v", {d, d}, d, seed);
}

void register_gate_params(ParameterStore& ps, const std::string& prefix, int ctx_dim, int hidden,
                          int n_e, uint64_t seed) {
    register_mlp(ps, prefix + ".mlp", {ctx_dim, hidden, n_e}, seed);
    register_mlp(ps, prefix + ".noise", {ctx_dim, hidden, n_e}, seed);
}

Var gated_tcn(Graph& g, ParamBinding& p, const std::string& prefix, Var h, const SeqShape& s,
              int tcn_layers) {
    for (int l = 0; l < tcn_layers; ++l) {
        int dil = 1 << l;
        std::vector<int64_t> tap(static_cast<size_t>(s.rows()));
        Tensor mask({static_cast<int>(s.rows()), 1});
        for (int b = 0; b < s.b; ++b)
            for (int t = 0; t < s.t; ++t)
                for (int i = 0; i < s.n; ++i) {
                    int64_t row = (static_cast<int64_t>(b) * s.t + t) * s.n + i;
                    bool in_range = t >= dil;
                    tap[row] = in_range ? row - static_cast<int64_t>(dil) * s.n : row;
                    mask.data[row] = in_range ? 1.0 : 0.0;
                }
        Var shifted = gather_rows(g, h, tap);
        Var mask_leaf = g.constant(mask);
        std::string base = prefix + "." + std::to_string(l);
        auto branch = [&](const char* part) {
            Var cur = affine(g, h, p(base + part + ".w0"), p(base + part + ".b"));
            Var prev = mul_bcast(g, matmul(g, shifted, p(base + part + ".w1")), mask_leaf);
            return add(g, cur, prev);
        };
        h = mul(g, tanh_op(g, branch(".filter")), sigmoid(g, branch(".gate")));
    }
    return h;
}

Var khop_pool_last(Graph& g, Var hp, const SeqShape& s, const Csr& khop) {
    std::vector<int64_t> last(static_cast<size_t>(s.b) * s.n);
    for (int b = 0; b < s.b; ++b)
        for (int i = 0; i < s.n; ++i)
            last[static_cast<size_t>(b) * s.n + i] =
                (static_cast<int64_t>(b) * s.t + (s.t - 1)) * s.n + i;
    Var h_last = gather_rows(g, hp, last);
    return khop_sum(g, h_last, khop, s.b);
}

Var gate_context(Graph& g, ParamBinding& p, Var pooled, const Tensor& statics,
                 const std::vector<int>& tod, const std::vector<int>& dow, const SeqShape& s,
                 bool use_embeddings, const NnCtx& nc) {
    std::vector<Var> parts;
    if (pooled.valid()) parts.push_back(pooled);

    std::vector<int64_t> link_idx(static_cast<size_t>(s.b) * s.n);
    for (int b = 0; b < s.b; ++b)
        for (int i = 0; i < s.n; ++i) link_idx[static_cast<size_t>(b) * s.n + i] = i;

    Var sx = g.constant(statics);
    Var enc = apply_mlp(g, p, "gate.statics", sx, 1, Act::ReLU, Act::ReLU, nc.dropout,
                        nc.training, nc.key, salt_of("gate.statics"));
    parts.push_back(gather_rows(g, enc, link_idx));

    if (use_embeddings) {
        parts.push_back(gather_rows(g, p("embed.s"), link_idx));
        std::vector<int64_t> tod_idx(link_idx.size()), dow_idx(link_idx.size());
        for (int b = 0; b < s.b; ++b)
            for (int i = 0; i < s.n; ++i) {
                tod_idx[static_cast<size_t>(b) * s.n + i] = tod[b];
                dow_idx[static_cast<size_t>(b) * s.n + i] = dow[b];
            }
        parts.push_back(gather_rows(g, p("embed.tod"), tod_idx));
        parts.push_back(gather_rows(g, p("embed.dow"), dow_idx));
    }
    return concat_cols(g, parts);
}

Tensor gate_noise(uint64_t key, int layer, const std::vector<int>& origins, int n, int n_e) {
    int b = static_cast<int>(origins.size());
    Tensor eps({b * n, n_e});
    for (int k = 0; k < b; ++k)
        for (int i = 0; i < n; ++i) {
            uint64_t kk = hash_combine(
                hash_combine(hash_combine(key, static_cast<uint64_t>(layer)),
                             static_cast<uint64_t>(origins[k])),
                static_cast<uint64_t>(i));
            for (int e = 0; e < n_e; ++e)
                eps.at2(static_cast<int64_t>(k) * n + i, e) = rng_normal(kk, e);
        }
    return eps;
}

GateDiag noisy_topk_gate(Graph& g, ParamBinding& p, const std::string& prefix, Var ctx, int k,
                         const Tensor& eps, const NnCtx& nc) {
    GateDiag d;
    d.clean = apply_mlp(g, p, prefix + ".mlp", ctx, 2, Act::ReLU, Act::None, nc.dropout,
                        nc.training, nc.key, salt_of(prefix + ".mlp"));
    Var logits = d.clean;
    if (nc.training) {
        d.sigma = softplus(g, apply_mlp(g, p, prefix + ".noise", ctx, 2, Act::ReLU, Act::None,
                                        nc.dropout, nc.training, nc.key,
                                        salt_of(prefix + ".noise")));
        if (!g.val(d.clean).same_shape(eps))
            throw std::runtime_error("gate noise tensor shape mismatch");
        d.eps = eps;
        logits = add(g, d.clean, mul(g, g.constant(eps), d.sigma));
    }
    d.weights = topk_softmax(g, logits, k);
    return d;
}

Var graph_attention_expert(Graph& g, ParamBinding& p, const std::string& prefix, Var h,
                           const SeqShape& s, const data::EdgeSetIdx& es) {
    int e_cnt = static_cast<int>(es.src.size());
    if (e_cnt == 0) return h;  // no neighbors anywhere: pure residual
    int groups = s.b * s.t;

    Var hw = matmul(g, h, p(prefix + ".w"));
    Var s_dst = edge_gather(g, matmul(g, hw, p(prefix + ".a_dst")), es.dst, groups, s.n);
    Var s_src = edge_gather(g, matmul(g, hw, p(prefix + ".a_src")), es.src, groups, s.n);

    Tensor r_tiled({groups * e_cnt, 1});
    for (int q = 0; q < groups; ++q)
        for (int e = 0; e < e_cnt; ++e)
            r_tiled.data[static_cast<size_t>(q) * e_cnt + e] = es.r.data[e];
    Var s_edge = const_times_scalar(g, r_tiled, p(prefix + ".edge_w"));

    Var scores = leaky_relu(g, add(g, add(g, s_dst, s_src), s_edge), 0.01);
    Var alpha = edge_softmax(g, scores, es.by_dst, groups);
    Var msg = edge_gather(g, matmul(g, h, p(prefix + ".w_v")), es.src, groups, s.n);
    Var agg = edge_aggregate(g, alpha, msg, es.by_dst, groups, s.n);
    return add(g, agg, h);
}

Var adaptive_adjacency(Graph& g, Var emb) {
    return softmax_rows(g, relu(g, matmul_nt(g, emb, emb)));
}

Var global_expert(Graph& g, ParamBinding& p, const std::string& prefix, Var h,
                  const SeqShape& s) {
    Var a = adaptive_adjacency(g, p(prefix + ".emb"));
    Var mixed = shared_mix(g, a, matmul(g, h, p(prefix + ".w_v")), s.b * s.t);
    return add(g, mixed, h);
}

LayerOut magl_layer(Graph& g, ParamBinding& p, const std::string& prefix, Var h,
                    const SeqShape& s, Var ctx, int k, const ExpertSet& experts,
                    const Tensor& eps, const NnCtx& nc) {
    std::vector<Var> outs;
    for (int j = 0; j < experts.n_up; ++j)
        outs.push_back(graph_attention_expert(g, p, prefix + ".up" + std::to_string(j), h, s,
                                              *experts.up));
    for (int j = 0; j < experts.n_down; ++j)
        outs.push_back(graph_attention_expert(g, p, prefix + ".down" + std::to_string(j), h, s,
                                              *experts.down));
    for (int j = 0; j < experts.n_glob; ++j)
        outs.push_back(global_expert(g, p, prefix + ".glob" + std::to_string(j), h, s));

    LayerOut out;
    out.diag = noisy_topk_gate(g, p, prefix + ".gate", ctx, k, eps, nc);
    out.h = mix_experts(g, out.diag.weights, outs, s.b, s.t, s.n);
    return out;
}

Var magl_predict(Graph& g, ParamBinding& p, const std::string& prefix, Var h, const SeqShape& s,
                 int t_f, const NnCtx& nc) {
    Var flat = permute_tn(g, h, s.b, s.t, s.n);
    (void)t_f;
    return apply_mlp(g, p, prefix, flat, 2, Act::ReLU, Act::None, nc.dropout, nc.training,
                     nc.key, salt_of(prefix));
}

}  // namespace cpmoe::model
