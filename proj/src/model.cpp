#include "cpmoe/model.hpp"

#include <stdexcept>

namespace cpmoe::model {

using namespace cpmoe::nn;

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "WoLE") return Variant::WoLE;
    if (name == "WoPL") return Variant::WoPL;
    if (name == "WoIB") return Variant::WoIB;
    if (name == "WoC") return Variant::WoC;
    if (name == "WA") return Variant::WA;
    if (name == "WoR") return Variant::WoR;
    throw std::runtime_error("unknown variant: " + name);
}

GraphIndex build_graph_index(const data::TrafficNetwork& net, const Tensor& statics, int khop) {
    GraphIndex gi;
    gi.n = net.n_links();
    gi.d_s = net.attr_dim();
    if (statics.rows() != gi.n || statics.cols() != gi.d_s)
        throw std::runtime_error("statics tensor does not match the network");
    gi.up = data::build_edge_set(net, data::NeighborMode::Upstream);
    gi.down = data::build_edge_set(net, data::NeighborMode::Downstream);
    gi.undir = data::build_edge_set(net, data::NeighborMode::Undirected);
    gi.khop = data::build_khop_csr(net, khop);
    gi.statics = statics;
    return gi;
}

static int gate_ctx_dim(const ModelConfig& cfg, Variant v) {
    int ctx = cfg.d;                            // encoded statics
    if (v != Variant::WoPL) ctx += cfg.d;       // pooled temporal summary
    if (v != Variant::WoLE) ctx += 3 * cfg.d_l; // link / tod / dow embeddings
    return ctx;
}

void init_params(ParameterStore& ps, const ModelConfig& cfg, const GraphIndex& gi,
                 uint64_t seed) {
    Variant v = parse_variant(cfg.variant);
    const int c = 2;
    if (v != Variant::WoC && cfg.n_slices < 1)
        throw std::runtime_error("variant " + cfg.variant + " needs history slices (n_d + n_w >= 1)");

    ps.create_weight("embed.input.w", {c, cfg.d}, c, seed);
    ps.create_zeros("embed.input.b", {1, cfg.d});
    ps.create_embedding("embed.s", {gi.n, cfg.d_l}, seed);
    ps.create_embedding("embed.tod", {cfg.t_d, cfg.d_l}, seed);
    ps.create_embedding("embed.dow", {7, cfg.d_l}, seed);
    register_mlp(ps, "gate.statics", {gi.d_s, cfg.d}, seed);
    if (v != Variant::WoPL) register_tcn_params(ps, "tcn", cfg.d, cfg.tcn_layers, seed);

    int ctx = gate_ctx_dim(cfg, v);
    for (int l = 0; l < cfg.layers; ++l) {
        std::string prefix = "magl" + std::to_string(l);
        for (int j = 0; j < cfg.n_up; ++j)
            register_attention_expert_params(ps, prefix + ".up" + std::to_string(j), cfg.d, seed);
        for (int j = 0; j < cfg.n_down; ++j)
            register_attention_expert_params(ps, prefix + ".down" + std::to_string(j), cfg.d,
                                             seed);
        for (int j = 0; j < cfg.n_glob; ++j)
            register_global_expert_params(ps, prefix + ".glob" + std::to_string(j), cfg.d, gi.n,
                                          cfg.d_l, seed);
        register_gate_params(ps, prefix + ".gate", ctx, cfg.d, cfg.n_experts(), seed);
    }
    register_mlp(ps, "head.m", {cfg.t_p * cfg.d, 2 * cfg.d, cfg.t_f * 3}, seed);

    if (v != Variant::WoC) {
        register_trend_params(ps, c, cfg.d, cfg.t_p, cfg.t_f, seed);
        register_periodic_params(ps, c, cfg.d, cfg.d_l, cfg.n_slices, cfg.t_f, seed);
        if (v != Variant::WA) register_confidence_params(ps, seed);
    }
}

ModelOutput model_forward(Graph& g, ParamBinding& p, const ModelConfig& cfg,
                          const GraphIndex& gi, const data::Batch& batch, const NnCtx& nc) {
    Variant v = parse_variant(cfg.variant);
    if (batch.n != gi.n) throw std::runtime_error("batch/network link count mismatch");
    if (batch.t_p != cfg.t_p || batch.t_f != cfg.t_f)
        throw std::runtime_error("batch windows do not match the model config");
    if (v != Variant::WoC && batch.n_slices != cfg.n_slices)
        throw std::runtime_error("batch history slices do not match the model config");

    SeqShape s{batch.b, batch.t_p, batch.n};
    ModelOutput out;

    Var h = affine(g, g.constant(batch.recent), p("embed.input.w"), p("embed.input.b"));

    Var pooled;
    if (v != Variant::WoPL) {
        Var hp = gated_tcn(g, p, "tcn", h, s, cfg.tcn_layers);
        pooled = khop_pool_last(g, hp, s, gi.khop);
    }
    Var ctx = gate_context(g, p, pooled, gi.statics, batch.tod, batch.dow, s,
                           v != Variant::WoLE, nc);

    ExpertSet experts;
    experts.up = v == Variant::WoIB ? &gi.undir : &gi.up;
    experts.down = v == Variant::WoIB ? &gi.undir : &gi.down;
    experts.n_up = cfg.n_up;
    experts.n_down = cfg.n_down;
    experts.n_glob = cfg.n_glob;

    for (int l = 0; l < cfg.layers; ++l) {
        Tensor eps;
        if (nc.training) eps = gate_noise(nc.key, l, batch.origin, batch.n, experts.n_total());
        LayerOut lo =
            magl_layer(g, p, "magl" + std::to_string(l), h, s, ctx, cfg.k, experts, eps, nc);
        h = lo.h;
        out.gates.push_back(lo.diag);
    }

    // All logits below live as (sample, link, step) rows of 3 class scores.
    int r = batch.b * batch.n * batch.t_f;
    Var m3 = reshape(g, magl_predict(g, p, "head.m", h, s, cfg.t_f, nc), {r, 3});
    out.logits_m = m3;

    if (v == Variant::WoC) {
        out.logits = m3;
        return out;
    }

    Tensor trend = extract_trend(batch.recent, s, cfg.wavelet_levels);
    Var tr3 = reshape(g, trend_expert(g, p, trend, s, cfg.heads, nc), {r, 3});
    Var per3 = reshape(g, periodic_expert(g, p, batch, nc), {r, 3});
    out.logits_tr = tr3;
    out.logits_per = per3;

    if (v == Variant::WA) {
        out.logits = axpb(g, add(g, add(g, per3, tr3), m3), 1.0 / 3.0, 0.0);
        return out;
    }

    Var c1 = confidence(g, p, per3, 1, cfg.force_c1, nc);
    Var c2 = confidence(g, p, tr3, 2, cfg.force_c2, nc);
    CascadeOut co = cascade(g, per3, tr3, m3, c1, c2);
    out.logits = co.logits;
    out.w_per = co.w_per;
    out.w_tr = co.w_tr;
    out.w_m = co.w_m;
    return out;
}

}  // namespace cpmoe::model
