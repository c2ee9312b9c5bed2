#include "cpmoe/citpe.hpp"

#include <stdexcept>

#include "cpmoe/wavelet.hpp"

namespace cpmoe::model {

using namespace cpmoe::nn;

void register_trend_params(ParameterStore& ps, int c, int d, int t_p, int t_f, uint64_t seed) {
    ps.create_weight("trend.embed.w", {c, d}, c, seed);
    ps.create_zeros("trend.embed.b", {1, d});
    for (const char* nm : {"trend.q", "trend.k", "trend.v"}) {
        ps.create_weight(std::string(nm) + ".w", {d, d}, d, seed);
        ps.create_zeros(std::string(nm) + ".b", {1, d});
    }
    register_mlp(ps, "trend.head", {t_p * d, 2 * d, t_f * 3}, seed);
}

void register_periodic_params(ParameterStore& ps, int c, int d, int d_l, int n_slices, int t_f,
                              uint64_t seed) {
    register_mlp(ps, "periodic.enc", {n_slices * t_f * (c + 2 * d_l), 2 * d, d}, seed);
    register_mlp(ps, "periodic.head", {d + d_l, 2 * d, t_f * 3}, seed);
}

void register_confidence_params(ParameterStore& ps, uint64_t seed) {
    register_mlp(ps, "conf.c1", {2, 16, 1}, seed);
    register_mlp(ps, "conf.c2", {2, 16, 1}, seed);
}

Tensor extract_trend(const Tensor& recent, const SeqShape& s, int levels) {
    int c = recent.cols();
    Tensor out = recent;
    std::vector<double> x(static_cast<size_t>(s.t));
    for (int b = 0; b < s.b; ++b)
        for (int i = 0; i < s.n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                for (int t = 0; t < s.t; ++t)
                    x[static_cast<size_t>(t)] =
                        recent.at2((static_cast<int64_t>(b) * s.t + t) * s.n + i, ch);
                std::vector<double> tr = wavelet_trend(x, levels);
                for (int t = 0; t < s.t; ++t)
                    out.at2((static_cast<int64_t>(b) * s.t + t) * s.n + i, ch) =
                        tr[static_cast<size_t>(t)];
            }
    return out;
}

Var trend_expert(Graph& g, ParamBinding& p, const Tensor& trend_rows, const SeqShape& s,
                 int heads, const NnCtx& nc) {
    Var r = g.constant(trend_rows);
    Var emb = affine(g, r, p("trend.embed.w"), p("trend.embed.b"));
    int d = g.val(emb).cols();

    // (b, t, n) rows -> (b, n, t) so each (sample, link) series is one
    // attention group.
    std::vector<int64_t> perm(static_cast<size_t>(s.rows()));
    for (int b = 0; b < s.b; ++b)
        for (int i = 0; i < s.n; ++i)
            for (int t = 0; t < s.t; ++t)
                perm[(static_cast<size_t>(b) * s.n + i) * s.t + t] =
                    (static_cast<int64_t>(b) * s.t + t) * s.n + i;
    Var h = gather_rows(g, emb, perm);

    Var q = affine(g, h, p("trend.q.w"), p("trend.q.b"));
    Var k = affine(g, h, p("trend.k.w"), p("trend.k.b"));
    Var v = affine(g, h, p("trend.v.w"), p("trend.v.b"));
    Var attn = softmax_rows(g, bmm_scores(g, q, k, s.t, heads));
    Var att = bmm_attend(g, attn, v, s.t, heads);

    Var flat = reshape(g, att, {s.b * s.n, s.t * d});
    return apply_mlp(g, p, "trend.head", flat, 2, Act::ReLU, Act::None, nc.dropout, nc.training,
                     nc.key, salt_of("trend.head"));
}

Var periodic_expert(Graph& g, ParamBinding& p, const data::Batch& batch, const NnCtx& nc) {
    if (batch.n_slices < 1)
        throw std::runtime_error("periodic expert needs history slices (n_d + n_w >= 1)");
    int bsz = batch.b, slices = batch.n_slices, t_f = batch.t_f, n = batch.n;
    size_t rows = static_cast<size_t>(bsz) * slices * t_f * n;

    // Each history step's shared time embeddings, tiled across links.
    std::vector<int64_t> tod_idx(rows), dow_idx(rows);
    for (int b = 0; b < bsz; ++b)
        for (int q = 0; q < slices; ++q)
            for (int st = 0; st < t_f; ++st) {
                size_t step = (static_cast<size_t>(b) * slices + q) * t_f + st;
                for (int i = 0; i < n; ++i) {
                    tod_idx[step * n + i] = batch.hist_tod[step];
                    dow_idx[step * n + i] = batch.hist_dow[step];
                }
            }
    Var hv = g.constant(batch.hist);
    Var cat = concat_cols(g, {hv, gather_rows(g, p("embed.tod"), tod_idx),
                              gather_rows(g, p("embed.dow"), dow_idx)});
    int width = g.val(cat).cols();

    // (b, slice, step, link) rows -> (b, link, slice, step), then flatten the
    // whole history per link.
    std::vector<int64_t> perm(rows);
    for (int b = 0; b < bsz; ++b)
        for (int i = 0; i < n; ++i)
            for (int q = 0; q < slices; ++q)
                for (int st = 0; st < t_f; ++st)
                    perm[((static_cast<size_t>(b) * n + i) * slices + q) * t_f + st] =
                        ((static_cast<int64_t>(b) * slices + q) * t_f + st) * n + i;
    Var flat = reshape(g, gather_rows(g, cat, perm), {bsz * n, slices * t_f * width});
    Var enc = apply_mlp(g, p, "periodic.enc", flat, 2, Act::ReLU, Act::None, nc.dropout,
                        nc.training, nc.key, salt_of("periodic.enc"));

    std::vector<int64_t> link_idx(static_cast<size_t>(bsz) * n);
    for (int b = 0; b < bsz; ++b)
        for (int i = 0; i < n; ++i) link_idx[static_cast<size_t>(b) * n + i] = i;
    Var withs = concat_cols(g, {enc, gather_rows(g, p("embed.s"), link_idx)});
    return apply_mlp(g, p, "periodic.head", withs, 2, Act::ReLU, Act::None, nc.dropout,
                     nc.training, nc.key, salt_of("periodic.head"));
}

Var dispersion(Graph& g, Var logits3) {
    Var dev = sub_bcast(g, logits3, mean_lastdim(g, logits3));
    Var var = mean_lastdim(g, mul(g, dev, dev));
    Var ne = sum_lastdim(g, mul(g, softmax_rows(g, logits3), log_softmax_rows(g, logits3)));
    return concat_cols(g, {var, ne});
}

Var confidence(Graph& g, ParamBinding& p, Var logits3, int which, double force, const NnCtx& nc) {
    if (force >= 0.0) {
        int64_t rows = g.val(logits3).rows();
        return g.constant(Tensor::full({static_cast<int>(rows), 1}, force));
    }
    std::string name = which == 1 ? "conf.c1" : "conf.c2";
    return apply_mlp(g, p, name, dispersion(g, logits3), 2, Act::ReLU, Act::Sigmoid, nc.dropout,
                     nc.training, nc.key, salt_of(name));
}

CascadeOut cascade(Graph& g, Var per3, Var tr3, Var m3, Var c1, Var c2) {
    Var one = axpb(g, c1, -1.0, 1.0);
    Var onec2 = axpb(g, c2, -1.0, 1.0);
    Var re = add(g, mul_bcast(g, tr3, c2), mul_bcast(g, m3, onec2));
    CascadeOut out;
    out.logits = add(g, mul_bcast(g, per3, c1), mul_bcast(g, re, one));
    out.w_per = c1;
    out.w_tr = mul(g, one, c2);
    out.w_m = mul(g, one, onec2);
    return out;
}

}  // namespace cpmoe::model
