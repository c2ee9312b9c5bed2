#include "cpmoe/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace cpmoe::train {

using namespace cpmoe::nn;

std::vector<double> ordinal_smooth(int y, const OrdinalSpec& spec) {
    int n_cls = static_cast<int>(spec.phi_steps.size()) + 1;
    if (y < 0 || y >= n_cls) throw std::runtime_error("ordinal_smooth: class out of range");
    std::vector<double> out(static_cast<size_t>(n_cls), 0.0);
    if (spec.one_hot) {
        out[static_cast<size_t>(y)] = 1.0;
        return out;
    }
    std::vector<double> cum(static_cast<size_t>(n_cls), 0.0);
    for (int i = 1; i < n_cls; ++i) cum[i] = cum[i - 1] + spec.phi_steps[i - 1];
    double z = 0.0;
    for (int i = 0; i < n_cls; ++i) {
        out[i] = std::exp(-std::abs(cum[i] - cum[y]));
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

Var ordinal_kl_loss(Graph& g, Var logits, const std::vector<int8_t>& labels, int b, int t_f,
                    int n, const OrdinalSpec& spec) {
    const Tensor& lv = g.val(logits);
    int n_cls = lv.cols();
    int64_t rows = static_cast<int64_t>(b) * t_f * n;
    if (lv.rows() != rows || labels.size() != static_cast<size_t>(rows))
        throw std::runtime_error("ordinal_kl_loss: logit/label shape mismatch");

    // 3 distinct targets; precompute them and their entropy terms once.
    std::vector<std::vector<double>> targets;
    std::vector<double> tgt_ent;
    for (int c = 0; c < n_cls; ++c) {
        targets.push_back(ordinal_smooth(c, spec));
        double e = 0.0;
        for (double v : targets.back())
            if (v > 0.0) e += v * std::log(v);
        tgt_ent.push_back(e);
    }

    Tensor y({static_cast<int>(rows), n_cls});
    double ent = 0.0;
    int64_t n_obs = 0;
    for (int bb = 0; bb < b; ++bb)
        for (int s = 0; s < t_f; ++s)
            for (int i = 0; i < n; ++i) {
                int8_t lab = labels[(static_cast<size_t>(bb) * t_f + s) * n + i];
                if (lab < 0) continue;
                int64_t row = (static_cast<int64_t>(bb) * n + i) * t_f + s;
                for (int c = 0; c < n_cls; ++c) y.at2(row, c) = targets[lab][c];
                ent += tgt_ent[lab];
                ++n_obs;
            }
    if (n_obs == 0) throw std::runtime_error("ordinal_kl_loss: no observed labels in batch");

    Var cross = sum_all(g, mul(g, g.constant(std::move(y)), log_softmax_rows(g, logits)));
    double inv = 1.0 / static_cast<double>(n_obs);
    return axpb(g, cross, -inv, ent * inv);
}

// CV of a [1,K] row as a {1} scalar; a zero mean (no mass at all) counts as
// perfectly balanced.
static Var cv_of_row(Graph& g, Var row) {
    Var m = mean_lastdim(g, row);
    if (g.val(m)[0] == 0.0) return g.constant(Tensor::scalar(0.0));
    Var dev = sub_bcast(g, row, m);
    Var sd = sqrt_op(g, mean_lastdim(g, mul(g, dev, dev)));
    return reshape(g, div_ew(g, sd, m), {1});
}

Var importance_loss(Graph& g, const model::GateDiag& diag) {
    return cv_of_row(g, sum_cols(g, diag.weights));
}

Var load_loss(Graph& g, const model::GateDiag& diag, int k) {
    if (!diag.sigma.valid())
        throw std::runtime_error("load_loss: gate noise scales only exist in training mode");
    return cv_of_row(g, sum_cols(g, load_probs(g, diag.clean, diag.sigma, diag.eps, k)));
}

LossOut total_loss(Graph& g, const model::ModelOutput& out, const data::Batch& batch,
                   const OrdinalSpec& spec, const LossWeights& w, int k) {
    LossOut lo;
    Var total =
        ordinal_kl_loss(g, out.logits, batch.labels, batch.b, batch.t_f, batch.n, spec);
    lo.l_ord = g.val(total)[0];
    for (const auto& diag : out.gates) {
        Var imp = importance_loss(g, diag);
        lo.l_imp += g.val(imp)[0];
        total = add(g, total, axpb(g, imp, w.lambda1, 0.0));
        if (diag.sigma.valid()) {
            Var load = load_loss(g, diag, k);
            lo.l_load += g.val(load)[0];
            total = add(g, total, axpb(g, load, w.lambda2, 0.0));
        }
    }
    lo.total = total;
    return lo;
}

}  // namespace cpmoe::train
