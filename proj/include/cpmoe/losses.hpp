#pragma once

#include <cstdint>
#include <vector>

#include "cpmoe/model.hpp"

namespace cpmoe::train {

struct OrdinalSpec {
    // Adjacent-class distances; the full phi matrix telescopes from these.
    std::vector<double> phi_steps = {1.0, 2.0};
    // Hard one-hot targets instead of smoothing (ablation).
    bool one_hot = false;
};

struct LossWeights {
    double lambda1 = 1e-3;  // importance
    double lambda2 = 1e-3;  // load
};

// Distance-decayed soft target: y_ord[i] = exp(-phi(i,y)) / sum_j exp(-phi(j,y)).
std::vector<double> ordinal_smooth(int y, const OrdinalSpec& spec);

// Mean over observed labels of KL(y_ord || softmax(logits)). Logit rows are
// (sample, link, step); labels are (sample, step, link) with -1 = unobserved.
// Throws when every label is unobserved.
nn::Var ordinal_kl_loss(nn::Graph& g, nn::Var logits, const std::vector<int8_t>& labels, int b,
                        int t_f, int n, const OrdinalSpec& spec);

// Coefficient of variation (population std / mean) across experts of the
// batch-summed gate weights; zero when balanced or when there is no mass.
nn::Var importance_loss(nn::Graph& g, const model::GateDiag& diag);

// Same statistic over summed activation probabilities Phi((clean - threshold)
// / sigma); only defined while training (needs the gate's noise scales).
nn::Var load_loss(nn::Graph& g, const model::GateDiag& diag, int k);

struct LossOut {
    nn::Var total;                              // shape {1}
    double l_ord = 0.0, l_imp = 0.0, l_load = 0.0;  // component values for logs
};

// l_ord + lambda1 * sum_layers(importance) + lambda2 * sum_layers(load); the
// load terms are skipped at inference.
LossOut total_loss(nn::Graph& g, const model::ModelOutput& out, const data::Batch& batch,
                   const OrdinalSpec& spec, const LossWeights& w, int k);

}  // namespace cpmoe::train
