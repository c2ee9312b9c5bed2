#pragma once

#include <string>
#include <vector>

#include "cpmoe/baselines.hpp"
#include "cpmoe/losses.hpp"
#include "cpmoe/metrics.hpp"
#include "cpmoe/optim.hpp"

namespace cpmoe::train {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 8;  // instances (prediction origins) per step
    int patience = 30;   // epochs without validation improvement
    uint64_t seed = 1;
    // Origin subsampling (every n-th) for budget-bound runs.
    int train_stride = 1, val_stride = 1, test_stride = 1;
    nn::AdamConfig adam;
    LossWeights weights;
    std::vector<double> phi_steps = {1.0, 2.0};
};

struct StepRow {
    int epoch = 0;
    int step = 0;  // global optimizer step, 1-based
    double loss = 0.0, l_ord = 0.0, l_imp = 0.0, l_load = 0.0;
    double val_cf1 = -1.0;  // filled on each epoch's last step; negative = not evaluated
};

struct TrainResult {
    double best_val_cf1 = -1.0;
    int best_epoch = -1;
    int epochs_run = 0, steps = 0;
    std::vector<StepRow> log;
};

// One evaluated (origin, link, step) cell, for prediction dumps and reports.
struct PredRow {
    int t = 0, link = 0, step = 0;
    int8_t label = -1, pred = 0;
    double logit[3] = {0, 0, 0};
    double w_per = 0, w_tr = 0, w_m = 0;
};

// Inference over the given origins in batches; metrics skip unobserved
// labels. `dump` (optional) receives every cell including unobserved ones.
MetricReport evaluate_split(nn::ParameterStore& ps, const model::ModelConfig& mcfg,
                            const model::GraphIndex& gi, const data::Dataset& ds,
                            const std::vector<int>& origins, int batch_size,
                            std::vector<PredRow>* dump = nullptr);

// Mini-batch Adam with per-epoch validation, best-checkpoint selection on
// validation C-F1 and early stopping. On return `ps` holds the best
// parameters seen. Deterministic in (ps, configs, seed); throws on a
// non-finite loss.
TrainResult train_model(nn::ParameterStore& ps, const model::ModelConfig& mcfg,
                        const model::GraphIndex& gi, const data::Dataset& ds,
                        const TrainConfig& tcfg);

// CSV: epoch,step,loss,l_ord,l_imp,l_load,val_cf1 (val_cf1 empty when the
// row closed no epoch).
void save_train_log(const std::vector<StepRow>& log, const std::string& path);

// Every n-th element; stride 1 copies.
std::vector<int> stride_origins(const std::vector<int>& origins, int stride);

}  // namespace cpmoe::train
