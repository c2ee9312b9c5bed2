#pragma once

#include <cstdint>
#include <vector>

#include "cpmoe/features.hpp"
#include "cpmoe/network.hpp"
#include "cpmoe/tensor.hpp"

namespace cpmoe::data {

struct DatasetConfig {
    int t_p = 12, t_f = 12;    // recent window / prediction horizon
    int n_d = 4, n_w = 3;      // daily / weekly history slices
    int t_d = 288, t_w = 2016;  // intervals per day / week
    double train_ratio = 0.7, val_ratio = 0.1;
};

// Normalization and imputation statistics, all derived from the training
// view's observed cells at or before the last training origin.
struct NormStats {
    double speed_mean = 0.0, speed_std = 1.0;
    std::vector<double> link_speed_mean;  // raw km/h; imputation fallback
    std::vector<int8_t> link_level_mode;  // imputation fallback
    Tensor statics;                       // [N, D_s] link attributes, standardized per column
};

// One optimizer step / evaluation unit. Feature rows are [.., 2] with
// channel 0 = standardized speed, channel 1 = congestion level as a real.
struct Batch {
    int b = 0, t_p = 0, t_f = 0, n = 0, n_slices = 0;
    Tensor recent;                        // [B*T_p*N, 2], time-major within instance
    Tensor hist;                          // [B*n_slices*T_f*N, 2]; numel 0 when n_slices=0
    std::vector<int> origin;              // [B] prediction origins
    std::vector<int> tod, dow;            // [B] at origin
    std::vector<int> hist_tod, hist_dow;  // [B*n_slices*T_f] per history step
    std::vector<int8_t> labels;           // [B*T_f*N]; -1 = unobserved, excluded from loss/metrics
};

// Two views of the same series: training inputs read the (possibly
// corrupted) train view, evaluation inputs read the clean view, labels
// always read the clean view. filled_* hold imputed standardized rows
// [t*n*2]: masked cells carry the link's last observed value (train-stat
// fallback before the first observation).
struct Dataset {
    TrafficNetwork net;
    FeatureTensor clean;
    FeatureTensor train_view;
    DatasetConfig cfg;
    std::vector<int> origins;  // eligible prediction origins
    SplitOrigins splits;
    NormStats stats;
    std::vector<double> filled_train, filled_eval;

    int n_links() const { return net.n_links(); }
    int n_slices() const { return cfg.n_d + cfg.n_w; }
};

Dataset build_dataset(TrafficNetwork net, FeatureTensor clean, const DatasetConfig& cfg);

// Corrupts training inputs (cells strictly before the first validation
// origin's input window, i.e. t <= last train origin) and refreshes the
// statistics and the train view's imputed rows.
void apply_corruption(Dataset& ds, const CorruptionSpec& spec);

Batch make_batch(const Dataset& ds, const std::vector<int>& origins, bool train_inputs);

}  // namespace cpmoe::data
