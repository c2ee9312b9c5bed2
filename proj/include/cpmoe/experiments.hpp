#pragma once

#include <string>
#include <vector>

#include "cpmoe/trainer.hpp"

namespace cpmoe::train {

struct RunSummary {
    std::string tag;
    MetricReport test;
    double best_val_cf1 = -1.0;
    int best_epoch = -1;
    int steps = 0;
};

// One full cycle on a fresh dataset built from (net, clean): optional train-
// split corruption, parameter init from tcfg.seed, training, test metrics.
RunSummary run_once(const std::string& tag, const data::TrafficNetwork& net,
                    const data::FeatureTensor& clean, const data::DatasetConfig& dcfg,
                    const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                    const data::CorruptionSpec* corrupt);

// Grid of (mode, percent, seed) cells: corrupt the training split, train,
// evaluate on the untouched test split.
std::vector<RunSummary> robustness_suite(const data::TrafficNetwork& net,
                                         const data::FeatureTensor& clean,
                                         const data::DatasetConfig& dcfg,
                                         const model::ModelConfig& mcfg,
                                         const TrainConfig& tcfg,
                                         const std::vector<data::CorruptMode>& modes,
                                         const std::vector<double>& percents,
                                         const std::vector<uint64_t>& seeds);

// One run per (variant, seed) on clean data.
std::vector<RunSummary> ablation_suite(const data::TrafficNetwork& net,
                                       const data::FeatureTensor& clean,
                                       const data::DatasetConfig& dcfg,
                                       const model::ModelConfig& base_mcfg,
                                       const TrainConfig& tcfg,
                                       const std::vector<std::string>& variants,
                                       const std::vector<uint64_t>& seeds);

void save_summaries(const std::vector<RunSummary>& rows, const std::string& path);

}  // namespace cpmoe::train
