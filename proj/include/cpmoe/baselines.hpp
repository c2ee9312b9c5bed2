#pragma once

#include <cstdint>
#include <vector>

#include "cpmoe/dataset.hpp"

namespace cpmoe::train {

// Persistence: the (imputed) congestion level at the prediction origin,
// broadcast over the whole horizon. Output layout matches batch.labels.
std::vector<int8_t> predict_current_time(const data::Batch& batch);

// Modal training-period congestion level per (time-of-day slot, link); ties
// resolve toward the higher level, never-observed slots default to fast.
struct HaTable {
    int t_d = 288, n = 0;
    std::vector<int8_t> mode;  // [t_d * n]
};

HaTable build_ha_table(const data::Dataset& ds, int t_d);
std::vector<int8_t> predict_historical_average(const HaTable& ha, const data::Batch& batch);

}  // namespace cpmoe::train
