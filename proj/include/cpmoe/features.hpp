#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpmoe/tensor.hpp"

namespace cpmoe::data {

// Dynamic per-link features on a fixed 5-minute grid. Storage is struct-of-
// arrays indexed [t * n + link]. Unobserved cells carry sentinels (speed 0,
// level -1) and must never be read as data.
struct FeatureTensor {
    int t = 0, n = 0;
    int interval_minutes = 5;
    std::vector<double> speed;      // km/h
    std::vector<int8_t> level;      // 0 fast, 1 slow, 2 congested, -1 unobserved
    std::vector<uint8_t> observed;  // 1 = observed

    static FeatureTensor empty(int t, int n);
    int64_t idx(int tt, int link) const { return static_cast<int64_t>(tt) * n + link; }
    bool is_obs(int tt, int link) const { return observed[idx(tt, link)] != 0; }
    int64_t observed_count() const;
};

// Raw per-minute records, same layout as FeatureTensor but on a 1-minute grid.
struct MinuteSeries {
    int t_minutes = 0, n = 0;
    std::vector<double> speed;
    std::vector<int8_t> level;
    std::vector<uint8_t> observed;
};

// Five consecutive minutes collapse into one interval: speed = mean of the
// observed minutes, level = mode of the observed minutes (ties resolved
// toward the more congested level), fully-missing interval stays masked.
FeatureTensor aggregate_minutes(const MinuteSeries& m);

// Time windows shifted back by whole days/weeks from prediction origin t:
// slice d (1-based) covers [t+1-d*t_d, t+t_f-d*t_d]. Daily slices are listed
// oldest-first, then weekly slices oldest-first.
struct HistoryWindows {
    std::vector<int> starts;  // n_d + n_w window start indices, each t_f long
};
HistoryWindows history_windows(int t, int t_f, int n_d, int n_w, int t_d, int t_w);

// Earliest origin whose recent window, history windows, and label window all
// fit inside [0, t_total).
std::vector<int> eligible_origins(int t_total, int t_p, int t_f, int n_d, int n_w, int t_d,
                                  int t_w);

enum class CorruptMode { Mask, Flip };

struct CorruptionSpec {
    CorruptMode mode = CorruptMode::Mask;
    double percent = 0.0;  // share of observed cells hit, in [0, 100]
    uint64_t seed = 0;
};

// Corrupts exactly floor(percent/100 * count of observed cells with t < t_end)
// cells, chosen by a seeded shuffle. Mask mode hides them; flip mode replaces
// the level with a uniformly random different one and sets the speed to the
// link's mean observed speed at the new level (pre-corruption statistics).
// t_end < 0 means the whole series.
FeatureTensor corrupt(const FeatureTensor& f, const CorruptionSpec& spec, int t_end = -1);

// Contiguous chronological split of prediction origins by count.
struct SplitOrigins {
    std::vector<int> train, val, test;
};
SplitOrigins split_origins(const std::vector<int>& origins, double train_ratio,
                           double val_ratio);

// Share of observed cells at the given congestion level.
double level_ratio(const FeatureTensor& f, int level);

// features.csv: header `t,link_id,speed,level,observed`, rows sorted by
// (t, link_id), speeds printed with %.17g so a round trip is bit-exact.
void save_features(const FeatureTensor& f, const std::string& path);
FeatureTensor load_features(const std::string& path);

}  // namespace cpmoe::data
