#include "cpmoe/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cpmoe/rng.hpp"

namespace cpmoe::data {

FeatureTensor FeatureTensor::empty(int t, int n) {
    FeatureTensor f;
    f.t = t;
    f.n = n;
    size_t sz = static_cast<size_t>(t) * n;
    f.speed.assign(sz, 0.0);
    f.level.assign(sz, -1);
    f.observed.assign(sz, 0);
    return f;
}

int64_t FeatureTensor::observed_count() const {
    int64_t c = 0;
    for (uint8_t o : observed) c += o;
    return c;
}

FeatureTensor aggregate_minutes(const MinuteSeries& m) {
    int t_out = m.t_minutes / 5;
    FeatureTensor f = FeatureTensor::empty(t_out, m.n);
    for (int tt = 0; tt < t_out; ++tt)
        for (int i = 0; i < m.n; ++i) {
            double sum = 0.0;
            int cnt = 0, votes[3] = {0, 0, 0};
            for (int k = 0; k < 5; ++k) {
                int64_t r = static_cast<int64_t>(tt * 5 + k) * m.n + i;
                if (!m.observed[r]) continue;
                sum += m.speed[r];
                votes[m.level[r]]++;
                cnt++;
            }
            if (cnt == 0) continue;
            int best = 0;
            for (int l = 1; l < 3; ++l)
                if (votes[l] >= votes[best]) best = l;  // tie -> more congested
            int64_t o = f.idx(tt, i);
            f.speed[o] = sum / cnt;
            f.level[o] = static_cast<int8_t>(best);
            f.observed[o] = 1;
        }
    return f;
}

HistoryWindows history_windows(int t, int t_f, int n_d, int n_w, int t_d, int t_w) {
    HistoryWindows h;
    for (int d = n_d; d >= 1; --d) h.starts.push_back(t + 1 - d * t_d);
    for (int w = n_w; w >= 1; --w) h.starts.push_back(t + 1 - w * t_w);
    (void)t_f;
    return h;
}

std::vector<int> eligible_origins(int t_total, int t_p, int t_f, int n_d, int n_w, int t_d,
                                  int t_w) {
    int lo = t_p - 1;
    if (n_d > 0) lo = std::max(lo, n_d * t_d - 1);
    if (n_w > 0) lo = std::max(lo, n_w * t_w - 1);
    std::vector<int> out;
    for (int t = lo; t + t_f < t_total; ++t) out.push_back(t);
    return out;
}

FeatureTensor corrupt(const FeatureTensor& f, const CorruptionSpec& spec, int t_end) {
    if (spec.percent < 0.0 || spec.percent > 100.0)
        throw std::runtime_error("corruption percent must be in [0, 100]");
    FeatureTensor out = f;
    if (spec.percent == 0.0) return out;
    if (t_end < 0 || t_end > f.t) t_end = f.t;

    std::vector<int64_t> cells;
    for (int tt = 0; tt < t_end; ++tt)
        for (int i = 0; i < f.n; ++i)
            if (f.is_obs(tt, i)) cells.push_back(f.idx(tt, i));
    auto n_hit = static_cast<int64_t>(std::floor(spec.percent / 100.0 * cells.size()));

    RngStream pick(hash_combine(spec.seed, 0x636f7272));
    for (int64_t k = 0; k < n_hit; ++k) {
        int64_t j = k + static_cast<int64_t>(pick.below(static_cast<uint64_t>(cells.size() - k)));
        std::swap(cells[k], cells[j]);
    }

    // Pre-corruption per-(link, level) mean speeds for flip resampling.
    std::vector<double> lvl_sum, link_sum;
    std::vector<int64_t> lvl_cnt, link_cnt;
    double all_sum = 0.0;
    int64_t all_cnt = 0;
    if (spec.mode == CorruptMode::Flip) {
        lvl_sum.assign(static_cast<size_t>(f.n) * 3, 0.0);
        lvl_cnt.assign(static_cast<size_t>(f.n) * 3, 0);
        link_sum.assign(f.n, 0.0);
        link_cnt.assign(f.n, 0);
        for (int tt = 0; tt < f.t; ++tt)
            for (int i = 0; i < f.n; ++i)
                if (f.is_obs(tt, i)) {
                    double s = f.speed[f.idx(tt, i)];
                    int l = f.level[f.idx(tt, i)];
                    lvl_sum[static_cast<size_t>(i) * 3 + l] += s;
                    lvl_cnt[static_cast<size_t>(i) * 3 + l]++;
                    link_sum[i] += s;
                    link_cnt[i]++;
                    all_sum += s;
                    all_cnt++;
                }
    }

    for (int64_t k = 0; k < n_hit; ++k) {
        int64_t c = cells[k];
        if (spec.mode == CorruptMode::Mask) {
            out.observed[c] = 0;
            out.level[c] = -1;
            out.speed[c] = 0.0;
        } else {
            int link = static_cast<int>(c % f.n);
            uint64_t key = hash_combine(hash_combine(spec.seed, 0x666c6970), static_cast<uint64_t>(c));
            int old = f.level[c];
            int nl = (old + 1 + static_cast<int>(rng_u64(key, 0) % 2)) % 3;
            out.level[c] = static_cast<int8_t>(nl);
            size_t b = static_cast<size_t>(link) * 3 + nl;
            if (lvl_cnt[b] > 0)
                out.speed[c] = lvl_sum[b] / lvl_cnt[b];
            else if (link_cnt[link] > 0)
                out.speed[c] = link_sum[link] / link_cnt[link];
            else if (all_cnt > 0)
                out.speed[c] = all_sum / all_cnt;
        }
    }
    return out;
}

SplitOrigins split_origins(const std::vector<int>& origins, double train_ratio,
                           double val_ratio) {
    if (train_ratio < 0 || val_ratio < 0 || train_ratio + val_ratio > 1.0 + 1e-12)
        throw std::runtime_error("split ratios must be nonnegative and sum to at most 1");
    auto n = static_cast<int64_t>(origins.size());
    auto n_train = static_cast<int64_t>(std::floor(train_ratio * n));
    auto n_val = static_cast<int64_t>(std::floor(val_ratio * n));
    SplitOrigins s;
    s.train.assign(origins.begin(), origins.begin() + n_train);
    s.val.assign(origins.begin() + n_train, origins.begin() + n_train + n_val);
    s.test.assign(origins.begin() + n_train + n_val, origins.end());
    return s;
}

double level_ratio(const FeatureTensor& f, int level) {
    int64_t hit = 0, obs = 0;
    for (size_t c = 0; c < f.observed.size(); ++c)
        if (f.observed[c]) {
            obs++;
            if (f.level[c] == level) hit++;
        }
    return obs == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(obs);
}

void save_features(const FeatureTensor& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open features file for writing: " + path);
    out << "t,link_id,speed,level,observed\n";
    char buf[64];
    for (int tt = 0; tt < f.t; ++tt)
        for (int i = 0; i < f.n; ++i) {
            int64_t c = f.idx(tt, i);
            std::snprintf(buf, sizeof buf, "%.17g", f.speed[c]);
            out << tt << ',' << i << ',' << buf << ',' << static_cast<int>(f.level[c]) << ','
                << static_cast<int>(f.observed[c]) << '\n';
        }
    if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureTensor load_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open features file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "t,link_id,speed,level,observed")
        throw std::runtime_error("bad features header in " + path);
    struct Row {
        int t, link, level, obs;
        double speed;
    };
    std::vector<Row> rows;
    int max_t = -1, max_n = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Row r;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%d,%d", &r.t, &r.link, &r.speed, &r.level,
                        &r.obs) != 5)
            throw std::runtime_error("bad features row: " + line);
        max_t = std::max(max_t, r.t);
        max_n = std::max(max_n, r.link);
        rows.push_back(r);
    }
    if (rows.empty()) throw std::runtime_error("features file has no rows: " + path);
    FeatureTensor f = FeatureTensor::empty(max_t + 1, max_n + 1);
    if (static_cast<int64_t>(rows.size()) != static_cast<int64_t>(f.t) * f.n)
        throw std::runtime_error("features file is not a dense (t, link) grid: " + path);
    for (const auto& r : rows) {
        int64_t c = f.idx(r.t, r.link);
        f.speed[c] = r.speed;
        f.level[c] = static_cast<int8_t>(r.level);
        f.observed[c] = static_cast<uint8_t>(r.obs);
    }
    return f;
}

}  // namespace cpmoe::data
