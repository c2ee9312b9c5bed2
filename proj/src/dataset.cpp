#include "cpmoe/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace cpmoe::data {

namespace {

// Statistics window: everything a training instance may read as input.
int train_input_end(const Dataset& ds) {
    if (ds.splits.train.empty()) return ds.clean.t;
    return ds.splits.train.back() + 1;
}

NormStats compute_stats(const Dataset& ds) {
    const FeatureTensor& f = ds.train_view;
    int t_end = train_input_end(ds);
    int n = f.n;
    NormStats st;
    double sum = 0.0, sq = 0.0;
    int64_t cnt = 0;
    std::vector<double> lsum(n, 0.0);
    std::vector<int64_t> lcnt(n, 0);
    std::vector<std::array<int64_t, 3>> votes(n, {0, 0, 0});
    for (int t = 0; t < t_end; ++t)
        for (int i = 0; i < n; ++i)
            if (f.is_obs(t, i)) {
                double s = f.speed[f.idx(t, i)];
                sum += s;
                sq += s * s;
                cnt++;
                lsum[i] += s;
                lcnt[i]++;
                votes[i][f.level[f.idx(t, i)]]++;
            }
    if (cnt == 0) throw std::runtime_error("no observed cells in the training period");
    st.speed_mean = sum / cnt;
    st.speed_std = std::sqrt(std::max(sq / cnt - st.speed_mean * st.speed_mean, 0.0));
    if (st.speed_std < 1e-8) st.speed_std = 1e-8;
    st.link_speed_mean.resize(n);
    st.link_level_mode.resize(n);
    for (int i = 0; i < n; ++i) {
        st.link_speed_mean[i] = lcnt[i] > 0 ? lsum[i] / lcnt[i] : st.speed_mean;
        int best = 0;
        for (int l = 1; l < 3; ++l)
            if (votes[i][l] >= votes[i][best]) best = l;
        st.link_level_mode[i] = lcnt[i] > 0 ? static_cast<int8_t>(best) : int8_t{0};
    }

    int ds_dim = ds.net.attr_dim();
    st.statics = Tensor({n, std::max(ds_dim, 1)});
    for (int c = 0; c < ds_dim; ++c) {
        double m = 0.0;
        for (int i = 0; i < n; ++i) m += ds.net.links[i].attrs[c];
        m /= n;
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            double d = ds.net.links[i].attrs[c] - m;
            v += d * d;
        }
        double sd = std::max(std::sqrt(v / n), 1e-8);
        for (int i = 0; i < n; ++i) st.statics.at2(i, c) = (ds.net.links[i].attrs[c] - m) / sd;
    }
    return st;
}

std::vector<double> fill_view(const FeatureTensor& f, const NormStats& st) {
    int n = f.n;
    std::vector<double> out(static_cast<size_t>(f.t) * n * 2);
    std::vector<double> last_speed(n);
    std::vector<double> last_level(n);
    for (int i = 0; i < n; ++i) {
        last_speed[i] = st.link_speed_mean[i];
        last_level[i] = st.link_level_mode[i];
    }
    for (int t = 0; t < f.t; ++t)
        for (int i = 0; i < n; ++i) {
            int64_t c = f.idx(t, i);
            if (f.observed[c]) {
                last_speed[i] = f.speed[c];
                last_level[i] = f.level[c];
            }
            out[c * 2 + 0] = (last_speed[i] - st.speed_mean) / st.speed_std;
            out[c * 2 + 1] = last_level[i];
        }
    return out;
}

void refresh_derived(Dataset& ds) {
    ds.stats = compute_stats(ds);
    ds.filled_train = fill_view(ds.train_view, ds.stats);
    ds.filled_eval = fill_view(ds.clean, ds.stats);
}

}  // namespace

Dataset build_dataset(TrafficNetwork net, FeatureTensor clean, const DatasetConfig& cfg) {
    validate_network(net);
    if (clean.n != net.n_links())
        throw std::runtime_error("feature tensor and network disagree on link count");
    if (cfg.t_p < 1 || cfg.t_f < 1 || cfg.n_d < 0 || cfg.n_w < 0 || cfg.t_d < 1 || cfg.t_w < 1)
        throw std::runtime_error("invalid dataset window configuration");
    if ((cfg.n_d > 0 && cfg.t_d < cfg.t_f) || (cfg.n_w > 0 && cfg.t_w < cfg.t_f))
        throw std::runtime_error("day/week periods shorter than the horizon would let history "
                                 "windows overlap the label window");
    Dataset ds;
    ds.net = std::move(net);
    ds.clean = std::move(clean);
    ds.train_view = ds.clean;
    ds.cfg = cfg;
    ds.origins = eligible_origins(ds.clean.t, cfg.t_p, cfg.t_f, cfg.n_d, cfg.n_w, cfg.t_d,
                                  cfg.t_w);
    if (ds.origins.empty()) throw std::runtime_error("series too short: no eligible origins");
    ds.splits = split_origins(ds.origins, cfg.train_ratio, cfg.val_ratio);
    refresh_derived(ds);
    return ds;
}

void apply_corruption(Dataset& ds, const CorruptionSpec& spec) {
    int t_end = train_input_end(ds);
    ds.train_view = corrupt(ds.clean, spec, t_end);
    refresh_derived(ds);
}

Batch make_batch(const Dataset& ds, const std::vector<int>& origins, bool train_inputs) {
    const auto& filled = train_inputs ? ds.filled_train : ds.filled_eval;
    const auto& cfg = ds.cfg;
    int n = ds.n_links(), b = static_cast<int>(origins.size());
    int n_slices = ds.n_slices();
    Batch out;
    out.b = b;
    out.t_p = cfg.t_p;
    out.t_f = cfg.t_f;
    out.n = n;
    out.n_slices = n_slices;
    out.origin = origins;
    out.recent = Tensor({b * cfg.t_p * n, 2});
    out.hist = n_slices > 0 ? Tensor({b * n_slices * cfg.t_f * n, 2}) : Tensor();
    out.labels.assign(static_cast<size_t>(b) * cfg.t_f * n, -1);
    out.tod.resize(b);
    out.dow.resize(b);
    out.hist_tod.assign(static_cast<size_t>(b) * n_slices * cfg.t_f, 0);
    out.hist_dow.assign(static_cast<size_t>(b) * n_slices * cfg.t_f, 0);

    for (int k = 0; k < b; ++k) {
        int t0 = origins[k];
        out.tod[k] = t0 % cfg.t_d;
        out.dow[k] = (t0 / cfg.t_d) % 7;
        for (int s = 0; s < cfg.t_p; ++s) {
            int tau = t0 - cfg.t_p + 1 + s;
            const double* src = &filled[static_cast<size_t>(ds.clean.idx(tau, 0)) * 2];
            double* dst = &out.recent.data[(static_cast<size_t>(k) * cfg.t_p + s) * n * 2];
            std::copy(src, src + static_cast<size_t>(n) * 2, dst);
        }
        HistoryWindows hw = history_windows(t0, cfg.t_f, cfg.n_d, cfg.n_w, cfg.t_d, cfg.t_w);
        for (int q = 0; q < n_slices; ++q)
            for (int s = 0; s < cfg.t_f; ++s) {
                int tau = hw.starts[q] + s;
                size_t row = (static_cast<size_t>(k) * n_slices + q) * cfg.t_f + s;
                out.hist_tod[row] = tau % cfg.t_d;
                out.hist_dow[row] = (tau / cfg.t_d) % 7;
                const double* src = &filled[static_cast<size_t>(ds.clean.idx(tau, 0)) * 2];
                std::copy(src, src + static_cast<size_t>(n) * 2, &out.hist.data[row * n * 2]);
            }
        for (int s = 0; s < cfg.t_f; ++s) {
            int tau = t0 + 1 + s;
            for (int i = 0; i < n; ++i) {
                int64_t c = ds.clean.idx(tau, i);
                if (ds.clean.observed[c])
                    out.labels[(static_cast<size_t>(k) * cfg.t_f + s) * n + i] =
                        ds.clean.level[c];
            }
        }
    }
    return out;
}

}  // namespace cpmoe::data
