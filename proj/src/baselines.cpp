#include "cpmoe/baselines.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace cpmoe::train {

std::vector<int8_t> predict_current_time(const data::Batch& batch) {
    std::vector<int8_t> out(batch.labels.size());
    for (int b = 0; b < batch.b; ++b)
        for (int i = 0; i < batch.n; ++i) {
            double lvl = batch.recent.at2(
                (static_cast<int64_t>(b) * batch.t_p + batch.t_p - 1) * batch.n + i, 1);
            auto v = static_cast<int8_t>(std::lround(lvl));
            for (int s = 0; s < batch.t_f; ++s)
                out[(static_cast<size_t>(b) * batch.t_f + s) * batch.n + i] = v;
        }
    return out;
}

HaTable build_ha_table(const data::Dataset& ds, int t_d) {
    if (ds.splits.train.empty())
        throw std::runtime_error("historical average needs a training split");
    HaTable ha;
    ha.t_d = t_d;
    ha.n = ds.n_links();
    // Same boundary as the normalization stats: the train view up to and
    // including the last training origin.
    int t_end = ds.splits.train.back() + 1;
    const data::FeatureTensor& f = ds.train_view;
    std::vector<std::array<int32_t, 3>> votes(static_cast<size_t>(t_d) * ha.n, {0, 0, 0});
    for (int t = 0; t < t_end; ++t) {
        size_t slot_base = static_cast<size_t>(t % t_d) * ha.n;
        for (int i = 0; i < ha.n; ++i)
            if (f.is_obs(t, i)) votes[slot_base + i][f.level[f.idx(t, i)]]++;
    }
    ha.mode.assign(votes.size(), 0);
    for (size_t c = 0; c < votes.size(); ++c) {
        const auto& v = votes[c];
        if (v[0] + v[1] + v[2] == 0) continue;  // unseen slot stays fast
        int best = 0;
        for (int l = 1; l < 3; ++l)
            if (v[l] >= v[best]) best = l;  // ties toward more congested
        ha.mode[c] = static_cast<int8_t>(best);
    }
    return ha;
}

std::vector<int8_t> predict_historical_average(const HaTable& ha, const data::Batch& batch) {
    if (batch.n != ha.n) throw std::runtime_error("historical average table link mismatch");
    std::vector<int8_t> out(batch.labels.size());
    for (int b = 0; b < batch.b; ++b)
        for (int s = 0; s < batch.t_f; ++s) {
            size_t slot_base =
                static_cast<size_t>((batch.origin[b] + 1 + s) % ha.t_d) * ha.n;
            for (int i = 0; i < batch.n; ++i)
                out[(static_cast<size_t>(b) * batch.t_f + s) * batch.n + i] =
                    ha.mode[slot_base + i];
        }
    return out;
}

}  // namespace cpmoe::train
