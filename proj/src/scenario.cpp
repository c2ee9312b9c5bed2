#include "cpmoe/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "cpmoe/kv.hpp"
#include "cpmoe/rng.hpp"

namespace cpmoe::data {

namespace {

// Draw-purpose salts; every random number is keyed by (seed, purpose, cell).
enum : uint64_t {
    kFreeFlow = 1,
    kProne = 2,
    kPeak = 3,
    kEpStart = 4,
    kEpLen = 5,
    kEpSev = 6,
    kProp = 7,
    kNoise = 8,
    kMiss = 9,
    kEdgeR = 10,
    kDag = 11,
    kAttr = 12,
    kCoord = 13,
};

double u01(uint64_t seed, uint64_t purpose, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t k = hash_combine(hash_combine(hash_combine(hash_combine(seed, purpose), a), b), c);
    return rng_uniform(k, 0);
}

double gauss(uint64_t seed, uint64_t purpose, uint64_t a, uint64_t b) {
    uint64_t k = hash_combine(hash_combine(hash_combine(seed, purpose), a), b);
    return rng_normal(k, 0);
}

}  // namespace

void validate_scenario_config(const ScenarioConfig& cfg) {
    std::vector<std::string> errs;
    auto prob = [&](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) errs.push_back(std::string(name) + " must be in [0, 1]");
    };
    if (cfg.n_links < 1) errs.push_back("n_links must be at least 1");
    if (cfg.topology != "chain" && cfg.topology != "grid" && cfg.topology != "random-dag")
        errs.push_back("topology must be chain, grid, or random-dag");
    if (cfg.days < 2) errs.push_back("days must be at least 2");
    auto window = [&](int s, int e, const char* name) {
        if (s < 0 || e > 288 || s >= e)
            errs.push_back(std::string(name) + " window must satisfy 0 <= start < end <= 288");
    };
    window(cfg.peak_morning_start, cfg.peak_morning_end, "morning");
    window(cfg.peak_evening_start, cfg.peak_evening_end, "evening");
    prob(cfg.peak_frac, "peak_frac");
    prob(cfg.peak_prob, "peak_prob");
    prob(cfg.base_prob, "base_prob");
    prob(cfg.severe_frac, "severe_frac");
    prob(cfg.prop_strength, "prop_strength");
    prob(cfg.missing_prob, "missing_prob");
    if (cfg.ramp < 0) errs.push_back("ramp must be nonnegative");
    if (cfg.persistence < 1) errs.push_back("persistence must be at least 1");
    if (cfg.prop_delay < 1) errs.push_back("prop_delay must be at least 1");
    if (cfg.noise_level < 0) errs.push_back("noise_level must be nonnegative");
    if (!(cfg.free_flow_min > 0) || cfg.free_flow_max < cfg.free_flow_min)
        errs.push_back("free-flow speed range must satisfy 0 < min <= max");
    if (!errs.empty()) {
        std::string msg = "invalid scenario config:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }
}

namespace {

ScenarioConfig read_scenario_config(KvReader& r) {
    ScenarioConfig c;
    r.get("n_links", c.n_links);
    r.get("topology", c.topology);
    r.get("days", c.days);
    r.get("seed", c.seed);
    r.get("peak_morning_start", c.peak_morning_start);
    r.get("peak_morning_end", c.peak_morning_end);
    r.get("peak_evening_start", c.peak_evening_start);
    r.get("peak_evening_end", c.peak_evening_end);
    r.get("peak_frac", c.peak_frac);
    r.get("peak_prob", c.peak_prob);
    r.get("ramp", c.ramp);
    r.get("base_prob", c.base_prob);
    r.get("persistence", c.persistence);
    r.get("severe_frac", c.severe_frac);
    r.get("prop_delay", c.prop_delay);
    r.get("prop_strength", c.prop_strength);
    r.get("noise_level", c.noise_level);
    r.get("missing_prob", c.missing_prob);
    r.get("free_flow_min", c.free_flow_min);
    r.get("free_flow_max", c.free_flow_max);
    r.finish("scenario config");
    validate_scenario_config(c);
    return c;
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& text) {
    KvReader r = KvReader::from_text(text);
    return read_scenario_config(r);
}

ScenarioConfig load_scenario_config(const std::string& path) {
    KvReader r = KvReader::from_file(path);
    return read_scenario_config(r);
}

namespace {

TrafficNetwork build_topology(const ScenarioConfig& cfg, const std::vector<double>& free_flow,
                              const std::vector<uint8_t>& prone) {
    TrafficNetwork net;
    int n = cfg.n_links;
    uint64_t seed = cfg.seed;
    std::vector<std::pair<int, int>> edge_pairs;
    std::vector<double> lon(n), lat(n);
    if (cfg.topology == "chain") {
        for (int i = 0; i + 1 < n; ++i) edge_pairs.emplace_back(i, i + 1);
        for (int i = 0; i < n; ++i) lon[i] = i, lat[i] = 0.0;
    } else if (cfg.topology == "grid") {
        int rows = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))));
        int cols = (n + rows - 1) / rows;
        for (int i = 0; i < n; ++i) {
            int r = i / cols, c = i % cols;
            lon[i] = c, lat[i] = r;
            if (c + 1 < cols && i + 1 < n) edge_pairs.emplace_back(i, i + 1);
            if (i + cols < n) edge_pairs.emplace_back(i, i + cols);
        }
    } else {  // random-dag
        for (int i = 0; i < n; ++i) {
            lon[i] = u01(seed, kCoord, i, 0) * 10.0;
            lat[i] = u01(seed, kCoord, i, 1) * 10.0;
        }
        std::set<std::pair<int, int>> seen;
        for (int i = 0; i + 1 < n; ++i) {
            int fanout = 1 + (u01(seed, kDag, i, 0) < 0.35 ? 1 : 0);
            int span = std::min(4, n - 1 - i);
            for (int k = 0; k < fanout; ++k) {
                int j = i + 1 + static_cast<int>(u01(seed, kDag, i, k + 1) * span);
                j = std::min(j, n - 1);
                if (seen.insert({i, j}).second) edge_pairs.emplace_back(i, j);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        LinkInfo l;
        l.id = i;
        double length = 0.3 + 1.2 * u01(seed, kAttr, i, 0);
        double lanes = 1.0 + std::floor(3.0 * u01(seed, kAttr, i, 1));
        l.attrs = {length, lanes, free_flow[i], static_cast<double>(prone[i])};
        l.lon = lon[i];
        l.lat = lat[i];
        net.links.push_back(std::move(l));
    }
    for (auto [a, b] : edge_pairs) {
        DirectedEdge e;
        e.from = a;
        e.to = b;
        e.r_km = 0.2 + 1.8 * u01(seed, kEdgeR, a, b);
        net.edges.push_back(e);
    }
    validate_network(net);
    return net;
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
    validate_scenario_config(cfg);
    int n = cfg.n_links;
    int t_total = cfg.days * 288;
    uint64_t seed = cfg.seed;

    std::vector<double> free_flow(n);
    for (int i = 0; i < n; ++i)
        free_flow[i] = cfg.free_flow_min +
                       (cfg.free_flow_max - cfg.free_flow_min) * u01(seed, kFreeFlow, i);

    // Exactly round(peak_frac * n) prone links, picked by a seeded shuffle so
    // the congested share does not inherit binomial noise across seeds.
    std::vector<uint8_t> prone(n, 0);
    int n_prone = std::min(n, static_cast<int>(std::floor(cfg.peak_frac * n + 0.5)));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    RngStream prone_rng(hash_combine(seed, kProne));
    for (int k = 0; k < n_prone; ++k) {
        int j = k + static_cast<int>(prone_rng.below(static_cast<uint64_t>(n - k)));
        std::swap(order[k], order[j]);
        prone[order[k]] = 1;
    }

    Scenario sc;
    sc.net = build_topology(cfg, free_flow, prone);
    auto down = sc.net.downstream();
    sc.features = FeatureTensor::empty(t_total, n);
    auto& f = sc.features;

    const int win_start[2] = {cfg.peak_morning_start, cfg.peak_evening_start};
    const int win_end[2] = {cfg.peak_morning_end, cfg.peak_evening_end};
    const double speed_factor[3] = {1.0, 0.55, 0.25};

    std::vector<int> ep_left(n, 0), rec_left(n, 0);
    std::vector<int8_t> ep_lvl(n, 0);
    std::vector<int8_t> lev(static_cast<size_t>(t_total) * n, 0);

    for (int t = 0; t < t_total; ++t) {
        int day = t / 288, tod = t % 288;
        for (int i = 0; i < n; ++i) {
            int lvl = 0;
            if (ep_left[i] > 0) {
                lvl = ep_lvl[i];
                if (--ep_left[i] == 0 && ep_lvl[i] == 2) rec_left[i] = 1;
            } else if (rec_left[i] > 0) {
                lvl = 1;
                rec_left[i]--;
            }
            if (prone[i])
                for (int w = 0; w < 2; ++w) {
                    bool active = u01(seed, kPeak, day, w, i) < cfg.peak_prob;
                    if (!active) continue;
                    if (tod >= win_start[w] && tod < win_end[w])
                        lvl = 2;
                    else if (tod >= win_start[w] - cfg.ramp && tod < win_end[w] + cfg.ramp)
                        lvl = std::max(lvl, 1);
                }
            if (ep_left[i] == 0 && lvl < 2 && u01(seed, kEpStart, t, i) < cfg.base_prob) {
                double u = u01(seed, kEpLen, t, i);
                int len = 1;
                if (cfg.persistence > 1) {
                    double p = 1.0 / cfg.persistence;
                    len = 1 + static_cast<int>(std::floor(std::log(1.0 - u) / std::log(1.0 - p)));
                    len = std::min(len, 10 * cfg.persistence);
                }
                int sev = u01(seed, kEpSev, t, i) < cfg.severe_frac ? 2 : 1;
                ep_lvl[i] = static_cast<int8_t>(sev);
                ep_left[i] = len;
                lvl = std::max(lvl, sev);
                if (--ep_left[i] == 0 && sev == 2) rec_left[i] = 1;
            }
            if (lvl < 2 && t >= cfg.prop_delay)
                for (int j : down[i])
                    if (lev[static_cast<size_t>(t - cfg.prop_delay) * n + j] == 2 &&
                        u01(seed, kProp, t, i, j) < cfg.prop_strength) {
                        lvl = 2;
                        break;
                    }
            lev[static_cast<size_t>(t) * n + i] = static_cast<int8_t>(lvl);
        }
    }

    for (int t = 0; t < t_total; ++t)
        for (int i = 0; i < n; ++i) {
            int64_t c = f.idx(t, i);
            if (u01(seed, kMiss, t, i) < cfg.missing_prob) continue;  // stays masked
            int lvl = lev[c];
            double sp = free_flow[i] * speed_factor[lvl] *
                        (1.0 + cfg.noise_level * gauss(seed, kNoise, t, i));
            f.speed[c] = std::max(sp, 1.0);
            f.level[c] = static_cast<int8_t>(lvl);
            f.observed[c] = 1;
        }
    return sc;
}

}  // namespace cpmoe::data
