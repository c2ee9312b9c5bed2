#pragma once

#include <cstdint>
#include <string>

#include "cpmoe/features.hpp"
#include "cpmoe/network.hpp"

namespace cpmoe::data {

// Synthetic-scenario knobs. Defaults produce a two-week, 30-link network
// whose congested share of observed cells lands near 18%.
struct ScenarioConfig {
    int n_links = 30;
    std::string topology = "chain";  // chain | grid | random-dag
    int days = 14;
    uint64_t seed = 1;

    // Recurring rush hours: prone links congest for a whole window when the
    // per-(day, window, link) draw fires, with level-1 shoulders around it.
    int peak_morning_start = 84, peak_morning_end = 108;  // 07:00-09:00
    int peak_evening_start = 204, peak_evening_end = 228;  // 17:00-19:00
    double peak_frac = 0.4;
    double peak_prob = 0.9;
    int ramp = 3;

    // Spontaneous episodes: geometric length around `persistence`, severe
    // (level 2) with probability severe_frac, one recovery step at level 1.
    double base_prob = 0.008;
    int persistence = 12;
    double severe_frac = 0.7;

    // Congestion observed downstream at t recurs upstream at t + prop_delay
    // with probability prop_strength.
    int prop_delay = 2;
    double prop_strength = 0.5;

    double noise_level = 0.05;  // relative Gaussian speed noise
    double missing_prob = 0.01;
    double free_flow_min = 40.0, free_flow_max = 80.0;
};

void validate_scenario_config(const ScenarioConfig& cfg);
ScenarioConfig parse_scenario_config(const std::string& text);
ScenarioConfig load_scenario_config(const std::string& path);

struct Scenario {
    TrafficNetwork net;
    FeatureTensor features;
};

// Bitwise deterministic in cfg (every draw is a counter-hash of cfg.seed and
// the cell it feeds). Time steps are generated in order so congestion can
// propagate from a link's downstream neighbors with the configured delay.
Scenario generate_scenario(const ScenarioConfig& cfg);

}  // namespace cpmoe::data
