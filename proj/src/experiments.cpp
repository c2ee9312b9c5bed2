#include "cpmoe/experiments.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cpmoe::train {

RunSummary run_once(const std::string& tag, const data::TrafficNetwork& net,
                    const data::FeatureTensor& clean, const data::DatasetConfig& dcfg,
                    const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                    const data::CorruptionSpec* corrupt) {
    data::Dataset ds = data::build_dataset(net, clean, dcfg);
    if (corrupt) data::apply_corruption(ds, *corrupt);
    model::GraphIndex gi = model::build_graph_index(ds.net, ds.stats.statics, mcfg.khop);

    nn::ParameterStore ps;
    model::init_params(ps, mcfg, gi, tcfg.seed);
    TrainResult tr = train_model(ps, mcfg, gi, ds, tcfg);

    RunSummary s;
    s.tag = tag;
    s.test = evaluate_split(ps, mcfg, gi, ds, stride_origins(ds.splits.test, tcfg.test_stride),
                            tcfg.batch_size, nullptr);
    s.best_val_cf1 = tr.best_val_cf1;
    s.best_epoch = tr.best_epoch;
    s.steps = tr.steps;
    return s;
}

std::vector<RunSummary> robustness_suite(const data::TrafficNetwork& net,
                                         const data::FeatureTensor& clean,
                                         const data::DatasetConfig& dcfg,
                                         const model::ModelConfig& mcfg,
                                         const TrainConfig& tcfg,
                                         const std::vector<data::CorruptMode>& modes,
                                         const std::vector<double>& percents,
                                         const std::vector<uint64_t>& seeds) {
    if (modes.empty() || percents.empty() || seeds.empty())
        throw std::runtime_error("robustness_suite: empty grid");
    std::vector<RunSummary> rows;
    for (data::CorruptMode mode : modes)
        for (double p : percents)
            for (uint64_t seed : seeds) {
                data::CorruptionSpec spec;
                spec.mode = mode;
                spec.percent = p;
                spec.seed = seed;
                TrainConfig cell = tcfg;
                cell.seed = seed;
                std::string tag = std::string(mode == data::CorruptMode::Mask ? "mask" : "flip") +
                                  ":" + std::to_string(static_cast<int>(p)) + ":seed" +
                                  std::to_string(seed);
                rows.push_back(run_once(tag, net, clean, dcfg, mcfg, cell, &spec));
            }
    return rows;
}

std::vector<RunSummary> ablation_suite(const data::TrafficNetwork& net,
                                       const data::FeatureTensor& clean,
                                       const data::DatasetConfig& dcfg,
                                       const model::ModelConfig& base_mcfg,
                                       const TrainConfig& tcfg,
                                       const std::vector<std::string>& variants,
                                       const std::vector<uint64_t>& seeds) {
    if (variants.empty() || seeds.empty())
        throw std::runtime_error("ablation_suite: empty grid");
    std::vector<RunSummary> rows;
    for (const std::string& variant : variants)
        for (uint64_t seed : seeds) {
            model::ModelConfig mcfg = base_mcfg;
            mcfg.variant = variant;
            TrainConfig cell = tcfg;
            cell.seed = seed;
            rows.push_back(run_once(variant + ":seed" + std::to_string(seed), net, clean, dcfg,
                                    mcfg, cell, nullptr));
        }
    return rows;
}

void save_summaries(const std::vector<RunSummary>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write summary table: " + path);
    out << "tag,accuracy,recall,precision,c_f1,w_f1,best_val_cf1,best_epoch,steps\n";
    char buf[320];
    for (const RunSummary& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d", r.tag.c_str(),
                      r.test.accuracy, r.test.recall, r.test.precision, r.test.c_f1, r.test.w_f1,
                      r.best_val_cf1, r.best_epoch, r.steps);
        out << buf << "\n";
    }
    if (!out.good()) throw std::runtime_error("failed writing summary table: " + path);
}

}  // namespace cpmoe::train
