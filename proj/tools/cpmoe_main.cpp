#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpmoe/baselines.hpp"
#include "cpmoe/config.hpp"
#include "cpmoe/dataset.hpp"
#include "cpmoe/gradcheck.hpp"
#include "cpmoe/kernels.hpp"
#include "cpmoe/losses.hpp"
#include "cpmoe/metrics.hpp"
#include "cpmoe/model.hpp"
#include "cpmoe/rng.hpp"
#include "cpmoe/scenario.hpp"
#include "cpmoe/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cpmoe;

namespace {

// Validation problems (bad flags, malformed configs, shape mismatches) exit
// with 1; unexpected runtime failures with 2; a failed gradient check with 3.
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitGradcheck = 3;

struct Paths {
    static std::string network(const std::string& dir) { return dir + "/network.json"; }
    static std::string features(const std::string& dir) { return dir + "/features.csv"; }
};

data::Dataset load_dataset(const std::string& dir, const data::DatasetConfig& dcfg) {
    auto net = data::load_network(Paths::network(dir));
    auto feat = data::load_features(Paths::features(dir));
    return data::build_dataset(std::move(net), std::move(feat), dcfg);
}

data::CorruptionSpec parse_corrupt(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3)
        throw std::invalid_argument("--corrupt expects mode:percent:seed, got '" + text + "'");
    data::CorruptionSpec spec;
    if (parts[0] == "mask")
        spec.mode = data::CorruptMode::Mask;
    else if (parts[0] == "flip")
        spec.mode = data::CorruptMode::Flip;
    else
        throw std::invalid_argument("--corrupt mode must be mask or flip, got '" + parts[0] + "'");
    try {
        spec.percent = std::stod(parts[1]);
        spec.seed = std::stoull(parts[2]);
    } catch (const std::exception&) {
        throw std::invalid_argument("--corrupt expects numeric percent and seed, got '" + text + "'");
    }
    if (spec.percent < 0.0 || spec.percent > 100.0)
        throw std::invalid_argument("--corrupt percent must lie in [0, 100]");
    return spec;
}

std::ofstream open_out(const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

void write_pred_rows(const std::vector<train::PredRow>& rows, const std::string& path) {
    auto f = open_out(path);
    f << "t,link_id,step,label,pred,logit0,logit1,logit2,w_per,w_tr,w_m\n";
    char buf[320];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.t, r.link, r.step, static_cast<int>(r.label), static_cast<int>(r.pred),
                      r.logit[0], r.logit[1], r.logit[2], r.w_per, r.w_tr, r.w_m);
        f << buf;
    }
}

void write_metrics_csv(const train::MetricReport& m, const std::string& split,
                       const std::string& path) {
    auto f = open_out(path);
    f << "split,accuracy,recall,precision,c_f1,w_f1,f1_fast,f1_slow,f1_congested,evaluated\n";
    char buf[320];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%lld\n",
                  split.c_str(), m.accuracy, m.recall, m.precision, m.c_f1, m.w_f1, m.f1[0],
                  m.f1[1], m.f1[2], static_cast<long long>(m.evaluated));
    f << buf;
}

void print_headline(const train::MetricReport& m) {
    std::printf("accuracy   %.6f\n", m.accuracy);
    std::printf("recall     %.6f\n", m.recall);
    std::printf("precision  %.6f\n", m.precision);
    std::printf("c_f1       %.6f\n", m.c_f1);
    std::printf("w_f1       %.6f\n", m.w_f1);
}

const std::vector<int>& split_of(const data::Dataset& ds, const std::string& name) {
    if (name == "train") return ds.splits.train;
    if (name == "val") return ds.splits.val;
    if (name == "test") return ds.splits.test;
    throw std::invalid_argument("--split must be train, val or test, got '" + name + "'");
}

int stride_of(const train::TrainConfig& t, const std::string& split) {
    if (split == "train") return t.train_stride;
    if (split == "val") return t.val_stride;
    return t.test_stride;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    std::string scenario, out;
    uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_generate(const GenerateOpts& o) {
    data::ScenarioConfig sc = data::load_scenario_config(o.scenario);
    if (o.seed_set) sc.seed = o.seed;
    data::Scenario s = data::generate_scenario(sc);
    fs::create_directories(o.out);
    data::save_network(s.net, Paths::network(o.out));
    data::save_features(s.features, Paths::features(o.out));
    std::printf("links              %d\n", s.net.n_links());
    std::printf("days               %d\n", sc.days);
    std::printf("steps              %d\n", s.features.t);
    std::printf("observed cells     %lld\n", static_cast<long long>(s.features.observed_count()));
    std::printf("congestion ratio   %.4f\n", data::level_ratio(s.features, 2));
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string config, data, out, variant, corrupt, log;
};

int cmd_train(const TrainOpts& o) {
    RunConfig rc = load_run_config(o.config);
    if (!o.variant.empty()) {
        rc.model.variant = o.variant;
        validate_run_config(rc);
    }
    data::Dataset ds = load_dataset(o.data, rc.data);
    if (!o.corrupt.empty()) data::apply_corruption(ds, parse_corrupt(o.corrupt));

    model::GraphIndex gi = model::build_graph_index(ds.net, ds.stats.statics, rc.model.khop);
    nn::ParameterStore ps;
    model::init_params(ps, rc.model, gi, rc.training.seed);
    std::printf("variant %s, %lld parameters, %zu train / %zu val / %zu test origins\n",
                rc.model.variant.c_str(), static_cast<long long>(ps.total_elements()),
                ds.splits.train.size(), ds.splits.val.size(), ds.splits.test.size());

    train::TrainResult res = train::train_model(ps, rc.model, gi, ds, rc.training);

    json meta = {{"config", dump_run_config(rc)},
                 {"best_val_cf1", res.best_val_cf1},
                 {"best_epoch", res.best_epoch},
                 {"epochs_run", res.epochs_run},
                 {"steps", res.steps}};
    fs::path ckpt(o.out);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    nn::save_checkpoint(ps, o.out, meta.dump());
    std::string log_path = o.log.empty() ? o.out + ".log.csv" : o.log;
    train::save_train_log(res.log, log_path);

    std::printf("epochs run        %d\n", res.epochs_run);
    std::printf("optimizer steps   %d\n", res.steps);
    std::printf("best val C-F1     %.6f (epoch %d)\n", res.best_val_cf1, res.best_epoch);
    std::printf("checkpoint        %s\n", o.out.c_str());
    std::printf("training log      %s\n", log_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate / predict

bool is_baseline(const std::string& ckpt) {
    return ckpt == "ct-baseline" || ckpt == "ha-baseline";
}

RunConfig config_from_meta(const std::string& meta, const std::string& ckpt) {
    json j;
    try {
        j = json::parse(meta);
    } catch (const json::exception&) {
        throw std::invalid_argument("checkpoint " + ckpt + " carries no readable metadata");
    }
    if (!j.contains("config"))
        throw std::invalid_argument("checkpoint " + ckpt + " metadata lacks a config entry");
    return parse_run_config(j["config"].get<std::string>());
}

// The checkpoint must describe exactly the parameter set the config would
// register on this dataset; anything else means the wrong data dir or config.
void check_shapes(const nn::ParameterStore& loaded, const model::ModelConfig& mcfg,
                  const model::GraphIndex& gi, const std::string& ckpt) {
    nn::ParameterStore expect;
    model::init_params(expect, mcfg, gi, 1);
    std::vector<std::string> problems;
    for (const auto& [name, t] : expect.tensors) {
        auto it = loaded.tensors.find(name);
        if (it == loaded.tensors.end())
            problems.push_back("missing tensor " + name);
        else if (it->second.shape != t.shape)
            problems.push_back("tensor " + name + " has the wrong shape");
    }
    for (const auto& [name, t] : loaded.tensors)
        if (!expect.has(name)) problems.push_back("unexpected tensor " + name);
    if (problems.empty()) return;
    std::string msg = "checkpoint " + ckpt + " does not match the config/data:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
}

// Shared CT/HA evaluation: same batching, metric and dump path as the model.
train::MetricReport eval_baseline(const std::string& which, const data::Dataset& ds,
                                  const std::vector<int>& origins, int batch_size,
                                  std::vector<train::PredRow>* dump) {
    if (origins.empty()) throw std::invalid_argument("no origins in the requested split");
    train::HaTable ha;
    if (which == "ha-baseline") ha = train::build_ha_table(ds, ds.cfg.t_d);
    std::vector<int8_t> y, y_hat;
    for (size_t at = 0; at < origins.size(); at += static_cast<size_t>(batch_size)) {
        std::vector<int> chunk(origins.begin() + at,
                               origins.begin() + std::min(at + batch_size, origins.size()));
        data::Batch batch = data::make_batch(ds, chunk, false);
        std::vector<int8_t> pred = which == "ct-baseline"
                                       ? train::predict_current_time(batch)
                                       : train::predict_historical_average(ha, batch);
        y.insert(y.end(), batch.labels.begin(), batch.labels.end());
        y_hat.insert(y_hat.end(), pred.begin(), pred.end());
        if (dump) {
            for (int b = 0; b < batch.b; ++b)
                for (int s = 0; s < batch.t_f; ++s)
                    for (int i = 0; i < batch.n; ++i) {
                        int64_t at_lab = (static_cast<int64_t>(b) * batch.t_f + s) * batch.n + i;
                        train::PredRow pr;
                        pr.t = batch.origin[b];
                        pr.link = i;
                        pr.step = s;
                        pr.label = batch.labels[at_lab];
                        pr.pred = pred[at_lab];
                        pr.logit[pred[at_lab]] = 1.0;
                        dump->push_back(pr);
                    }
        }
    }
    return train::evaluate(y, y_hat);
}

struct EvaluateOpts {
    std::string ckpt, data, split = "test", out, preds_out, config;
};

int cmd_evaluate(const EvaluateOpts& o) {
    std::vector<train::PredRow> rows;
    std::vector<train::PredRow>* dump = o.preds_out.empty() ? nullptr : &rows;
    train::MetricReport report;

    if (is_baseline(o.ckpt)) {
        RunConfig rc;
        if (!o.config.empty()) rc = load_run_config(o.config);
        data::Dataset ds = load_dataset(o.data, rc.data);
        auto origins =
            train::stride_origins(split_of(ds, o.split), stride_of(rc.training, o.split));
        report = eval_baseline(o.ckpt, ds, origins, rc.training.batch_size, dump);
    } else {
        nn::ParameterStore ps;
        std::string meta = nn::load_checkpoint(ps, o.ckpt);
        RunConfig rc = o.config.empty() ? config_from_meta(meta, o.ckpt) : load_run_config(o.config);
        data::Dataset ds = load_dataset(o.data, rc.data);
        model::GraphIndex gi = model::build_graph_index(ds.net, ds.stats.statics, rc.model.khop);
        check_shapes(ps, rc.model, gi, o.ckpt);
        auto origins =
            train::stride_origins(split_of(ds, o.split), stride_of(rc.training, o.split));
        report = train::evaluate_split(ps, rc.model, gi, ds, origins, rc.training.batch_size, dump);
    }

    write_metrics_csv(report, o.split, o.out);
    if (dump) write_pred_rows(rows, o.preds_out);
    print_headline(report);
    return 0;
}

struct PredictOpts {
    std::string ckpt, data, out;
    int at = -1;
};

int cmd_predict(const PredictOpts& o) {
    if (is_baseline(o.ckpt))
        throw std::invalid_argument("baseline checkpoints are only valid with evaluate");
    nn::ParameterStore ps;
    std::string meta = nn::load_checkpoint(ps, o.ckpt);
    RunConfig rc = config_from_meta(meta, o.ckpt);
    data::Dataset ds = load_dataset(o.data, rc.data);
    if (!std::binary_search(ds.origins.begin(), ds.origins.end(), o.at))
        throw std::invalid_argument(
            "origin " + std::to_string(o.at) +
            " is not predictable: its recent window, history windows or horizon fall outside the series");
    model::GraphIndex gi = model::build_graph_index(ds.net, ds.stats.statics, rc.model.khop);
    check_shapes(ps, rc.model, gi, o.ckpt);

    std::vector<train::PredRow> rows;
    train::evaluate_split(ps, rc.model, gi, ds, {o.at}, 1, &rows);

    auto f = open_out(o.out);
    f << "link_id,step,level,logit0,logit1,logit2,w_per,w_tr,w_m\n";
    char buf[320];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.link,
                      r.step, static_cast<int>(r.pred), r.logit[0], r.logit[1], r.logit[2],
                      r.w_per, r.w_tr, r.w_m);
        f << buf;
    }
    std::printf("wrote %zu predictions (origin %d, %d links x %d steps) to %s\n", rows.size(),
                o.at, ds.n_links(), rc.data.t_f, o.out.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
    std::string preds, labels, out;
    int window = 12;
};

std::vector<train::PredRow> read_pred_rows(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty predictions file " + path);
    if (line != "t,link_id,step,label,pred,logit0,logit1,logit2,w_per,w_tr,w_m")
        throw std::invalid_argument("unrecognized predictions header in " + path);
    std::vector<train::PredRow> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        train::PredRow r;
        int label = 0, pred = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%d,%lg,%lg,%lg,%lg,%lg,%lg", &r.t, &r.link,
                        &r.step, &label, &pred, &r.logit[0], &r.logit[1], &r.logit[2], &r.w_per,
                        &r.w_tr, &r.w_m) != 11)
            throw std::invalid_argument("bad predictions row at " + path + ":" +
                                        std::to_string(lineno));
        r.label = static_cast<int8_t>(label);
        r.pred = static_cast<int8_t>(pred);
        rows.push_back(r);
    }
    return rows;
}

void write_histogram(const std::vector<train::PredRow>& rows, const std::string& path) {
    constexpr int kBins = 20;
    int64_t counts[3][kBins] = {};
    auto bin_of = [](double w) {
        int b = static_cast<int>(std::floor(w * kBins));
        return std::clamp(b, 0, kBins - 1);
    };
    for (const auto& r : rows) {
        ++counts[0][bin_of(r.w_per)];
        ++counts[1][bin_of(r.w_tr)];
        ++counts[2][bin_of(r.w_m)];
    }
    auto f = open_out(path);
    f << "expert,bin_lo,bin_hi,count\n";
    const char* names[3] = {"periodic", "trend", "memory"};
    char buf[160];
    for (int e = 0; e < 3; ++e)
        for (int b = 0; b < kBins; ++b) {
            std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%lld\n", names[e],
                          static_cast<double>(b) / kBins, static_cast<double>(b + 1) / kBins,
                          static_cast<long long>(counts[e][b]));
            f << buf;
        }
}

// Dominated samples with the recent clean series appended so episodes can be
// inspected without re-running the model.
void write_dominated(const std::vector<train::PredRow>& rows, const data::FeatureTensor& feat,
                     int window, const std::string& path, bool periodic) {
    json out = json::array();
    for (const auto& r : rows) {
        double w = periodic ? r.w_per : r.w_tr;
        if (!(w > 0.5)) continue;
        json levels = json::array(), speeds = json::array();
        for (int q = r.t - window + 1; q <= r.t; ++q) {
            if (q < 0 || q >= feat.t || r.link < 0 || r.link >= feat.n || !feat.is_obs(q, r.link)) {
                levels.push_back(-1);
                speeds.push_back(nullptr);
            } else {
                levels.push_back(feat.level[feat.idx(q, r.link)]);
                speeds.push_back(feat.speed[feat.idx(q, r.link)]);
            }
        }
        out.push_back({{"t", r.t},
                       {"link_id", r.link},
                       {"step", r.step},
                       {"label", static_cast<int>(r.label)},
                       {"pred", static_cast<int>(r.pred)},
                       {"w_per", r.w_per},
                       {"w_tr", r.w_tr},
                       {"w_m", r.w_m},
                       {"recent_levels", levels},
                       {"recent_speeds", speeds}});
    }
    auto f = open_out(path);
    f << out.dump(1) << "\n";
}

void write_breakdown(const std::vector<train::PredRow>& rows, const std::string& path) {
    auto f = open_out(path);
    f << "group,key,evaluated,accuracy,c_f1\n";
    auto emit = [&f](const std::string& group, const std::string& key,
                     const std::vector<int8_t>& y, const std::vector<int8_t>& y_hat) {
        auto m = train::evaluate(y, y_hat);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%s,%lld,%.6f,%.6f\n", group.c_str(), key.c_str(),
                      static_cast<long long>(m.evaluated), m.accuracy, m.c_f1);
        f << buf;
    };
    std::vector<int8_t> y, y_hat;
    std::map<int, std::pair<std::vector<int8_t>, std::vector<int8_t>>> by_step, by_link;
    for (const auto& r : rows) {
        y.push_back(r.label);
        y_hat.push_back(r.pred);
        by_step[r.step].first.push_back(r.label);
        by_step[r.step].second.push_back(r.pred);
        by_link[r.link].first.push_back(r.label);
        by_link[r.link].second.push_back(r.pred);
    }
    emit("overall", "all", y, y_hat);
    for (const auto& [s, pair] : by_step) emit("step", std::to_string(s), pair.first, pair.second);
    for (const auto& [l, pair] : by_link) emit("link", std::to_string(l), pair.first, pair.second);
}

int cmd_report(const ReportOpts& o) {
    auto rows = read_pred_rows(o.preds);
    auto feat = data::load_features(Paths::features(o.labels));
    fs::create_directories(o.out);
    write_histogram(rows, o.out + "/weight_histogram.csv");
    write_dominated(rows, feat, o.window, o.out + "/dominated_periodic.json", true);
    write_dominated(rows, feat, o.window, o.out + "/dominated_trend.json", false);
    write_breakdown(rows, o.out + "/cf1_breakdown.csv");
    int64_t n_per = 0, n_tr = 0;
    for (const auto& r : rows) {
        if (r.w_per > 0.5) ++n_per;
        if (r.w_tr > 0.5) ++n_tr;
    }
    std::printf("samples                  %zu\n", rows.size());
    std::printf("periodic-dominated       %lld\n", static_cast<long long>(n_per));
    std::printf("trend-dominated          %lld\n", static_cast<long long>(n_tr));
    std::printf("artifacts written to     %s\n", o.out.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOpts {
    std::string config, data;
    int samples = 32;
    double h = 1e-5, tol = 1e-4;
};

int cmd_gradcheck(const GradcheckOpts& o) {
    RunConfig rc = load_run_config(o.config);
    data::Dataset ds = load_dataset(o.data, rc.data);
    if (ds.splits.train.empty()) throw std::invalid_argument("dataset has no training origins");
    int bs = std::min<int>(rc.training.batch_size, static_cast<int>(ds.splits.train.size()));
    std::vector<int> origins(ds.splits.train.begin(), ds.splits.train.begin() + bs);
    data::Batch batch = data::make_batch(ds, origins, true);

    model::GraphIndex gi = model::build_graph_index(ds.net, ds.stats.statics, rc.model.khop);
    nn::ParameterStore ps;
    model::init_params(ps, rc.model, gi, rc.training.seed);

    // One frozen stochastic context: the loss is then a pure function of the
    // parameters, which is what the finite-difference probe requires.
    model::NnCtx nc;
    nc.training = true;
    nc.dropout = rc.model.dropout;
    nc.key = hash_combine(rc.training.seed, 0x6764636bull);
    train::OrdinalSpec spec;
    spec.phi_steps = rc.training.phi_steps;
    spec.one_hot = model::parse_variant(rc.model.variant) == model::Variant::WoR;

    auto loss_of = [&](nn::ParameterStore& params) {
        nn::Graph g;
        nn::ParamBinding p(g, params);
        auto out = model::model_forward(g, p, rc.model, gi, batch, nc);
        auto lo = train::total_loss(g, out, batch, spec, rc.training.weights, rc.model.k);
        return g.val(lo.total)[0];
    };

    std::map<std::string, Tensor> analytic;
    {
        nn::Graph g;
        nn::ParamBinding p(g, ps);
        auto out = model::model_forward(g, p, rc.model, gi, batch, nc);
        auto lo = train::total_loss(g, out, batch, spec, rc.training.weights, rc.model.k);
        double v = g.val(lo.total)[0];
        if (!std::isfinite(v)) throw std::runtime_error("non-finite loss at the probe point");
        g.backward(lo.total);
        analytic = p.grads();
        std::printf("loss %.12g over %d instances, %lld parameters\n", v, batch.b,
                    static_cast<long long>(ps.total_elements()));
    }

    nn::FdReport rep = nn::finite_difference_check(loss_of, analytic, ps, o.h, o.tol, o.samples,
                                                   rc.training.seed);
    std::printf("coords checked    %lld\n", static_cast<long long>(rep.coords_checked));
    std::printf("max rel error     %.3e (tensor %s, index %lld: analytic %.9g vs numeric %.9g)\n",
                rep.max_rel_err, rep.worst.name.c_str(), static_cast<long long>(rep.worst.index),
                rep.worst.analytic, rep.worst.numeric);
    std::printf("gradcheck %s (tolerance %.1e)\n", rep.pass ? "PASS" : "FAIL", o.tol);
    return rep.pass ? 0 : kExitGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"congestion prediction engine: mixture-of-graph-experts with cascaded trend/periodic integration"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads,
                   "worker threads; 1 keeps every run bitwise deterministic (0 = hardware)")
        ->capture_default_str();

    GenerateOpts gen;
    auto* cg = app.add_subcommand("generate", "synthesize a road network and its traffic series");
    cg->add_option("--scenario", gen.scenario, "scenario config file")->required();
    cg->add_option("--out", gen.out, "output dataset directory")->required();
    cg->add_option("--seed", gen.seed, "override the scenario seed")
        ->trigger_on_parse()
        ->each([&gen](const std::string&) { gen.seed_set = true; });

    TrainOpts tr;
    auto* ct = app.add_subcommand("train", "train a model and write a checkpoint");
    ct->add_option("--config", tr.config, "run config file")->required();
    ct->add_option("--data", tr.data, "dataset directory")->required();
    ct->add_option("--out", tr.out, "checkpoint output path")->required();
    ct->add_option("--variant", tr.variant, "override the config's model variant");
    ct->add_option("--corrupt", tr.corrupt, "corrupt training inputs, mode:percent:seed");
    ct->add_option("--log", tr.log, "training log CSV path (default <ckpt>.log.csv)");

    EvaluateOpts ev;
    auto* ce = app.add_subcommand("evaluate", "compute metrics for a checkpoint or rule baseline");
    ce->add_option("--ckpt", ev.ckpt, "checkpoint path, or ct-baseline / ha-baseline")->required();
    ce->add_option("--data", ev.data, "dataset directory")->required();
    ce->add_option("--split", ev.split, "train | val | test")->capture_default_str();
    ce->add_option("--out", ev.out, "metrics CSV output path")->required();
    ce->add_option("--preds-out", ev.preds_out, "also dump per-cell predictions CSV");
    ce->add_option("--config", ev.config, "run config (defaults to the checkpoint's)");

    PredictOpts pr;
    auto* cp = app.add_subcommand("predict", "emit the horizon forecast for one origin");
    cp->add_option("--ckpt", pr.ckpt, "checkpoint path")->required();
    cp->add_option("--data", pr.data, "dataset directory")->required();
    cp->add_option("--at", pr.at, "prediction origin (time index)")->required();
    cp->add_option("--out", pr.out, "predictions CSV output path")->required();

    ReportOpts rp;
    auto* cr = app.add_subcommand("report", "plot-ready interpretability artifacts from a predictions dump");
    cr->add_option("--preds", rp.preds, "predictions CSV from evaluate --preds-out")->required();
    cr->add_option("--labels", rp.labels, "dataset directory the predictions came from")->required();
    cr->add_option("--out", rp.out, "report output directory")->required();
    cr->add_option("--window", rp.window, "recent steps attached to dominated samples")
        ->capture_default_str();

    GradcheckOpts gc;
    auto* cc = app.add_subcommand("gradcheck", "finite-difference audit of the training gradients");
    cc->add_option("--config", gc.config, "run config file")->required();
    cc->add_option("--data", gc.data, "dataset directory")->required();
    cc->add_option("--samples", gc.samples, "coordinates sampled per parameter tensor")
        ->capture_default_str();
    cc->add_option("--step", gc.h, "central-difference step")->capture_default_str();
    cc->add_option("--tol", gc.tol, "max relative error accepted")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        kern::set_threads(threads);
        if (*cg) return cmd_generate(gen);
        if (*ct) return cmd_train(tr);
        if (*ce) return cmd_evaluate(ev);
        if (*cp) return cmd_predict(pr);
        if (*cr) return cmd_report(rp);
        if (*cc) return cmd_gradcheck(gc);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
