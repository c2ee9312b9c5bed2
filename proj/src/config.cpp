#include "cpmoe/kv.hpp"

#include "cpmoe/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpmoe {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

KvReader KvReader::from_text(const std::string& text) {
    KvReader r;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            r.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) {
            r.errors.push_back("line " + std::to_string(lineno) + ": empty key or value");
            continue;
        }
        if (!r.kv.emplace(key, val).second)
            r.errors.push_back("duplicate key: " + key);
    }
    return r;
}

KvReader KvReader::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

void KvReader::get(const std::string& key, int& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    used.insert(key);
    char* end = nullptr;
    long v = std::strtol(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        errors.push_back(key + ": not an integer: " + it->second);
    else
        out = static_cast<int>(v);
}

void KvReader::get(const std::string& key, double& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    used.insert(key);
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        errors.push_back(key + ": not a number: " + it->second);
    else
        out = v;
}

void KvReader::get(const std::string& key, uint64_t& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    used.insert(key);
    char* end = nullptr;
    unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        errors.push_back(key + ": not an unsigned integer: " + it->second);
    else
        out = v;
}

void KvReader::get(const std::string& key, std::string& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    used.insert(key);
    out = it->second;
}

void KvReader::require(const std::string& key) {
    if (!kv.count(key)) errors.push_back("missing required key: " + key);
}

void KvReader::finish(const std::string& what) {
    for (const auto& e : kv)
        if (!used.count(e.first)) errors.push_back("unknown key: " + e.first);
    if (errors.empty()) return;
    std::string msg = "invalid " + what + ":";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
}

void validate_run_config(const RunConfig& c) {
    std::vector<std::string> errs;
    auto bad = [&](const std::string& m) { errs.push_back(m); };

    if (c.data.t_p < 1) bad("t_p must be >= 1");
    if (c.data.t_f < 1) bad("t_f must be >= 1");
    if (c.data.n_d < 0 || c.data.n_w < 0) bad("n_d and n_w must be >= 0");
    if (c.data.t_d < 1 || c.data.t_w < 1) bad("t_d and t_w must be >= 1");
    if (c.data.train_ratio <= 0.0 || c.data.val_ratio <= 0.0 ||
        c.data.train_ratio + c.data.val_ratio >= 1.0)
        bad("train_ratio and val_ratio must be positive and leave room for a test split");

    if (c.model.d < 1) bad("d must be >= 1");
    if (c.model.layers < 1) bad("layers must be >= 1");
    if (c.model.n_up < 0 || c.model.n_down < 0 || c.model.n_glob < 0)
        bad("expert counts must be >= 0");
    if (c.model.n_experts() < 1) bad("at least one expert is required");
    if (c.model.k < 1) bad("k must be >= 1");
    if (c.model.tcn_layers < 1) bad("tcn_layers must be >= 1");
    if (c.model.khop < 0) bad("khop must be >= 0");
    if (c.model.d_l < 1) bad("d_l must be >= 1");
    if (c.model.heads < 1 || c.model.d % c.model.heads != 0)
        bad("heads must be >= 1 and divide d");
    if (c.model.wavelet_levels < 1) bad("wavelet_levels must be >= 1");
    if (c.model.dropout < 0.0 || c.model.dropout >= 1.0) bad("dropout must be in [0, 1)");
    if (c.model.force_c1 > 1.0 || c.model.force_c2 > 1.0)
        bad("force_c1/force_c2 must be <= 1 (negative disables the hook)");
    try {
        (void)model::parse_variant(c.model.variant);
    } catch (const std::exception& e) {
        bad(e.what());
    }

    if (c.training.epochs < 1) bad("epochs must be >= 1");
    if (c.training.batch_size < 1) bad("batch_size must be >= 1");
    if (c.training.patience < 1) bad("patience must be >= 1");
    if (c.training.train_stride < 1 || c.training.val_stride < 1 || c.training.test_stride < 1)
        bad("strides must be >= 1");
    if (c.training.adam.lr < 0.0) bad("lr must be >= 0");
    if (c.training.adam.weight_decay < 0.0) bad("weight_decay must be >= 0");
    if (c.training.weights.lambda1 < 0.0 || c.training.weights.lambda2 < 0.0)
        bad("lambda1 and lambda2 must be >= 0");
    for (double s : c.training.phi_steps)
        if (s <= 0.0) {
            bad("phi steps must be positive");
            break;
        }

    if (errs.empty()) return;
    std::string msg = "invalid run config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
}

static RunConfig read_run_config(KvReader& r) {
    RunConfig c;
    r.get("t_p", c.data.t_p);
    r.get("t_f", c.data.t_f);
    r.get("n_d", c.data.n_d);
    r.get("n_w", c.data.n_w);
    r.get("t_d", c.data.t_d);
    r.get("t_w", c.data.t_w);
    r.get("train_ratio", c.data.train_ratio);
    r.get("val_ratio", c.data.val_ratio);

    r.get("d", c.model.d);
    r.get("layers", c.model.layers);
    r.get("n_up", c.model.n_up);
    r.get("n_down", c.model.n_down);
    r.get("n_glob", c.model.n_glob);
    r.get("k", c.model.k);
    r.get("tcn_layers", c.model.tcn_layers);
    r.get("khop", c.model.khop);
    r.get("d_l", c.model.d_l);
    r.get("heads", c.model.heads);
    r.get("wavelet_levels", c.model.wavelet_levels);
    r.get("dropout", c.model.dropout);
    r.get("variant", c.model.variant);
    r.get("force_c1", c.model.force_c1);
    r.get("force_c2", c.model.force_c2);

    r.get("epochs", c.training.epochs);
    r.get("batch_size", c.training.batch_size);
    r.get("patience", c.training.patience);
    r.get("seed", c.training.seed);
    r.get("train_stride", c.training.train_stride);
    r.get("val_stride", c.training.val_stride);
    r.get("test_stride", c.training.test_stride);
    r.get("lr", c.training.adam.lr);
    r.get("weight_decay", c.training.adam.weight_decay);
    r.get("lambda1", c.training.weights.lambda1);
    r.get("lambda2", c.training.weights.lambda2);
    double phi01 = c.training.phi_steps[0], phi12 = c.training.phi_steps[1];
    r.get("phi_01", phi01);
    r.get("phi_12", phi12);
    c.training.phi_steps = {phi01, phi12};

    c.model.t_p = c.data.t_p;
    c.model.t_f = c.data.t_f;
    c.model.t_d = c.data.t_d;
    c.model.n_slices = c.data.n_d + c.data.n_w;

    r.finish("run config");
    validate_run_config(c);
    return c;
}

RunConfig parse_run_config(const std::string& text) {
    KvReader r = KvReader::from_text(text);
    return read_run_config(r);
}

RunConfig load_run_config(const std::string& path) {
    KvReader r = KvReader::from_file(path);
    return read_run_config(r);
}

std::string dump_run_config(const RunConfig& c) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "# data\n";
    out << "t_p = " << c.data.t_p << "\n";
    out << "t_f = " << c.data.t_f << "\n";
    out << "n_d = " << c.data.n_d << "\n";
    out << "n_w = " << c.data.n_w << "\n";
    out << "t_d = " << c.data.t_d << "\n";
    out << "t_w = " << c.data.t_w << "\n";
    out << "train_ratio = " << num(c.data.train_ratio) << "\n";
    out << "val_ratio = " << num(c.data.val_ratio) << "\n";
    out << "# model\n";
    out << "d = " << c.model.d << "\n";
    out << "layers = " << c.model.layers << "\n";
    out << "n_up = " << c.model.n_up << "\n";
    out << "n_down = " << c.model.n_down << "\n";
    out << "n_glob = " << c.model.n_glob << "\n";
    out << "k = " << c.model.k << "\n";
    out << "tcn_layers = " << c.model.tcn_layers << "\n";
    out << "khop = " << c.model.khop << "\n";
    out << "d_l = " << c.model.d_l << "\n";
    out << "heads = " << c.model.heads << "\n";
    out << "wavelet_levels = " << c.model.wavelet_levels << "\n";
    out << "dropout = " << num(c.model.dropout) << "\n";
    out << "variant = " << c.model.variant << "\n";
    out << "force_c1 = " << num(c.model.force_c1) << "\n";
    out << "force_c2 = " << num(c.model.force_c2) << "\n";
    out << "# training\n";
    out << "epochs = " << c.training.epochs << "\n";
    out << "batch_size = " << c.training.batch_size << "\n";
    out << "patience = " << c.training.patience << "\n";
    out << "seed = " << c.training.seed << "\n";
    out << "train_stride = " << c.training.train_stride << "\n";
    out << "val_stride = " << c.training.val_stride << "\n";
    out << "test_stride = " << c.training.test_stride << "\n";
    out << "lr = " << num(c.training.adam.lr) << "\n";
    out << "weight_decay = " << num(c.training.adam.weight_decay) << "\n";
    out << "lambda1 = " << num(c.training.weights.lambda1) << "\n";
    out << "lambda2 = " << num(c.training.weights.lambda2) << "\n";
    out << "phi_01 = " << num(c.training.phi_steps[0]) << "\n";
    out << "phi_12 = " << num(c.training.phi_steps[1]) << "\n";
    return out.str();
}

}  // namespace cpmoe
