#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cpmoe/config.hpp"
#include "cpmoe/scenario.hpp"
#include "doctest.h"

using namespace cpmoe;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

// What `what()` said when the callable threw; empty when it did not throw.
template <class F>
std::string thrown(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("empty text keeps every default and syncs the derived model fields") {
    RunConfig c = parse_run_config("");
    CHECK(c.data.t_p == 12);
    CHECK(c.data.n_d == 4);
    CHECK(c.data.n_w == 3);
    CHECK(c.model.d == 32);
    CHECK(c.model.layers == 2);
    CHECK(c.model.k == 6);
    CHECK(c.model.dropout == 0.15);
    CHECK(c.training.epochs == 100);
    CHECK(c.training.adam.lr == 1e-3);
    // One key per fact: the model copies its windows from the data section.
    CHECK(c.model.t_p == c.data.t_p);
    CHECK(c.model.t_f == c.data.t_f);
    CHECK(c.model.t_d == c.data.t_d);
    CHECK(c.model.n_slices == 7);
}

TEST_CASE("overrides, comments and whitespace parse") {
    RunConfig c = parse_run_config(
        "# run\n"
        "  t_p = 4  # trailing comment\n"
        "t_f=6\n"
        "\n"
        "n_d = 1\nn_w = 0\n"
        "d = 16\nheads = 4\n"
        "variant = WoC\n"
        "lr = 0.0005\n"
        "phi_01 = 0.5\nphi_12 = 3\n"
        "seed = 42\n");
    CHECK(c.data.t_p == 4);
    CHECK(c.data.t_f == 6);
    CHECK(c.model.t_p == 4);
    CHECK(c.model.t_f == 6);
    CHECK(c.model.n_slices == 1);
    CHECK(c.model.d == 16);
    CHECK(c.model.variant == "WoC");
    CHECK(c.training.adam.lr == 0.0005);
    CHECK(c.training.phi_steps == std::vector<double>{0.5, 3.0});
    CHECK(c.training.seed == 42);
}

TEST_CASE("unknown keys, duplicates and malformed lines are rejected") {
    CHECK(contains(thrown([] { parse_run_config("bogus = 3\n"); }), "unknown key: bogus"));
    CHECK(contains(thrown([] { parse_run_config("d = 8\nd = 9\n"); }), "duplicate key: d"));
    CHECK(contains(thrown([] { parse_run_config("just words\n"); }), "expected key = value"));
    CHECK(contains(thrown([] { parse_run_config("d =\n"); }), "empty key or value"));
    CHECK(contains(thrown([] { parse_run_config("d = abc\n"); }), "not an integer"));
    CHECK(contains(thrown([] { parse_run_config("dropout = fast\n"); }), "not a number"));
}

TEST_CASE("validation reports every problem in one message") {
    std::string msg = thrown([] {
        parse_run_config(
            "t_p = 0\n"
            "d = 32\nheads = 5\n"
            "k = 0\n"
            "dropout = 1.5\n"
            "variant = frobnicate\n"
            "epochs = 0\n");
    });
    CHECK(contains(msg, "t_p must be >= 1"));
    CHECK(contains(msg, "heads must be >= 1 and divide d"));
    CHECK(contains(msg, "k must be >= 1"));
    CHECK(contains(msg, "dropout must be in [0, 1)"));
    CHECK(contains(msg, "unknown variant"));
    CHECK(contains(msg, "epochs must be >= 1"));
}

TEST_CASE("confidence pins accept [0,1] and negatives, reject above 1") {
    RunConfig c = parse_run_config("force_c1 = 0.25\nforce_c2 = -1\n");
    CHECK(c.model.force_c1 == 0.25);
    CHECK(contains(thrown([] { parse_run_config("force_c1 = 1.5\n"); }), "force_c1"));
}

TEST_CASE("dumping and re-parsing a config is a fixed point") {
    RunConfig c = parse_run_config(
        "t_p = 4\nt_f = 6\nn_d = 2\nn_w = 1\n"
        "d = 24\nheads = 3\ndropout = 0.125\n"
        "lr = 0.00075\nlambda1 = 0.002\nphi_01 = 0.35\n"
        "variant = WA\nseed = 9\n");
    std::string d1 = dump_run_config(c);
    RunConfig c2 = parse_run_config(d1);
    std::string d2 = dump_run_config(c2);
    CHECK(d1 == d2);
    CHECK(c2.data.t_p == 4);
    CHECK(c2.model.dropout == 0.125);
    CHECK(c2.model.variant == "WA");
    CHECK(c2.training.adam.lr == 0.00075);
    CHECK(c2.training.phi_steps[0] == 0.35);
}

TEST_CASE("scenario config file loads overrides and rejects unknown keys") {
    fs::path dir = fs::path("cli_scratch") / "cfg";
    fs::create_directories(dir);
    spit(dir / "scn.cfg", "n_links = 6\ntopology = grid\ndays = 2\nseed = 3\nramp = 1\n");
    auto sc = data::load_scenario_config((dir / "scn.cfg").string());
    CHECK(sc.n_links == 6);
    CHECK(sc.topology == "grid");
    CHECK(sc.days == 2);
    CHECK(sc.seed == 3);
    CHECK(sc.ramp == 1);
    CHECK(sc.peak_prob == 0.9);  // untouched default

    spit(dir / "bad.cfg", "n_links = 6\nwibble = 2\n");
    CHECK(contains(thrown([&] { data::load_scenario_config((dir / "bad.cfg").string()); }),
                   "unknown key: wibble"));
    CHECK_THROWS(data::load_scenario_config((dir / "missing.cfg").string()));
}

#ifdef CPMOE_BIN

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(CPMOE_BIN) + " " + args + " >/dev/null 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("command line round trip: generate, train, evaluate, predict, report") {
    fs::path dir = fs::path("cli_scratch") / "e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);
    spit(dir / "scn.cfg", "n_links = 4\ntopology = chain\ndays = 3\nseed = 11\n");
    spit(dir / "run.cfg",
         "t_p = 4\nt_f = 4\nn_d = 1\nn_w = 0\n"
         "d = 8\nlayers = 1\nn_up = 1\nn_down = 1\nn_glob = 1\nk = 3\n"
         "tcn_layers = 1\nkhop = 2\nd_l = 4\nheads = 2\ndropout = 0.0\n"
         "epochs = 1\nbatch_size = 4\npatience = 2\nseed = 1\n"
         "train_stride = 24\nval_stride = 8\ntest_stride = 8\n");
    std::string data = (dir / "data").string();
    std::string ckpt = (dir / "model.ckpt").string();

    CHECK(run_cli("") == 1);        // a subcommand is required
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("frobnicate") == 1);

    REQUIRE(run_cli("generate --scenario " + (dir / "scn.cfg").string() + " --out " + data) == 0);
    CHECK(fs::exists(data + "/network.json"));
    CHECK(fs::exists(data + "/features.csv"));

    REQUIRE(run_cli("train --data " + data + " --config " + (dir / "run.cfg").string() +
                    " --out " + ckpt) == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt + ".log.csv"));
    CHECK(first_line(slurp(ckpt + ".log.csv")) == "epoch,step,loss,l_ord,l_imp,l_load,val_cf1");

    std::string mcsv = (dir / "metrics.csv").string();
    REQUIRE(run_cli("evaluate --data " + data + " --ckpt " + ckpt + " --split val --out " +
                    mcsv) == 0);
    CHECK(first_line(slurp(mcsv)) ==
          "split,accuracy,recall,precision,c_f1,w_f1,f1_fast,f1_slow,f1_congested,evaluated");
    CHECK(contains(slurp(mcsv), "val,"));

    // Baselines answer to magic checkpoint names and need no weights file.
    std::string bcsv = (dir / "ct.csv").string();
    CHECK(run_cli("evaluate --data " + data + " --ckpt ct-baseline --config " +
                  (dir / "run.cfg").string() + " --split val --out " + bcsv) == 0);
    CHECK(fs::exists(bcsv));
    CHECK(run_cli("evaluate --data " + data + " --ckpt ha-baseline --config " +
                  (dir / "run.cfg").string() + " --split val --out " + (dir / "ha.csv").string()) ==
          0);

    std::string pcsv = (dir / "pred.csv").string();
    REQUIRE(run_cli("predict --data " + data + " --ckpt " + ckpt + " --at 300 --out " + pcsv) ==
            0);
    CHECK(first_line(slurp(pcsv)) == "link_id,step,level,logit0,logit1,logit2,w_per,w_tr,w_m");
    CHECK(run_cli("predict --data " + data + " --ckpt " + ckpt + " --at 2 --out " + pcsv) == 1);
    CHECK(run_cli("predict --data " + data + " --ckpt ct-baseline --at 300 --out " + pcsv) == 1);

    std::string rdir = (dir / "report").string();
    std::string dump = (dir / "val_preds.csv").string();
    REQUIRE(run_cli("evaluate --data " + data + " --ckpt " + ckpt + " --split val --out " + mcsv +
                    " --preds-out " + dump) == 0);
    REQUIRE(run_cli("report --labels " + data + " --preds " + dump + " --out " + rdir) == 0);
    CHECK(fs::exists(rdir + "/weight_histogram.csv"));
    CHECK(fs::exists(rdir + "/cf1_breakdown.csv"));
    CHECK(fs::exists(rdir + "/dominated_periodic.json"));
}

TEST_CASE("command line rejects bad inputs with the validation exit code") {
    fs::path dir = fs::path("cli_scratch") / "e2e";  // reuses the round-trip artifacts
    std::string data = (dir / "data").string();
    std::string ckpt = (dir / "model.ckpt").string();
    REQUIRE(fs::exists(ckpt));

    CHECK(run_cli("train --data /nowhere --config " + (dir / "run.cfg").string() + " --out " +
                  (dir / "x.ckpt").string()) == 2);
    CHECK(run_cli("train --data " + data + " --config " + (dir / "run.cfg").string() +
                  " --out " + (dir / "x.ckpt").string() + " --corrupt zap:5:1") == 1);
    CHECK(run_cli("train --data " + data + " --config " + (dir / "run.cfg").string() +
                  " --out " + (dir / "x.ckpt").string() + " --variant nope") == 1);
    CHECK(run_cli("evaluate --data " + data + " --ckpt " + (dir / "absent.ckpt").string() +
                  " --split val --out " + (dir / "m2.csv").string()) == 2);
    CHECK(run_cli("evaluate --data " + data + " --ckpt " + ckpt + " --split weekend --out " +
                  (dir / "m3.csv").string()) == 1);
}

TEST_CASE("gradient probe subcommand exits clean on a tiny model") {
    fs::path dir = fs::path("cli_scratch") / "e2e";
    std::string data = (dir / "data").string();
    REQUIRE(fs::exists(data + "/network.json"));
    CHECK(run_cli("gradcheck --data " + data + " --config " + (dir / "run.cfg").string() +
                  " --samples 3") == 0);
}

#endif  // CPMOE_BIN
