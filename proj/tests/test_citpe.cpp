#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "cpmoe/citpe.hpp"
#include "cpmoe/rng.hpp"
#include "doctest.h"

using namespace cpmoe;
using namespace cpmoe::nn;
using namespace cpmoe::model;

namespace {

Tensor rand_tensor(std::vector<int> shape, uint64_t key, double scale = 1.0) {
    Tensor t(shape);
    for (int64_t i = 0; i < t.size(); ++i)
        t.data[i] = scale * (rng_uniform(key, static_cast<uint64_t>(i)) * 2.0 - 1.0);
    return t;
}

// Single-series recent tensor: b=1, n=1, channel 0 carries x, channel 1 is 0.
Tensor series_rows(const std::vector<double>& x) {
    Tensor t({static_cast<int>(x.size()), 2});
    for (size_t i = 0; i < x.size(); ++i) t.at2(static_cast<int64_t>(i), 0) = x[i];
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// trend extraction

TEST_CASE("trend of a constant series is the series") {
    Tensor r = series_rows({3.0, 3.0, 3.0, 3.0});
    Tensor out = extract_trend(r, SeqShape{1, 4, 1}, 1);
    for (int t = 0; t < 4; ++t) CHECK(out.at2(t, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("one-level trend of [2,0,2,0] is [1,1,1,1]") {
    Tensor out = extract_trend(series_rows({2.0, 0.0, 2.0, 0.0}), SeqShape{1, 4, 1}, 1);
    for (int t = 0; t < 4; ++t) CHECK(out.at2(t, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one-level trend of a ramp repeats pairwise means") {
    std::vector<double> x;
    for (int i = 1; i <= 12; ++i) x.push_back(i);
    Tensor out = extract_trend(series_rows(x), SeqShape{1, 12, 1}, 1);
    for (int t = 0; t < 12; ++t) {
        double want = (x[t & ~1] + x[(t & ~1) + 1]) / 2.0;
        CHECK(out.at2(t, 0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("trend extraction is idempotent") {
    int t_p = 12, n = 3;
    Tensor r = rand_tensor({t_p * n, 2}, 7, 2.0);
    SeqShape s{1, t_p, n};
    Tensor once = extract_trend(r, s, 2);
    Tensor twice = extract_trend(once, s, 2);
    for (int64_t i = 0; i < once.size(); ++i)
        CHECK(twice.data[i] == doctest::Approx(once.data[i]).epsilon(1e-9));
}

TEST_CASE("trend runs per (sample, link, channel) series independently") {
    // Two links: link 0 alternates, link 1 is constant; channel 1 mirrors
    // channel 0 scaled. Layout is time-major: row t*n + i.
    int t_p = 4, n = 2;
    Tensor r({t_p * n, 2});
    for (int t = 0; t < t_p; ++t) {
        r.at2(static_cast<int64_t>(t) * n + 0, 0) = t % 2 == 0 ? 2.0 : 0.0;
        r.at2(static_cast<int64_t>(t) * n + 0, 1) = t % 2 == 0 ? 4.0 : 0.0;
        r.at2(static_cast<int64_t>(t) * n + 1, 0) = 5.0;
        r.at2(static_cast<int64_t>(t) * n + 1, 1) = -1.0;
    }
    Tensor out = extract_trend(r, SeqShape{1, t_p, n}, 1);
    for (int t = 0; t < t_p; ++t) {
        CHECK(out.at2(static_cast<int64_t>(t) * n + 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.at2(static_cast<int64_t>(t) * n + 0, 1) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(out.at2(static_cast<int64_t>(t) * n + 1, 0) == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(out.at2(static_cast<int64_t>(t) * n + 1, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

// ---------------------------------------------------------------------------
// trend / periodic experts

TEST_CASE("trend expert emits [B*N, t_f*3] and zeroed head gives zero logits") {
    int c = 2, d = 8, t_p = 4, t_f = 3, b = 2, n = 3;
    ParameterStore ps;
    register_trend_params(ps, c, d, t_p, t_f, 9);
    Tensor trend = rand_tensor({b * t_p * n, c}, 11);
    Graph g;
    ParamBinding p(g, ps);
    NnCtx nc;
    Var out = trend_expert(g, p, trend, SeqShape{b, t_p, n}, 2, nc);
    CHECK(g.val(out).rows() == static_cast<int64_t>(b) * n);
    CHECK(g.val(out).cols() == t_f * 3);

    for (double& v : ps.at("trend.head.1.w").data) v = 0.0;
    for (double& v : ps.at("trend.head.1.b").data) v = 0.0;
    Graph g2;
    ParamBinding p2(g2, ps);
    Var zero = trend_expert(g2, p2, trend, SeqShape{b, t_p, n}, 2, nc);
    for (double v : g2.val(zero).data) CHECK(v == 0.0);
}

TEST_CASE("trend expert is deterministic at inference") {
    int c = 2, d = 6, t_p = 8, t_f = 2, n = 2;
    ParameterStore ps;
    register_trend_params(ps, c, d, t_p, t_f, 21);
    Tensor trend = rand_tensor({t_p * n, c}, 22);
    NnCtx nc;
    Graph g1, g2;
    ParamBinding p1(g1, ps), p2(g2, ps);
    Var a = trend_expert(g1, p1, trend, SeqShape{1, t_p, n}, 2, nc);
    Var b = trend_expert(g2, p2, trend, SeqShape{1, t_p, n}, 2, nc);
    CHECK(g1.val(a).data == g2.val(b).data);
}

namespace {

data::Batch toy_hist_batch(int b, int t_f, int n, int n_slices, uint64_t key) {
    data::Batch batch;
    batch.b = b;
    batch.t_p = 4;
    batch.t_f = t_f;
    batch.n = n;
    batch.n_slices = n_slices;
    batch.hist = rand_tensor({b * n_slices * t_f * n, 2}, key);
    batch.origin.assign(b, 100);
    batch.tod.assign(b, 5);
    batch.dow.assign(b, 2);
    for (int k = 0; k < b * n_slices * t_f; ++k) {
        batch.hist_tod.push_back((3 + k) % 288);
        batch.hist_dow.push_back(k % 7);
    }
    return batch;
}

}  // namespace

TEST_CASE("periodic expert emits [B*N, t_f*3]; zeroed head gives zero logits") {
    int c = 2, d = 8, d_l = 4, n_slices = 3, t_f = 2, b = 2, n = 3;
    ParameterStore ps;
    register_periodic_params(ps, c, d, d_l, n_slices, t_f, 31);
    ps.create_embedding("embed.s", {n, d_l}, 32);
    ps.create_embedding("embed.tod", {288, d_l}, 33);
    ps.create_embedding("embed.dow", {7, d_l}, 34);
    auto batch = toy_hist_batch(b, t_f, n, n_slices, 35);
    Graph g;
    ParamBinding p(g, ps);
    NnCtx nc;
    Var out = periodic_expert(g, p, batch, nc);
    CHECK(g.val(out).rows() == static_cast<int64_t>(b) * n);
    CHECK(g.val(out).cols() == t_f * 3);

    for (double& v : ps.at("periodic.head.1.w").data) v = 0.0;
    for (double& v : ps.at("periodic.head.1.b").data) v = 0.0;
    Graph g2;
    ParamBinding p2(g2, ps);
    Var zero = periodic_expert(g2, p2, batch, nc);
    for (double v : g2.val(zero).data) CHECK(v == 0.0);
}

TEST_CASE("periodic expert requires history slices") {
    ParameterStore ps;
    register_periodic_params(ps, 2, 4, 3, 1, 2, 41);
    auto batch = toy_hist_batch(1, 2, 2, 1, 42);
    batch.n_slices = 0;
    Graph g;
    ParamBinding p(g, ps);
    NnCtx nc;
    CHECK_THROWS_AS(periodic_expert(g, p, batch, nc), std::runtime_error);
}

TEST_CASE("periodic encoder input width scales with slices * horizon * (c + 2 d_l)") {
    int c = 2, d = 8, d_l = 4, t_f = 12;
    for (int n_slices : {7, 3}) {
        ParameterStore ps;
        register_periodic_params(ps, c, d, d_l, n_slices, t_f, 51);
        CHECK(ps.at("periodic.enc.0.w").rows() == n_slices * t_f * (c + 2 * d_l));
    }
}

// ---------------------------------------------------------------------------
// dispersion and confidence

TEST_CASE("dispersion of uniform logits is [0, -ln 3]") {
    Tensor l({2, 3});
    l.data = {0.0, 0.0, 0.0, 4.2, 4.2, 4.2};  // second row: shifted constants
    Graph g;
    Var d = dispersion(g, g.constant(l));
    for (int r = 0; r < 2; ++r) {
        CHECK(g.val(d).at2(r, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(g.val(d).at2(r, 1) == doctest::Approx(-std::log(3.0)).epsilon(1e-9));
    }
}

TEST_CASE("dispersion of [10,0,0] is [200/9, ~-0.000998]") {
    Tensor l({1, 3});
    l.data = {10.0, 0.0, 0.0};
    Graph g;
    Var d = dispersion(g, g.constant(l));
    CHECK(g.val(d).at2(0, 0) == doctest::Approx(200.0 / 9.0).epsilon(1e-9));
    // Hand-computed negative entropy of softmax([10,0,0]).
    double z = std::exp(10.0) + 2.0;
    double p0 = std::exp(10.0) / z, p1 = 1.0 / z;
    double ne = p0 * std::log(p0) + 2.0 * p1 * std::log(p1);
    CHECK(g.val(d).at2(0, 1) == doctest::Approx(ne).epsilon(1e-9));
    CHECK(g.val(d).at2(0, 1) == doctest::Approx(-0.000998).epsilon(1e-3));
}

TEST_CASE("dispersion variance is zero only for equal logits") {
    Graph g;
    Tensor l = rand_tensor({50, 3}, 55, 4.0);
    Var d = dispersion(g, g.constant(l));
    for (int r = 0; r < 50; ++r) {
        bool equal = l.at2(r, 0) == l.at2(r, 1) && l.at2(r, 1) == l.at2(r, 2);
        if (equal)
            CHECK(g.val(d).at2(r, 0) == 0.0);
        else
            CHECK(g.val(d).at2(r, 0) > 0.0);
    }
}

TEST_CASE("confidence with a zeroed scorer is 0.5; learned scores stay in (0,1)") {
    ParameterStore ps;
    register_confidence_params(ps, 61);
    Tensor l = rand_tensor({20, 3}, 62, 6.0);
    Graph g;
    ParamBinding p(g, ps);
    NnCtx nc;
    for (int which : {1, 2}) {
        Var cv = confidence(g, p, g.constant(l), which, -1.0, nc);
        CHECK(g.val(cv).rows() == 20);
        CHECK(g.val(cv).cols() == 1);
        for (double v : g.val(cv).data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    for (const char* name : {"conf.c1.0.w", "conf.c1.0.b", "conf.c1.1.w", "conf.c1.1.b"})
        for (double& v : ps.at(name).data) v = 0.0;
    Graph g2;
    ParamBinding p2(g2, ps);
    Var half = confidence(g2, p2, g2.constant(l), 1, -1.0, nc);
    for (double v : g2.val(half).data) CHECK(v == 0.5);
}

TEST_CASE("forced confidence is the given constant and binds no parameters") {
    ParameterStore ps;  // deliberately empty: force must not touch conf.* names
    Graph g;
    ParamBinding p(g, ps);
    NnCtx nc;
    Var cv = confidence(g, p, g.constant(rand_tensor({7, 3}, 63)), 1, 0.25, nc);
    for (double v : g.val(cv).data) CHECK(v == 0.25);
}

// ---------------------------------------------------------------------------
// cascade

TEST_CASE("cascade worked example: C1=C2=0.5 mixes [1,0,0],[0,1,0],[0,0,1] to [0.5,0.25,0.25]") {
    Tensor per({1, 3}), tr({1, 3}), m({1, 3});
    per.data = {1.0, 0.0, 0.0};
    tr.data = {0.0, 1.0, 0.0};
    m.data = {0.0, 0.0, 1.0};
    Graph g;
    Var c1 = g.constant(Tensor::full({1, 1}, 0.5));
    Var c2 = g.constant(Tensor::full({1, 1}, 0.5));
    auto out = cascade(g, g.constant(per), g.constant(tr), g.constant(m), c1, c2);
    CHECK(g.val(out.logits).data[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.val(out.logits).data[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(g.val(out.logits).data[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(g.val(out.w_per).data[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.val(out.w_tr).data[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(g.val(out.w_m).data[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("C1 = 1 reproduces the periodic logits bitwise") {
    int r = 6;
    Tensor per = rand_tensor({r, 3}, 71), tr = rand_tensor({r, 3}, 72), m = rand_tensor({r, 3}, 73);
    Graph g;
    Var c1 = g.constant(Tensor::full({r, 1}, 1.0));
    Var c2 = g.constant(rand_tensor({r, 1}, 74, 0.4));
    auto out = cascade(g, g.constant(per), g.constant(tr), g.constant(m), c1, c2);
    CHECK(g.val(out.logits).data == per.data);
}

TEST_CASE("C1 = C2 = 0 reproduces the mixture-head logits bitwise") {
    int r = 6;
    Tensor per = rand_tensor({r, 3}, 75), tr = rand_tensor({r, 3}, 76), m = rand_tensor({r, 3}, 77);
    Graph g;
    Var zero1 = g.constant(Tensor({r, 1}));
    Var zero2 = g.constant(Tensor({r, 1}));
    auto out = cascade(g, g.constant(per), g.constant(tr), g.constant(m), zero1, zero2);
    CHECK(g.val(out.logits).data == m.data);
}

TEST_CASE("cascade weights sum to 1 and the output stays in the experts' hull") {
    int r = 40;
    Tensor per = rand_tensor({r, 3}, 81, 3.0), tr = rand_tensor({r, 3}, 82, 3.0),
           m = rand_tensor({r, 3}, 83, 3.0);
    Tensor c1t({r, 1}), c2t({r, 1});
    for (int i = 0; i < r; ++i) {
        c1t.data[i] = rng_uniform(84, static_cast<uint64_t>(i));
        c2t.data[i] = rng_uniform(85, static_cast<uint64_t>(i));
    }
    Graph g;
    auto out = cascade(g, g.constant(per), g.constant(tr), g.constant(m), g.constant(c1t),
                       g.constant(c2t));
    for (int i = 0; i < r; ++i) {
        double wp = g.val(out.w_per).data[i], wt = g.val(out.w_tr).data[i],
               wm = g.val(out.w_m).data[i];
        CHECK(wp + wt + wm == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(wp >= 0.0);
        CHECK(wt >= 0.0);
        CHECK(wm >= 0.0);
        for (int c = 0; c < 3; ++c) {
            double lo = std::min({per.at2(i, c), tr.at2(i, c), m.at2(i, c)});
            double hi = std::max({per.at2(i, c), tr.at2(i, c), m.at2(i, c)});
            double v = g.val(out.logits).at2(i, c);
            CHECK(v >= lo - 1e-12);
            CHECK(v <= hi + 1e-12);
        }
    }
}
