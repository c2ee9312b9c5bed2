#include "cpmoe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "cpmoe/kernels.hpp"
#include "cpmoe/rng.hpp"

// Op implementations. Every op computes its value eagerly, then registers a
// backward closure. Node ids are sequential, so the output handle is known
// before Graph::make runs (next_var); closures capture handles by value.

namespace cpmoe::nn {

namespace {

void check(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

Var next_var(const Graph& g) { return Var{static_cast<int32_t>(g.size())}; }

double softplus_v(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475); }
double norm_pdf(double z) { return 0.3989422804014327 * std::exp(-0.5 * z * z); }

}  // namespace

// ---------- elementwise ----------

Var add(Graph& g, Var a, Var b) {
    check(g.val(a).same_shape(g.val(b)), "add: shape mismatch");
    Tensor out(g.val(a).shape);
    const double *ap = g.val(a).data.data(), *bp = g.val(b).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = ap[i] + bp[i]; });
    Var o = next_var(g);
    return g.make(std::move(out), {a, b}, [o, a, b](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* ga = gg.grad_buf(a)) kern::par_for(n, [&](int64_t i) { ga[i] += go[i]; });
        if (double* gb = gg.grad_buf(b)) kern::par_for(n, [&](int64_t i) { gb[i] += go[i]; });
    });
}

Var sub(Graph& g, Var a, Var b) {
    check(g.val(a).same_shape(g.val(b)), "sub: shape mismatch");
    Tensor out(g.val(a).shape);
    const double *ap = g.val(a).data.data(), *bp = g.val(b).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = ap[i] - bp[i]; });
    Var o = next_var(g);
    return g.make(std::move(out), {a, b}, [o, a, b](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* ga = gg.grad_buf(a)) kern::par_for(n, [&](int64_t i) { ga[i] += go[i]; });
        if (double* gb = gg.grad_buf(b)) kern::par_for(n, [&](int64_t i) { gb[i] -= go[i]; });
    });
}

Var mul(Graph& g, Var a, Var b) {
    check(g.val(a).same_shape(g.val(b)), "mul: shape mismatch");
    Tensor out(g.val(a).shape);
    const double *ap = g.val(a).data.data(), *bp = g.val(b).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = ap[i] * bp[i]; });
    Var o = next_var(g);
    return g.make(std::move(out), {a, b}, [o, a, b](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double *av = gg.val(a).data.data(), *bv = gg.val(b).data.data();
        int64_t n = gg.val(o).size();
        if (double* ga = gg.grad_buf(a)) kern::par_for(n, [&](int64_t i) { ga[i] += go[i] * bv[i]; });
        if (double* gb = gg.grad_buf(b)) kern::par_for(n, [&](int64_t i) { gb[i] += go[i] * av[i]; });
    });
}

Var div_ew(Graph& g, Var a, Var b) {
    check(g.val(a).same_shape(g.val(b)), "div: shape mismatch");
    Tensor out(g.val(a).shape);
    const double *ap = g.val(a).data.data(), *bp = g.val(b).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = ap[i] / bp[i]; });
    Var o = next_var(g);
    return g.make(std::move(out), {a, b}, [o, a, b](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double *av = gg.val(a).data.data(), *bv = gg.val(b).data.data();
        int64_t n = gg.val(o).size();
        if (double* ga = gg.grad_buf(a)) kern::par_for(n, [&](int64_t i) { ga[i] += go[i] / bv[i]; });
        if (double* gb = gg.grad_buf(b))
            kern::par_for(n, [&](int64_t i) { gb[i] -= go[i] * av[i] / (bv[i] * bv[i]); });
    });
}

Var axpb(Graph& g, Var a, double k, double c) {
    Tensor out(g.val(a).shape);
    const double* ap = g.val(a).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = k * ap[i] + c; });
    Var o = next_var(g);
    return g.make(std::move(out), {a}, [o, a, k](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* ga = gg.grad_buf(a)) kern::par_for(n, [&](int64_t i) { ga[i] += k * go[i]; });
    });
}

Var activation(Graph& g, Var x, Act act, double leaky_slope) {
    switch (act) {
        case Act::None: return x;
        case Act::ReLU: return relu(g, x);
        case Act::LeakyReLU: return leaky_relu(g, x, leaky_slope);
        case Act::Sigmoid: return sigmoid(g, x);
        case Act::Tanh: return tanh_op(g, x);
        case Act::Softplus: return softplus(g, x);
    }
    throw std::logic_error("unknown activation");
}

Var relu(Graph& g, Var x) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = xp[i] > 0.0 ? xp[i] : 0.0; });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* xv = gg.val(x).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(n, [&](int64_t i) { gx[i] += xv[i] > 0.0 ? go[i] : 0.0; });
    });
}

Var leaky_relu(Graph& g, Var x, double slope) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = xp[i] > 0.0 ? xp[i] : slope * xp[i]; });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, slope](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* xv = gg.val(x).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(n, [&](int64_t i) { gx[i] += (xv[i] > 0.0 ? 1.0 : slope) * go[i]; });
    });
}

Var sigmoid(Graph& g, Var x) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = 1.0 / (1.0 + std::exp(-xp[i])); });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(n, [&](int64_t i) { gx[i] += ov[i] * (1.0 - ov[i]) * go[i]; });
    });
}

Var tanh_op(Graph& g, Var x) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = std::tanh(xp[i]); });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(n, [&](int64_t i) { gx[i] += (1.0 - ov[i] * ov[i]) * go[i]; });
    });
}

Var softplus(Graph& g, Var x) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = softplus_v(xp[i]); });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* xv = gg.val(x).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(n, [&](int64_t i) { gx[i] += go[i] / (1.0 + std::exp(-xv[i])); });
    });
}

Var log_op(Graph& g, Var x) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = std::log(xp[i]); });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* xv = gg.val(x).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x)) kern::par_for(n, [&](int64_t i) { gx[i] += go[i] / xv[i]; });
    });
}

Var sqrt_op(Graph& g, Var x) {
    Tensor out(g.val(x).shape);
    const double* xp = g.val(x).data.data();
    double* op = out.data.data();
    kern::par_for(out.size(), [&](int64_t i) { op[i] = std::sqrt(xp[i]); });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(n, [&](int64_t i) { gx[i] += ov[i] > 0.0 ? 0.5 / ov[i] * go[i] : 0.0; });
    });
}

// ---------- matrix ----------

Var matmul(Graph& g, Var a, Var b) {
    const Tensor &av = g.val(a), &bv = g.val(b);
    check(av.cols() == static_cast<int>(bv.rows()), "matmul: inner dims");
    int64_t M = av.rows(), K = av.cols(), N = bv.cols();
    Tensor out({static_cast<int>(M), static_cast<int>(N)});
    kern::matmul(av.data.data(), bv.data.data(), out.data.data(), M, K, N);
    Var o = next_var(g);
    return g.make(std::move(out), {a, b}, [o, a, b, M, K, N](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* ga = gg.grad_buf(a))
            kern::matmul_abt(go, gg.val(b).data.data(), ga, M, N, K, true);  // dA += dC * B^T
        if (double* gb = gg.grad_buf(b))
            kern::matmul_atb(gg.val(a).data.data(), go, gb, M, K, N, true);  // dB += A^T * dC
    });
}

Var matmul_nt(Graph& g, Var a, Var b) {
    const Tensor &av = g.val(a), &bv = g.val(b);
    check(av.cols() == bv.cols(), "matmul_nt: inner dims");
    int64_t M = av.rows(), K = av.cols(), N = bv.rows();
    Tensor out({static_cast<int>(M), static_cast<int>(N)});
    kern::matmul_abt(av.data.data(), bv.data.data(), out.data.data(), M, K, N);
    Var o = next_var(g);
    return g.make(std::move(out), {a, b}, [o, a, b, M, K, N](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* ga = gg.grad_buf(a))
            kern::matmul(go, gg.val(b).data.data(), ga, M, N, K, true);  // dA += dC * B
        if (double* gb = gg.grad_buf(b))
            kern::matmul_atb(go, gg.val(a).data.data(), gb, M, N, K, true);  // dB += dC^T * A
    });
}

Var affine(Graph& g, Var x, Var w, Var b) {
    const Tensor &xv = g.val(x), &wv = g.val(w), &bv = g.val(b);
    check(xv.cols() == static_cast<int>(wv.rows()), "affine: inner dims");
    check(bv.size() == wv.cols(), "affine: bias dim");
    int64_t M = xv.rows(), K = xv.cols(), N = wv.cols();
    Tensor out({static_cast<int>(M), static_cast<int>(N)});
    kern::matmul(xv.data.data(), wv.data.data(), out.data.data(), M, K, N);
    double* op = out.data.data();
    const double* bp = bv.data.data();
    kern::par_for(M, [&](int64_t i) {
        for (int64_t j = 0; j < N; ++j) op[i * N + j] += bp[j];
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x, w, b}, [o, x, w, b, M, K, N](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x)) kern::matmul_abt(go, gg.val(w).data.data(), gx, M, N, K, true);
        if (double* gw = gg.grad_buf(w)) kern::matmul_atb(gg.val(x).data.data(), go, gw, M, K, N, true);
        if (double* gb = gg.grad_buf(b))
            for (int64_t i = 0; i < M; ++i)
                for (int64_t j = 0; j < N; ++j) gb[j] += go[i * N + j];
    });
}

// ---------- shape / indexing ----------

Var reshape(Graph& g, Var x, std::vector<int> shape) {
    Tensor out = g.val(x).reshaped(std::move(shape));
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        int64_t n = gg.val(o).size();
        if (double* gx = gg.grad_buf(x)) kern::par_for(n, [&](int64_t i) { gx[i] += go[i]; });
    });
}

Var concat_cols(Graph& g, const std::vector<Var>& xs) {
    check(!xs.empty(), "concat: empty input list");
    int64_t R = g.val(xs[0]).rows();
    int total = 0;
    std::vector<int> widths;
    for (Var x : xs) {
        check(g.val(x).rows() == R, "concat: row count mismatch");
        widths.push_back(g.val(x).cols());
        total += widths.back();
    }
    Tensor out({static_cast<int>(R), total});
    int off = 0;
    for (size_t k = 0; k < xs.size(); ++k) {
        const Tensor& xv = g.val(xs[k]);
        int w = widths[k];
        for (int64_t r = 0; r < R; ++r)
            std::memcpy(&out.data[r * total + off], &xv.data[r * w], sizeof(double) * w);
        off += w;
    }
    Var o = next_var(g);
    std::vector<Var> ins(xs);
    return g.make(std::move(out), ins, [o, ins, widths, total, R](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        int off2 = 0;
        for (size_t k = 0; k < ins.size(); ++k) {
            int w = widths[k];
            if (double* gx = gg.grad_buf(ins[k]))
                for (int64_t r = 0; r < R; ++r)
                    for (int c = 0; c < w; ++c) gx[r * w + c] += go[r * total + off2 + c];
            off2 += w;
        }
    });
}

Var gather_rows(Graph& g, Var x, std::vector<int64_t> idx) {
    const Tensor& xv = g.val(x);
    int C = xv.cols();
    Tensor out({static_cast<int>(idx.size()), C});
    for (size_t i = 0; i < idx.size(); ++i)
        std::memcpy(&out.data[i * C], &xv.data[idx[i] * C], sizeof(double) * C);
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, idx = std::move(idx), C](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            for (size_t i = 0; i < idx.size(); ++i)
                for (int c = 0; c < C; ++c) gx[idx[i] * C + c] += go[i * C + c];
    });
}

Var permute_tn(Graph& g, Var x, int B, int T, int N) {
    const Tensor& xv = g.val(x);
    int D = xv.cols();
    check(xv.rows() == static_cast<int64_t>(B) * T * N, "permute_tn: row count");
    Tensor out({B * N, T * D});
    const double* xp = xv.data.data();
    double* op = out.data.data();
    kern::par_for(static_cast<int64_t>(B) * N, [&](int64_t bn) {
        int64_t b = bn / N, n = bn % N;
        for (int t = 0; t < T; ++t)
            std::memcpy(op + bn * T * D + static_cast<int64_t>(t) * D,
                        xp + ((b * T + t) * N + n) * D, sizeof(double) * D);
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, B, T, N, D](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(static_cast<int64_t>(B) * N, [&](int64_t bn) {
                int64_t b = bn / N, n = bn % N;
                for (int t = 0; t < T; ++t)
                    for (int d = 0; d < D; ++d)
                        gx[((b * T + t) * N + n) * D + d] += go[bn * T * D + static_cast<int64_t>(t) * D + d];
            });
    });
}

// ---------- reductions / broadcasts ----------

Var sum_all(Graph& g, Var x) {
    double s = 0.0;
    for (double v : g.val(x).data) s += v;
    Var o = next_var(g);
    return g.make(Tensor::scalar(s), {x}, [o, x](Graph& gg) {
        double go = gg.grad(o).data[0];
        int64_t n = gg.val(x).size();
        if (double* gx = gg.grad_buf(x)) kern::par_for(n, [&](int64_t i) { gx[i] += go; });
    });
}

Var mean_all(Graph& g, Var x) {
    int64_t n = g.val(x).size();
    return axpb(g, sum_all(g, x), 1.0 / static_cast<double>(n), 0.0);
}

Var sum_cols(Graph& g, Var x) {
    const Tensor& xv = g.val(x);
    int64_t R = xv.rows();
    int K = xv.cols();
    Tensor out({1, K});
    for (int64_t r = 0; r < R; ++r)
        for (int k = 0; k < K; ++k) out.data[k] += xv.data[r * K + k];
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, R, K](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(R, [&](int64_t r) {
                for (int k = 0; k < K; ++k) gx[r * K + k] += go[k];
            });
    });
}

Var sum_lastdim(Graph& g, Var x) {
    const Tensor& xv = g.val(x);
    int64_t R = xv.rows();
    int K = xv.cols();
    Tensor out({static_cast<int>(R), 1});
    kern::par_for(R, [&](int64_t r) {
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += xv.data[r * K + k];
        out.data[r] = s;
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, R, K](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(R, [&](int64_t r) {
                for (int k = 0; k < K; ++k) gx[r * K + k] += go[r];
            });
    });
}

Var mean_lastdim(Graph& g, Var x) {
    return axpb(g, sum_lastdim(g, x), 1.0 / g.val(x).cols(), 0.0);
}

Var sub_bcast(Graph& g, Var x, Var m) {
    const Tensor& xv = g.val(x);
    int64_t R = xv.rows();
    int K = xv.cols();
    check(g.val(m).rows() == R && g.val(m).cols() == 1, "sub_bcast: [R,1] expected");
    Tensor out(xv.shape);
    const double* mp = g.val(m).data.data();
    kern::par_for(R, [&](int64_t r) {
        for (int k = 0; k < K; ++k) out.data[r * K + k] = xv.data[r * K + k] - mp[r];
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x, m}, [o, x, m, R, K](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(R * K, [&](int64_t i) { gx[i] += go[i]; });
        if (double* gm = gg.grad_buf(m))
            for (int64_t r = 0; r < R; ++r)
                for (int k = 0; k < K; ++k) gm[r] -= go[r * K + k];
    });
}

Var mul_bcast(Graph& g, Var x, Var s) {
    const Tensor& xv = g.val(x);
    int64_t R = xv.rows();
    int K = xv.cols();
    check(g.val(s).rows() == R && g.val(s).cols() == 1, "mul_bcast: [R,1] expected");
    Tensor out(xv.shape);
    const double* sp = g.val(s).data.data();
    kern::par_for(R, [&](int64_t r) {
        for (int k = 0; k < K; ++k) out.data[r * K + k] = xv.data[r * K + k] * sp[r];
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x, s}, [o, x, s, R, K](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* xv2 = gg.val(x).data.data();
        const double* sv = gg.val(s).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(R, [&](int64_t r) {
                for (int k = 0; k < K; ++k) gx[r * K + k] += go[r * K + k] * sv[r];
            });
        if (double* gs = gg.grad_buf(s))
            for (int64_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (int k = 0; k < K; ++k) acc += go[r * K + k] * xv2[r * K + k];
                gs[r] += acc;
            }
    });
}

Var const_times_scalar(Graph& g, Tensor c, Var s) {
    check(g.val(s).size() == 1, "const_times_scalar: scalar expected");
    double sv = g.val(s).data[0];
    Tensor out(c.shape);
    for (int64_t i = 0; i < c.size(); ++i) out.data[i] = c.data[i] * sv;
    Var o = next_var(g);
    return g.make(std::move(out), {s}, [o, s, c = std::move(c)](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gs = gg.grad_buf(s)) {
            double acc = 0.0;
            for (int64_t i = 0; i < c.size(); ++i) acc += go[i] * c.data[i];
            gs[0] += acc;
        }
    });
}

// ---------- softmax family ----------

Var softmax_rows(Graph& g, Var x) {
    const Tensor& xv = g.val(x);
    int64_t R = xv.rows();
    int K = xv.cols();
    Tensor out(xv.shape);
    kern::par_for(R, [&](int64_t r) {
        const double* row = &xv.data[r * K];
        double mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) z += std::exp(row[k] - mx);
        for (int k = 0; k < K; ++k) out.data[r * K + k] = std::exp(row[k] - mx) / z;
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, R, K](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(R, [&](int64_t r) {
                double dot = 0.0;
                for (int k = 0; k < K; ++k) dot += go[r * K + k] * ov[r * K + k];
                for (int k = 0; k < K; ++k) gx[r * K + k] += ov[r * K + k] * (go[r * K + k] - dot);
            });
    });
}

Var log_softmax_rows(Graph& g, Var x) {
    const Tensor& xv = g.val(x);
    int64_t R = xv.rows();
    int K = xv.cols();
    Tensor out(xv.shape);
    kern::par_for(R, [&](int64_t r) {
        const double* row = &xv.data[r * K];
        double mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) z += std::exp(row[k] - mx);
        double lz = std::log(z) + mx;
        for (int k = 0; k < K; ++k) out.data[r * K + k] = row[k] - lz;
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, R, K](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(R, [&](int64_t r) {
                double s = 0.0;
                for (int k = 0; k < K; ++k) s += go[r * K + k];
                for (int k = 0; k < K; ++k) gx[r * K + k] += go[r * K + k] - std::exp(ov[r * K + k]) * s;
            });
    });
}

// ---------- dropout ----------

Var dropout(Graph& g, Var x, double rate, bool training, uint64_t key, uint64_t salt) {
    if (!training || rate <= 0.0) return x;
    check(rate < 1.0, "dropout: rate must be < 1");
    const Tensor& xv = g.val(x);
    double keep = 1.0 - rate;
    Tensor mask(xv.shape);
    uint64_t mk = hash_combine(key, salt);
    kern::par_for(xv.size(), [&](int64_t i) {
        mask.data[i] = rng_uniform(mk, static_cast<uint64_t>(i)) < keep ? 1.0 / keep : 0.0;
    });
    Tensor out(xv.shape);
    kern::par_for(xv.size(), [&](int64_t i) { out.data[i] = xv.data[i] * mask.data[i]; });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, mask = std::move(mask)](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(mask.size(), [&](int64_t i) { gx[i] += go[i] * mask.data[i]; });
    });
}

// ---------- graph / attention structure ----------

Var khop_sum(Graph& g, Var x, const Csr& nbr, int B) {
    const Tensor& xv = g.val(x);
    int N = nbr.groups();
    int D = xv.cols();
    check(xv.rows() == static_cast<int64_t>(B) * N, "khop_sum: row count");
    Tensor out(xv.shape);
    const double* xp = xv.data.data();
    double* op = out.data.data();
    kern::par_for(static_cast<int64_t>(B) * N, [&](int64_t bi) {
        int64_t b = bi / N;
        int i = static_cast<int>(bi % N);
        double* dst = op + bi * D;
        for (int32_t e = nbr.offsets[i]; e < nbr.offsets[i + 1]; ++e) {
            const double* src = xp + (b * N + nbr.items[e]) * D;
            for (int d = 0; d < D; ++d) dst[d] += src[d];
        }
    });
    Var o = next_var(g);
    // The neighbor relation is symmetric (undirected reachability), so the
    // transpose scatter reuses the same csr.
    return g.make(std::move(out), {x}, [o, x, &nbr, B, N, D](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            kern::par_for(static_cast<int64_t>(B) * N, [&](int64_t bi) {
                int64_t b = bi / N;
                int j = static_cast<int>(bi % N);
                double* dst = gx + bi * D;
                for (int32_t e = nbr.offsets[j]; e < nbr.offsets[j + 1]; ++e) {
                    const double* src = go + (b * N + nbr.items[e]) * D;
                    for (int d = 0; d < D; ++d) dst[d] += src[d];
                }
            });
    });
}

Var edge_gather(Graph& g, Var x, const std::vector<int32_t>& nodes, int G, int N) {
    const Tensor& xv = g.val(x);
    int C = xv.cols();
    int64_t E = static_cast<int64_t>(nodes.size());
    check(xv.rows() == static_cast<int64_t>(G) * N, "edge_gather: row count");
    Tensor out({static_cast<int>(G * E), C});
    const double* xp = xv.data.data();
    double* op = out.data.data();
    kern::par_for(static_cast<int64_t>(G) * E, [&](int64_t ge) {
        int64_t grp = ge / E, e = ge % E;
        std::memcpy(op + ge * C, xp + (grp * N + nodes[e]) * C, sizeof(double) * C);
    });
    Var o = next_var(g);
    return g.make(std::move(out), {x}, [o, x, &nodes, G, N, C, E](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        if (double* gx = gg.grad_buf(x))
            for (int64_t grp = 0; grp < G; ++grp)
                for (int64_t e = 0; e < E; ++e) {
                    double* dst = gx + (grp * N + nodes[e]) * C;
                    const double* src = go + (grp * E + e) * C;
                    for (int c = 0; c < C; ++c) dst[c] += src[c];
                }
    });
}

Var edge_softmax(Graph& g, Var scores, const Csr& by_dst, int G) {
    const Tensor& sv = g.val(scores);
    check(sv.cols() == 1, "edge_softmax: [G*E,1] expected");
    int N = by_dst.groups();
    int64_t E = static_cast<int64_t>(by_dst.items.size());
    check(sv.rows() == static_cast<int64_t>(G) * E, "edge_softmax: row count");
    Tensor out(sv.shape);
    const double* sp = sv.data.data();
    double* op = out.data.data();
    kern::par_for(static_cast<int64_t>(G) * N, [&](int64_t gi) {
        int64_t grp = gi / N;
        int i = static_cast<int>(gi % N);
        int32_t lo = by_dst.offsets[i], hi = by_dst.offsets[i + 1];
        if (lo == hi) return;
        double mx = sp[grp * E + lo];
        for (int32_t e = lo + 1; e < hi; ++e) mx = std::max(mx, sp[grp * E + e]);
        double z = 0.0;
        for (int32_t e = lo; e < hi; ++e) z += std::exp(sp[grp * E + e] - mx);
        for (int32_t e = lo; e < hi; ++e) op[grp * E + e] = std::exp(sp[grp * E + e] - mx) / z;
    });
    Var o = next_var(g);
    return g.make(std::move(out), {scores}, [o, scores, &by_dst, G, N, E](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        if (double* gx = gg.grad_buf(scores))
            kern::par_for(static_cast<int64_t>(G) * N, [&](int64_t gi) {
                int64_t grp = gi / N;
                int i = static_cast<int>(gi % N);
                int32_t lo = by_dst.offsets[i], hi = by_dst.offsets[i + 1];
                if (lo == hi) return;
                double dot = 0.0;
                for (int32_t e = lo; e < hi; ++e) dot += go[grp * E + e] * ov[grp * E + e];
                for (int32_t e = lo; e < hi; ++e)
                    gx[grp * E + e] += ov[grp * E + e] * (go[grp * E + e] - dot);
            });
    });
}

Var edge_aggregate(Graph& g, Var alpha, Var msg, const Csr& by_dst, int G, int N) {
    const Tensor& av = g.val(alpha);
    const Tensor& mv = g.val(msg);
    int D = mv.cols();
    int64_t E = static_cast<int64_t>(by_dst.items.size());
    check(av.cols() == 1 && av.rows() == static_cast<int64_t>(G) * E, "edge_aggregate: alpha shape");
    check(mv.rows() == static_cast<int64_t>(G) * E, "edge_aggregate: msg rows");
    Tensor out({G * N, D});
    const double* ap = av.data.data();
    const double* mp = mv.data.data();
    double* op = out.data.data();
    kern::par_for(static_cast<int64_t>(G) * N, [&](int64_t gi) {
        int64_t grp = gi / N;
        int i = static_cast<int>(gi % N);
        double* dst = op + gi * D;
        for (int32_t e = by_dst.offsets[i]; e < by_dst.offsets[i + 1]; ++e) {
            double a = ap[grp * E + e];
            const double* src = mp + (grp * E + e) * D;
            for (int d = 0; d < D; ++d) dst[d] += a * src[d];
        }
    });
    Var o = next_var(g);
    return g.make(std::move(out), {alpha, msg}, [o, alpha, msg, &by_dst, G, N, D, E](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* av2 = gg.val(alpha).data.data();
        const double* mv2 = gg.val(msg).data.data();
        double* ga = gg.grad_buf(alpha);
        double* gm = gg.grad_buf(msg);
        if (!ga && !gm) return;
        kern::par_for(static_cast<int64_t>(G) * N, [&](int64_t gi) {
            int64_t grp = gi / N;
            int i = static_cast<int>(gi % N);
            const double* src = go + gi * D;
            for (int32_t e = by_dst.offsets[i]; e < by_dst.offsets[i + 1]; ++e) {
                int64_t row = grp * E + e;
                if (ga) {
                    double acc = 0.0;
                    for (int d = 0; d < D; ++d) acc += src[d] * mv2[row * D + d];
                    ga[row] += acc;
                }
                if (gm) {
                    double a = av2[row];
                    for (int d = 0; d < D; ++d) gm[row * D + d] += a * src[d];
                }
            }
        });
    });
}

Var shared_mix(Graph& g, Var A, Var x, int G) {
    const Tensor& Av = g.val(A);
    const Tensor& xv = g.val(x);
    int N = Av.cols();
    int D = xv.cols();
    check(Av.rows() == N, "shared_mix: A square");
    check(xv.rows() == static_cast<int64_t>(G) * N, "shared_mix: x rows");
    Tensor out(xv.shape);
    for (int grp = 0; grp < G; ++grp)
        kern::matmul(Av.data.data(), &xv.data[static_cast<int64_t>(grp) * N * D],
                     &out.data[static_cast<int64_t>(grp) * N * D], N, N, D);
    Var o = next_var(g);
    return g.make(std::move(out), {A, x}, [o, A, x, G, N, D](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* Ap = gg.val(A).data.data();
        const double* xp = gg.val(x).data.data();
        if (double* gA = gg.grad_buf(A))
            for (int grp = 0; grp < G; ++grp)
                kern::matmul_abt(go + static_cast<int64_t>(grp) * N * D,
                                 xp + static_cast<int64_t>(grp) * N * D, gA, N, D, N, true);
        if (double* gx = gg.grad_buf(x))
            for (int grp = 0; grp < G; ++grp)
                kern::matmul_atb(Ap, go + static_cast<int64_t>(grp) * N * D,
                                 gx + static_cast<int64_t>(grp) * N * D, N, N, D, true);
    });
}

Var bmm_scores(Graph& g, Var q, Var k, int T, int heads) {
    const Tensor& qv = g.val(q);
    const Tensor& kv = g.val(k);
    check(qv.same_shape(kv), "bmm_scores: q/k shape");
    int D = qv.cols();
    check(D % heads == 0, "bmm_scores: D divisible by heads");
    int dh = D / heads;
    int64_t G0 = qv.rows() / T;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out({static_cast<int>(G0) * heads * T, T});
    const double* qp = qv.data.data();
    const double* kp = kv.data.data();
    double* op = out.data.data();
    kern::par_for(G0 * heads, [&](int64_t gh) {
        int64_t g0 = gh / heads;
        int h = static_cast<int>(gh % heads);
        for (int i = 0; i < T; ++i)
            for (int j = 0; j < T; ++j) {
                double s = 0.0;
                const double* qr = qp + (g0 * T + i) * D + h * dh;
                const double* kr = kp + (g0 * T + j) * D + h * dh;
                for (int d = 0; d < dh; ++d) s += qr[d] * kr[d];
                op[(gh * T + i) * T + j] = s * scale;
            }
    });
    Var o = next_var(g);
    return g.make(std::move(out), {q, k}, [o, q, k, T, heads, dh, G0, scale](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* qp = gg.val(q).data.data();
        const double* kp = gg.val(k).data.data();
        int D = dh * heads;
        double* gq = gg.grad_buf(q);
        double* gk = gg.grad_buf(k);
        if (!gq && !gk) return;
        kern::par_for(G0, [&](int64_t g0) {
            for (int h = 0; h < heads; ++h) {
                int64_t gh = g0 * heads + h;
                for (int i = 0; i < T; ++i)
                    for (int j = 0; j < T; ++j) {
                        double d = go[(gh * T + i) * T + j] * scale;
                        const double* qr = qp + (g0 * T + i) * D + h * dh;
                        const double* kr = kp + (g0 * T + j) * D + h * dh;
                        if (gq) {
                            double* gqr = gq + (g0 * T + i) * D + h * dh;
                            for (int dd = 0; dd < dh; ++dd) gqr[dd] += d * kr[dd];
                        }
                        if (gk) {
                            double* gkr = gk + (g0 * T + j) * D + h * dh;
                            for (int dd = 0; dd < dh; ++dd) gkr[dd] += d * qr[dd];
                        }
                    }
            }
        });
    });
}

Var bmm_attend(Graph& g, Var attn, Var v, int T, int heads) {
    const Tensor& av = g.val(attn);
    const Tensor& vv = g.val(v);
    int D = vv.cols();
    int dh = D / heads;
    int64_t G0 = vv.rows() / T;
    check(av.cols() == T && av.rows() == G0 * heads * T, "bmm_attend: attn shape");
    Tensor out(vv.shape);
    const double* ap = av.data.data();
    const double* vp = vv.data.data();
    double* op = out.data.data();
    kern::par_for(G0 * heads, [&](int64_t gh) {
        int64_t g0 = gh / heads;
        int h = static_cast<int>(gh % heads);
        for (int i = 0; i < T; ++i) {
            double* orow = op + (g0 * T + i) * D + h * dh;
            for (int j = 0; j < T; ++j) {
                double a = ap[(gh * T + i) * T + j];
                const double* vrow = vp + (g0 * T + j) * D + h * dh;
                for (int d = 0; d < dh; ++d) orow[d] += a * vrow[d];
            }
        }
    });
    Var o = next_var(g);
    return g.make(std::move(out), {attn, v}, [o, attn, v, T, heads, dh, G0](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ap = gg.val(attn).data.data();
        const double* vp = gg.val(v).data.data();
        int D = dh * heads;
        double* ga = gg.grad_buf(attn);
        double* gv = gg.grad_buf(v);
        if (!ga && !gv) return;
        kern::par_for(G0, [&](int64_t g0) {
            for (int h = 0; h < heads; ++h) {
                int64_t gh = g0 * heads + h;
                for (int i = 0; i < T; ++i) {
                    const double* grow = go + (g0 * T + i) * D + h * dh;
                    for (int j = 0; j < T; ++j) {
                        if (ga) {
                            double acc = 0.0;
                            const double* vrow = vp + (g0 * T + j) * D + h * dh;
                            for (int d = 0; d < dh; ++d) acc += grow[d] * vrow[d];
                            ga[(gh * T + i) * T + j] += acc;
                        }
                        if (gv) {
                            double a = ap[(gh * T + i) * T + j];
                            double* gvrow = gv + (g0 * T + j) * D + h * dh;
                            for (int d = 0; d < dh; ++d) gvrow[d] += a * grow[d];
                        }
                    }
                }
            }
        });
    });
}

// ---------- sparse gating ----------

namespace {
// Indices of the k largest entries of row (ties toward lower index),
// descending by value.
void topk_indices(const double* row, int K, int k, int32_t* out) {
    std::vector<int32_t> idx(K);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int32_t a, int32_t b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return a < b;
    });
    std::copy(idx.begin(), idx.begin() + k, out);
}
}  // namespace

Var topk_softmax(Graph& g, Var logits, int k) {
    const Tensor& lv = g.val(logits);
    int64_t R = lv.rows();
    int K = lv.cols();
    int kk = std::min(k, K);
    Tensor out(lv.shape);
    std::vector<int32_t> sel(static_cast<size_t>(R) * kk);
    kern::par_for(R, [&](int64_t r) {
        const double* row = &lv.data[r * K];
        int32_t* s = &sel[r * kk];
        topk_indices(row, K, kk, s);
        double mx = row[s[0]];
        double z = 0.0;
        for (int j = 0; j < kk; ++j) z += std::exp(row[s[j]] - mx);
        for (int j = 0; j < kk; ++j) out.data[r * K + s[j]] = std::exp(row[s[j]] - mx) / z;
    });
    Var o = next_var(g);
    return g.make(std::move(out), {logits}, [o, logits, sel = std::move(sel), R, K, kk](Graph& gg) {
        const double* go = gg.grad(o).data.data();
        const double* ov = gg.val(o).data.data();
        if (double* gx = gg.grad_buf(logits))
            kern::par_for(R, [&](int64_t r) {
                const int32_t* s = &sel[r * kk];
                double dot = 0.0;
                for (int j = 0; j < kk; ++j) dot += go[r * K + s[j]] * ov[r * K + s[j]];
                for (int j = 0; j < kk; ++j) {
                    int32_t c = s[j];
                    gx[r * K + c] += ov[r * K + c] * (go[r * K + c] - dot);
                }
            });
    });
}

Var load_probs(Graph& g, Var clean, Var sigma, Tensor eps, int k) {
    const Tensor& cv = g.val(clean);
    const Tensor& sv = g.val(sigma);
    check(cv.same_shape(sv) && cv.same_shape(eps), "load_probs: shape mismatch");
    int64_t R = cv.rows();
    int K = cv.cols();
    if (k >= K) {
        // Every expert always active; constant, no gradient path.
        return g.constant(Tensor::full(cv.shape, 1.0));
    }
    Tensor out(cv.shape);
    // thr_idx[r*K+j] = index of the competing noisy logit that forms j's
    // activation threshold; z values cached for backward.
    std::vector<int32_t> thr_idx(static_cast<size_t>(R) * K);
    Tensor zs(cv.shape);
    const double floor_sigma = 1e-12;
    kern::par_for(R, [&](int64_t r) {
        std::vector<double> noisy(K);
        for (int j = 0; j < K; ++j) noisy[j] = cv.data[r * K + j] + eps.data[r * K + j] * sv.data[r * K + j];
        std::vector<int32_t> order(K);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
            if (noisy[a] != noisy[b]) return noisy[a] > noisy[b];
            return a < b;
        });
        std::vector<int> pos(K);
        for (int p = 0; p < K; ++p) pos[order[p]] = p;
        for (int j = 0; j < K; ++j) {
            // In the noisy top-k: threshold is the (k+1)-th largest overall
            // (never j itself); otherwise the k-th largest (also never j).
            int32_t m = pos[j] < k ? order[k] : order[k - 1];
            thr_idx[r * K + j] = m;
            double sj = std::max(sv.data[r * K + j], floor_sigma);
            double z = (cv.data[r * K + j] - noisy[m]) / sj;
            zs.data[r * K + j] = z;
            out.data[r * K + j] = norm_cdf(z);
        }
    });
    Var o = next_var(g);
    return g.make(std::move(out), {clean, sigma},
                  [o, clean, sigma, eps = std::move(eps), thr = std::move(thr_idx), zs = std::move(zs), R,
                   K, floor_sigma](Graph& gg) {
                      const double* go = gg.grad(o).data.data();
                      const double* svp = gg.val(sigma).data.data();
                      double* gc = gg.grad_buf(clean);
                      double* gs = gg.grad_buf(sigma);
                      if (!gc && !gs) return;
                      for (int64_t r = 0; r < R; ++r)
                          for (int j = 0; j < K; ++j) {
                              double z = zs.data[r * K + j];
                              double sj = std::max(svp[r * K + j], floor_sigma);
                              double coef = go[r * K + j] * norm_pdf(z) / sj;
                              if (coef == 0.0) continue;
                              int32_t m = thr[r * K + j];
                              // z = (clean_j - clean_m - eps_m*sigma_m) / sigma_j
                              if (gc) {
                                  gc[r * K + j] += coef;
                                  gc[r * K + m] -= coef;
                              }
                              if (gs) {
                                  gs[r * K + m] -= coef * eps.data[r * K + m];
                                  gs[r * K + j] -= coef * z;
                              }
                          }
                  });
}

Var mix_experts(Graph& g, Var weights, const std::vector<Var>& experts, int B, int T, int N) {
    const Tensor& wv = g.val(weights);
    int Ne = wv.cols();
    check(static_cast<int>(experts.size()) == Ne, "mix_experts: expert count");
    check(wv.rows() == static_cast<int64_t>(B) * N, "mix_experts: weight rows");
    int D = g.val(experts[0]).cols();
    int64_t R = static_cast<int64_t>(B) * T * N;
    for (Var e : experts) check(g.val(e).rows() == R && g.val(e).cols() == D, "mix_experts: expert shape");
    Tensor out({B, T, N, D});
    double* op = out.data.data();
    const double* wp = wv.data.data();
    std::vector<const double*> xs(Ne);
    for (int e = 0; e < Ne; ++e) xs[e] = g.val(experts[e]).data.data();
    kern::par_for(R, [&](int64_t row) {
        int64_t n = row % N;
        int64_t b = row / (static_cast<int64_t>(T) * N);
        const double* w = wp + (b * N + n) * Ne;
        double* dst = op + row * D;
        for (int e = 0; e < Ne; ++e) {
            double we = w[e];
            if (we == 0.0) continue;
            const double* src = xs[e] + row * D;
            for (int d = 0; d < D; ++d) dst[d] += we * src[d];
        }
    });
    Var o = next_var(g);
    std::vector<Var> ins(experts);
    ins.push_back(weights);
    return g.make(std::move(out), ins, [o, weights, experts, B, T, N, D](Graph& gg) {
        int Ne = static_cast<int>(experts.size());
        int64_t R = static_cast<int64_t>(B) * T * N;
        const double* go = gg.grad(o).data.data();
        const double* wp = gg.val(weights).data.data();
        double* gw = gg.grad_buf(weights);
        for (int e = 0; e < Ne; ++e) {
            double* gx = gg.grad_buf(experts[e]);
            const double* xv = gg.val(experts[e]).data.data();
            if (!gx && !gw) continue;
            for (int64_t row = 0; row < R; ++row) {
                int64_t n = row % N;
                int64_t b = row / (static_cast<int64_t>(T) * N);
                int64_t wrow = (b * N + n) * Ne + e;
                double we = wp[wrow];
                const double* dst = go + row * D;
                if (gx && we != 0.0) {
                    double* src = gx + row * D;
                    for (int d = 0; d < D; ++d) src[d] += we * dst[d];
                }
                if (gw) {
                    double acc = 0.0;
                    const double* src = xv + row * D;
                    for (int d = 0; d < D; ++d) acc += src[d] * dst[d];
                    gw[wrow] += acc;
                }
            }
        }
    });
}

}  // namespace cpmoe::nn
