#include "cpmoe/metrics.hpp"

#include <stdexcept>

namespace cpmoe::train {

std::vector<int8_t> argmax_rows(const Tensor& logits) {
    int64_t r = logits.rows();
    int k = logits.cols();
    std::vector<int8_t> out(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) {
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (logits.at2(i, c) > logits.at2(i, best)) best = c;
        out[static_cast<size_t>(i)] = static_cast<int8_t>(best);
    }
    return out;
}

MetricReport evaluate(const std::vector<int8_t>& y, const std::vector<int8_t>& y_hat) {
    if (y.size() != y_hat.size()) throw std::runtime_error("evaluate: length mismatch");
    MetricReport r;
    int64_t correct = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0) continue;
        if (y[i] > 2 || y_hat[i] < 0 || y_hat[i] > 2)
            throw std::runtime_error("evaluate: class out of range");
        r.confusion[y[i]][y_hat[i]]++;
        r.evaluated++;
        if (y[i] == y_hat[i]) correct++;
    }
    r.accuracy = r.evaluated > 0 ? static_cast<double>(correct) / r.evaluated : 0.0;

    auto prf = [&](int c) {
        int64_t tp = r.confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < 3; ++o) {
            if (o == c) continue;
            fp += r.confusion[o][c];
            fn += r.confusion[c][o];
        }
        double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        return std::array<double, 3>{prec, rec, f1};
    };
    for (int c = 0; c < 3; ++c) r.f1[c] = prf(c)[2];
    auto congested = prf(2);
    r.precision = congested[0];
    r.recall = congested[1];
    r.c_f1 = congested[2];
    r.w_f1 = 0.2 * r.f1[0] + 0.2 * r.f1[1] + 0.6 * r.f1[2];
    return r;
}

}  // namespace cpmoe::train
