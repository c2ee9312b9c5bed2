#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cpmoe/tensor.hpp"

namespace cpmoe::train {

struct MetricReport {
    std::array<std::array<int64_t, 3>, 3> confusion{};  // [true][predicted]
    double accuracy = 0.0;
    double recall = 0.0, precision = 0.0, c_f1 = 0.0;  // w.r.t. the congested class
    std::array<double, 3> f1{};
    double w_f1 = 0.0;  // 0.2*F1_0 + 0.2*F1_1 + 0.6*F1_2
    int64_t evaluated = 0;
};

// Hard class per row; ties resolve toward the lower class.
std::vector<int8_t> argmax_rows(const Tensor& logits);

// Confusion-matrix metrics over aligned label/prediction arrays; entries with
// label -1 are skipped. Any zero denominator yields metric 0.
MetricReport evaluate(const std::vector<int8_t>& y, const std::vector<int8_t>& y_hat);

}  // namespace cpmoe::train
