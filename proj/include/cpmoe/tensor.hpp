#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace cpmoe {

// Dense row-major tensor of doubles. Shape is a list of positive extents;
// a rank-0 tensor is not used, scalars are shape {1}.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) { data.assign(numel(shape), 0.0); }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static int64_t numel(const std::vector<int>& s);
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor from(std::vector<int> s, std::initializer_list<double> d);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    // Rows/cols view: every op in this codebase treats a tensor as a
    // (product of leading dims) x (last dim) matrix.
    int64_t rows() const { return shape.empty() ? 0 : size() / shape.back(); }
    int cols() const { return shape.empty() ? 0 : shape.back(); }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }
    double& at2(int64_t r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    double at2(int64_t r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    Tensor reshaped(std::vector<int> s) const;
};

std::string shape_str(const std::vector<int>& s);

}  // namespace cpmoe
