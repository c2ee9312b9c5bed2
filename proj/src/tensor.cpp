#include "cpmoe/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cpmoe {

int64_t Tensor::numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int e : s) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + shape_str(s));
        n *= e;
    }
    return n;
}

Tensor Tensor::full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    t.fill(v);
    return t;
}

Tensor Tensor::from(std::vector<int> s, std::initializer_list<double> d) {
    Tensor t(std::move(s));
    if (static_cast<int64_t>(d.size()) != t.size())
        throw std::invalid_argument("initializer size does not match shape " + shape_str(t.shape));
    std::copy(d.begin(), d.end(), t.data.begin());
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::reshaped(std::vector<int> s) const {
    if (numel(s) != size()) throw std::invalid_argument("reshape " + shape_str(shape) + " -> " + shape_str(s));
    return Tensor(std::move(s), data);
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

}  // namespace cpmoe
