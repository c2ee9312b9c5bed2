#include "cpmoe/wavelet.hpp"

#include <cmath>
#include <stdexcept>

namespace cpmoe {

namespace {
const double kInvSqrt2 = 0.7071067811865475244;
}

WaveletPair dwt_haar(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("dwt: empty input");
    WaveletPair p;
    p.orig_len = static_cast<int>(x.size());
    std::vector<double> xp = x;
    if (xp.size() % 2 != 0) xp.push_back(xp.back());
    size_t half = xp.size() / 2;
    p.approx.resize(half);
    p.detail.resize(half);
    for (size_t k = 0; k < half; ++k) {
        p.approx[k] = (xp[2 * k] + xp[2 * k + 1]) * kInvSqrt2;
        p.detail[k] = (xp[2 * k] - xp[2 * k + 1]) * kInvSqrt2;
    }
    return p;
}

std::vector<double> idwt_haar(const WaveletPair& p) {
    if (p.approx.size() != p.detail.size()) throw std::invalid_argument("idwt: band size mismatch");
    std::vector<double> x(2 * p.approx.size());
    for (size_t k = 0; k < p.approx.size(); ++k) {
        x[2 * k] = (p.approx[k] + p.detail[k]) * kInvSqrt2;
        x[2 * k + 1] = (p.approx[k] - p.detail[k]) * kInvSqrt2;
    }
    x.resize(p.orig_len);
    return x;
}

WaveletCoeffs wavedec_haar(const std::vector<double>& x, int levels) {
    if (levels < 1) throw std::invalid_argument("wavedec: levels must be >= 1");
    WaveletCoeffs c;
    std::vector<double> cur = x;
    for (int l = 0; l < levels; ++l) {
        c.lengths.push_back(static_cast<int>(cur.size()));
        WaveletPair p = dwt_haar(cur);
        c.details.push_back(std::move(p.detail));
        cur = std::move(p.approx);
    }
    c.approx = std::move(cur);
    return c;
}

std::vector<double> waverec_haar(const WaveletCoeffs& c) {
    std::vector<double> cur = c.approx;
    for (int l = static_cast<int>(c.details.size()) - 1; l >= 0; --l) {
        WaveletPair p;
        p.approx = std::move(cur);
        p.detail = c.details[l];
        p.orig_len = c.lengths[l];
        cur = idwt_haar(p);
    }
    return cur;
}

std::vector<double> wavelet_trend(const std::vector<double>& x, int levels) {
    WaveletCoeffs c = wavedec_haar(x, levels);
    for (auto& d : c.details) std::fill(d.begin(), d.end(), 0.0);
    return waverec_haar(c);
}

}  // namespace cpmoe
