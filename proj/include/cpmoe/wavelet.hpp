#pragma once

#include <vector>

namespace cpmoe {

// Single-level Haar analysis / synthesis:
//   A[k] = (x[2k] + x[2k+1]) / sqrt(2),  D[k] = (x[2k] - x[2k+1]) / sqrt(2)
// Odd-length inputs are symmetrically padded with their last sample before
// splitting; idwt truncates back to the recorded length, so idwt(dwt(x)) == x
// exactly at any length.
struct WaveletPair {
    std::vector<double> approx;
    std::vector<double> detail;
    int orig_len = 0;
};

WaveletPair dwt_haar(const std::vector<double>& x);
std::vector<double> idwt_haar(const WaveletPair& p);

// Multi-level decomposition: approx is cascaded `levels` times.
// details[l] holds the detail band produced at level l+1.
struct WaveletCoeffs {
    std::vector<double> approx;
    std::vector<std::vector<double>> details;
    std::vector<int> lengths;  // input length at each level, outermost first
};

WaveletCoeffs wavedec_haar(const std::vector<double>& x, int levels);
std::vector<double> waverec_haar(const WaveletCoeffs& c);

// Low-frequency trend: all detail bands zeroed, then reconstructed.
std::vector<double> wavelet_trend(const std::vector<double>& x, int levels);

}  // namespace cpmoe
