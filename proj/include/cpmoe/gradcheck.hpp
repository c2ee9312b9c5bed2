#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cpmoe/params.hpp"

namespace cpmoe::nn {

struct FdCoordResult {
    std::string name;
    int64_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct FdReport {
    bool pass = false;
    double max_rel_err = 0.0;
    FdCoordResult worst;
    int64_t coords_checked = 0;
    std::vector<std::pair<std::string, double>> per_tensor_max;
};

// Central-difference verification of analytic gradients. For each parameter
// tensor, checks a seeded random sample of at least `coords_per_tensor`
// coordinates (all of them for smaller tensors):
//   numeric = (f(theta + h e_i) - f(theta - h e_i)) / (2h)
//   rel_err = |analytic - numeric| / max(|analytic|, |numeric|, 1e-3)
// `loss` must be a deterministic function of the parameters (stochastic
// draws frozen by the caller).
FdReport finite_difference_check(const std::function<double(ParameterStore&)>& loss,
                                 const std::map<std::string, Tensor>& analytic_grads,
                                 ParameterStore& params, double h = 1e-5, double tol = 1e-4,
                                 int coords_per_tensor = 32, uint64_t seed = 0);

}  // namespace cpmoe::nn
