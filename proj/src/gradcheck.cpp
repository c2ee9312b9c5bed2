#include "cpmoe/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpmoe/rng.hpp"

namespace cpmoe::nn {

FdReport finite_difference_check(const std::function<double(ParameterStore&)>& loss,
                                 const std::map<std::string, Tensor>& analytic_grads,
                                 ParameterStore& params, double h, double tol, int coords_per_tensor,
                                 uint64_t seed) {
    FdReport rep;
    for (auto& [name, theta] : params.tensors) {
        auto git = analytic_grads.find(name);
        int64_t n = theta.size();
        std::vector<int64_t> coords(n);
        std::iota(coords.begin(), coords.end(), 0);
        if (n > coords_per_tensor) {
            // Seeded partial Fisher-Yates: first coords_per_tensor entries.
            RngStream rs(hash_combine(seed, mix64(std::hash<std::string>{}(name))));
            for (int i = 0; i < coords_per_tensor; ++i) {
                int64_t j = i + rs.below(n - i);
                std::swap(coords[i], coords[j]);
            }
            coords.resize(coords_per_tensor);
        }
        double tensor_max = 0.0;
        for (int64_t c : coords) {
            double orig = theta.data[c];
            theta.data[c] = orig + h;
            double fp = loss(params);
            theta.data[c] = orig - h;
            double fm = loss(params);
            theta.data[c] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = git != analytic_grads.end() ? git->second.data[c] : 0.0;
            double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
            double rel = std::fabs(analytic - numeric) / denom;
            ++rep.coords_checked;
            tensor_max = std::max(tensor_max, rel);
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = {name, c, analytic, numeric, rel};
            }
        }
        rep.per_tensor_max.emplace_back(name, tensor_max);
    }
    rep.pass = rep.max_rel_err <= tol;
    return rep;
}

}  // namespace cpmoe::nn
