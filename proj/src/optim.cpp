#include "cpmoe/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cpmoe::nn {

void Adam::step(ParameterStore& params, const std::map<std::string, Tensor>& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, theta] : params.tensors) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // parameter not touched this step
        const Tensor& grad = git->second;
        if (!grad.same_shape(theta)) throw std::invalid_argument("adam: grad shape mismatch for " + name);
        Tensor& m = m_.try_emplace(name, Tensor::zeros(theta.shape)).first->second;
        Tensor& v = v_.try_emplace(name, Tensor::zeros(theta.shape)).first->second;
        for (int64_t i = 0; i < theta.size(); ++i) {
            double gi = grad.data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gi;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gi * gi;
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            theta.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.lr * cfg_.weight_decay * theta.data[i];
        }
    }
}

}  // namespace cpmoe::nn
