#pragma once

#include <map>
#include <string>

#include "cpmoe/params.hpp"

namespace cpmoe::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-7;  // decoupled: theta -= lr * wd * theta
};

// Adam with decoupled weight decay. Moment buffers are keyed by parameter
// name; updates iterate the store in lexicographic order.
class Adam {
  public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
    void step(ParameterStore& params, const std::map<std::string, Tensor>& grads);
    int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

}  // namespace cpmoe::nn
