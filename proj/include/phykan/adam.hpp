#pragma once

#include "phykan/tensor.hpp"

#include <cmath>
#include <vector>

namespace phykan::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. State is per-parameter first/second
// moment estimates; step order follows the parameter list, so identical
// lists and gradients give identical trajectories.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (auto* p : params_) {
            m_.emplace_back(p->shape().count(), 0.0);
            v_.emplace_back(p->shape().count(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            auto& val = params_[pi]->value();
            const auto& g = params_[pi]->grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < val.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                val[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
            }
        }
    }

    long steps_taken() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace phykan::ad
