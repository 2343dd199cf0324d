#pragma once

// Central finite-difference gradient oracle used across the test suites.
// Independent of the tape: it re-evaluates the loss closure at perturbed
// parameter values and compares against the recorded gradients.

#include "phykan/rng.hpp"
#include "phykan/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace phykan::testing {

struct FdReport {
    double max_rel_err = 0.0;
    long checked = 0;
};

// loss_fn must rebuild the computation from scratch (fresh tape) using the
// current parameter values and return the scalar loss value.
inline FdReport fd_gradient_check(std::vector<ad::Parameter*> params,
                                  const std::function<double()>& loss_fn,
                                  const std::function<void()>& backward_fn,
                                  long samples_per_param = 20, double h = 1e-5,
                                  std::uint64_t seed = 1234) {
    for (auto* p : params) p->zero_grad();
    backward_fn();

    Rng rng(seed);
    FdReport rep;
    for (auto* p : params) {
        const long n = p->shape().count();
        const long m = std::min(samples_per_param, n);
        for (long s = 0; s < m; ++s) {
            long i = (n <= samples_per_param) ? s : static_cast<long>(rng.uniform() * n);
            double orig = p->value()[i];
            p->value()[i] = orig + h;
            double fp = loss_fn();
            p->value()[i] = orig - h;
            double fm = loss_fn();
            p->value()[i] = orig;
            double fd = (fp - fm) / (2.0 * h);
            double an = p->grad()[i];
            double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
            double rel = std::fabs(fd - an) / denom;
            if (rel > rep.max_rel_err) rep.max_rel_err = rel;
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace phykan::testing
