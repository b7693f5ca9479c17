#pragma once

// Finite-difference gradient harness shared by the unit and acceptance
// suites. Central differences at 64-bit, h = 1e-5 unless stated.

#include <cmath>
#include <functional>
#include <vector>

#include "ramangeo/graph.hpp"
#include "ramangeo/rng.hpp"

namespace testsupport {

// loss_fn must be a pure function of the current parameter values (re-seed
// any rng it uses internally so repeated calls see identical randomness).
// Analytic gradients are taken from params[i]->grad as currently stored.
inline double max_fd_rel_error(const std::vector<ramangeo::NodePtr<double>>& params,
                               const std::function<double()>& loss_fn, double h = 1e-5) {
    double worst = 0.0;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double lp = loss_fn();
            p->value[i] = saved - h;
            const double lm = loss_fn();
            p->value[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double analytic = p->grad[i];
            const double rel = std::fabs(analytic - fd) / std::max(1.0, std::fabs(analytic));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Same check restricted to a seeded random subset of coordinates per tensor,
// for models too large to probe exhaustively.
inline double max_fd_rel_error_sampled(const std::vector<ramangeo::NodePtr<double>>& params,
                                       const std::function<double()>& loss_fn,
                                       std::size_t coords_per_tensor, ramangeo::Rng& pick,
                                       double h = 1e-5) {
    double worst = 0.0;
    for (const auto& p : params) {
        const std::size_t n = p->value.size();
        const std::size_t probes = std::min(coords_per_tensor, n);
        for (std::size_t t = 0; t < probes; ++t) {
            const std::size_t i = n <= coords_per_tensor
                                      ? t
                                      : static_cast<std::size_t>(ramangeo::uniform_below(pick, n));
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double lp = loss_fn();
            p->value[i] = saved - h;
            const double lm = loss_fn();
            p->value[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double analytic = p->grad[i];
            const double rel = std::fabs(analytic - fd) / std::max(1.0, std::fabs(analytic));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace testsupport
