// SPDX-License-Identifier: MIT
#pragma once

#include <functional>
#include <span>

namespace capeq {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  ///< estimated absolute error
};

/// Adaptive Gauss-Kronrod on [a, b], splitting at every breakpoint strictly
/// inside the interval.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, double rel_tol);

/**
 * Integral over [s0, inf) of a positive integrand that decays exponentially
 * for large s. Callers pass power-law integrands in log coordinates
 * s = ln y, where a power-law tail becomes an exponential one.
 *
 * Unit-length chunks are integrated until the closed-form tail G(s)/rate,
 * with the decay rate fitted from the last chunk, is negligible or the
 * fitted rate has stabilised. Throws NumericError when the fitted rate
 * indicates divergence.
 */
QuadratureResult integrate_exp_tail(const std::function<double(double)>& G, double s0,
                                    std::span<const double> breakpoints, double rel_tol);

}  // namespace capeq
