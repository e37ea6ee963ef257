// SPDX-License-Identifier: MIT
#include "capeq/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "capeq/errors.hpp"

namespace capeq {

namespace {

constexpr unsigned kMaxDepth = 15;

QuadratureResult gk_segment(const std::function<double(double)>& f, double a, double b, double rel_tol) {
    // Boost compares an error estimate taken on [-1, 1] with a tolerance on the
    // mapped integral, so short intervals never converge. Map to [-1, 1] here.
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto g = [&](double t) { return f(mid + half * t); };
    double err = 0.0;
    double l1 = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, -1.0, 1.0, kMaxDepth, rel_tol,
                                                                                  &err, &l1);
    return {half * v, half * err};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, double rel_tol) {
    if (a == b) return {};
    const double sign = a < b ? 1.0 : -1.0;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    std::vector<double> nodes{lo};
    for (double p : breakpoints)
        if (p > lo && p < hi) nodes.push_back(p);
    std::sort(nodes.begin() + 1, nodes.end());
    nodes.push_back(hi);
    QuadratureResult total;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if (nodes[i + 1] <= nodes[i]) continue;
        const auto seg = gk_segment(f, nodes[i], nodes[i + 1], rel_tol);
        total.value += seg.value;
        total.error += seg.error;
    }
    total.value *= sign;
    return total;
}

QuadratureResult integrate_exp_tail(const std::function<double(double)>& G, double s0,
                                    std::span<const double> breakpoints, double rel_tol) {
    constexpr double kChunk = 1.0;
    constexpr double kMaxSpan = 600.0;
    constexpr double kMinRate = 1e-6;

    double last_break = s0;
    for (double b : breakpoints)
        if (b > s0) last_break = std::max(last_break, b);

    QuadratureResult total;
    double s = s0;
    double prev_rate = std::nan("");
    while (true) {
        const double next = s + kChunk;
        const auto seg = integrate(G, s, next, breakpoints, rel_tol);
        total.value += seg.value;
        total.error += seg.error;
        s = next;
        if (s <= last_break) continue;

        const double g_prev = G(s - kChunk);
        const double g_end = G(s);
        if (g_end == 0.0) return total;
        const double rate = std::log(g_prev / g_end) / kChunk;
        const double drift = std::isfinite(prev_rate) ? std::abs(rate - prev_rate) : std::abs(rate);
        const bool stable = std::isfinite(prev_rate) && drift <= 1e-9 * std::abs(rate);
        prev_rate = rate;
        if (rate > kMinRate) {
            const double tail = g_end / rate;
            if (tail <= rel_tol * std::abs(total.value) || stable) {
                total.value += tail;
                total.error += tail * std::min(1.0, drift / rate);
                return total;
            }
        } else if (stable) {
            std::ostringstream os;
            os << "tail integral diverges: fitted decay rate " << rate << " <= " << kMinRate;
            throw NumericError(os.str());
        }
        if (s - s0 >= kMaxSpan) {
            std::ostringstream os;
            os << "tail integral does not converge: fitted decay rate " << rate << " at s = " << s;
            if (rate > kMinRate) {
                // Slowly but genuinely decaying: close the tail with the fitted rate.
                total.value += g_end / rate;
                total.error += g_end / rate;
                return total;
            }
            throw NumericError(os.str());
        }
        if (s - last_break > 40.0 && !(rate > kMinRate)) {
            std::ostringstream os;
            os << "tail integral diverges: fitted decay rate " << rate << " <= " << kMinRate;
            throw NumericError(os.str());
        }
    }
}

}  // namespace capeq
