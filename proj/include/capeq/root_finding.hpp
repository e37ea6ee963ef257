// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "capeq/errors.hpp"

namespace capeq {

struct Bracket {
    double lo;
    double hi;
};

/**
 * Root of a non-decreasing function on a bracket with g(lo) <= 0 <= g(hi).
 *
 * `g` returns {value, derivative}. A Newton step is taken whenever it lands
 * strictly inside the current bracket, otherwise the bracket is bisected.
 * Stops when the bracket width falls below `tol` (absolute in the argument;
 * callers work in log coordinates so this is a relative tolerance).
 */
template <class F>
double guarded_newton(F&& g, Bracket b, double tol, int max_iter = 200) {
    double lo = b.lo;
    double hi = b.hi;
    auto [glo, dlo] = g(lo);
    if (glo == 0.0) return lo;
    auto [ghi, dhi] = g(hi);
    if (ghi == 0.0) return hi;
    if (glo > 0.0 || ghi < 0.0) {
        std::ostringstream os;
        os << "root not bracketed on [" << lo << ", " << hi << "]: g(lo)=" << glo << ", g(hi)=" << ghi;
        throw NumericError(os.str());
    }
    tol = std::max(tol, 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)));
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        auto [gx, dx] = g(x);
        if (gx == 0.0) return x;
        if (gx < 0.0)
            lo = x;
        else
            hi = x;
        if (hi - lo <= tol) return 0.5 * (lo + hi);
        double next = x - gx / dx;
        if (!(dx > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
        // A Newton step that barely moves: probe the other side of the root.
        if (std::abs(next - x) < 0.25 * tol) next = gx < 0.0 ? std::min(x + tol, 0.5 * (x + hi)) : std::max(x - tol, 0.5 * (lo + x));
        x = next;
    }
    std::ostringstream os;
    os << "guarded Newton did not converge: bracket [" << lo << ", " << hi << "] after " << max_iter
       << " iterations";
    throw NumericError(os.str());
}

/**
 * Finds a bracket around the root of a non-decreasing `g` starting from
 * `guess`, stepping outward by `step` and doubling the step each time.
 */
template <class F>
Bracket expand_bracket(F&& g, double guess, double step, int max_expansions = 200) {
    double lo = guess;
    double hi = guess;
    const double g0 = g(guess).first;
    if (g0 == 0.0) return {guess, guess};
    for (int it = 0; it < max_expansions; ++it) {
        if (g0 < 0.0) {
            lo = hi;
            hi = hi + step;
            if (g(hi).first >= 0.0) return {lo, hi};
        } else {
            hi = lo;
            lo = lo - step;
            if (g(lo).first <= 0.0) return {lo, hi};
        }
        step *= 2.0;
    }
    std::ostringstream os;
    os << "bracket expansion failed from guess " << guess << " (g=" << g0 << ") after " << max_expansions
       << " expansions";
    throw NumericError(os.str());
}

}  // namespace capeq
