// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "capeq/clearing.hpp"
#include "capeq/population.hpp"

namespace capeq::testing {

// Single-type market with hand-computable equilibrium: n = 2, m = -2, K = 1,
// psi = (1 v pbar^2)^-1, phi = 1 ^ xbar^(-1/2), Phi = xbar^2 ^ xbar.
inline DerivedMarket s1_market() { return market_from_gbm(1.0, 1.0, 0.5, 1.0, 1.0); }

inline ProducerType s1_producer(double alpha = 0.5, double c = 1.0) {
    ProducerType p;
    p.id = "a";
    p.c = c;
    p.alpha = alpha;
    p.lambda = 0.5;
    p.k = 1.0 / 6.0;
    p.r = 2.0;
    p.weight = 1.0;
    return p;
}

inline Population s1_population() { return {s1_producer()}; }

inline std::shared_ptr<const Equilibrium> s1_equilibrium() {
    return std::make_shared<const Equilibrium>(s1_population(), s1_market());
}

inline double s1_phi(double xbar) { return xbar <= 1.0 ? 1.0 : 1.0 / std::sqrt(xbar); }
inline double s1_Phi(double xbar) { return xbar <= 1.0 ? xbar * xbar : xbar; }
inline double s1_psi(double pbar) { return pbar <= 1.0 ? 1.0 : 1.0 / (pbar * pbar); }

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

inline std::string config_dir() { return CAPEQ_CONFIG_DIR; }

}  // namespace capeq::testing
