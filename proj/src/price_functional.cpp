// SPDX-License-Identifier: MIT
#include "capeq/price_functional.hpp"

#include <cmath>
#include <sstream>

#include "capeq/errors.hpp"
#include "capeq/root_finding.hpp"

namespace capeq {

double PriceFunctional::value(double xbar) const { return std::exp(log_value(xbar)); }

double PriceFunctional::left_derivative(double xbar) const {
    return value(xbar) * elasticity(xbar) / xbar;
}

double PriceFunctional::log_u(double xbar) const { return std::log(xbar) + log_value(xbar); }

double PriceFunctional::log_u_inverse(double target) const {
    auto g = [&](double s) {
        const double xbar = std::exp(s);
        return std::pair{s + log_value(xbar) - target, 1.0 + elasticity(xbar)};
    };
    const double guess = target - log_value(1.0);
    const Bracket b = expand_bracket(g, guess, 1.0);
    return std::exp(guarded_newton(g, b, 1e-14));
}

ConstantPhi::ConstantPhi(double phi0) {
    if (!(phi0 > 0.0)) throw DomainError("constant phi must be > 0");
    log_phi0_ = std::log(phi0);
}

std::string ConstantPhi::describe() const {
    std::ostringstream os;
    os << "constant(" << std::exp(log_phi0_) << ")";
    return os.str();
}

PowerLawPhi::PowerLawPhi(double scale, double decay) : decay_(decay) {
    if (!(scale > 0.0)) throw DomainError("power-law phi scale must be > 0");
    if (!(decay >= 0.0 && decay < 1.0)) throw DomainError("power-law phi decay must lie in [0,1)");
    log_scale_ = std::log(scale);
}

double PowerLawPhi::log_value(double xbar) const { return log_scale_ - decay_ * std::log(xbar); }

double PowerLawPhi::log_u_inverse(double log_u) const {
    return std::exp((log_u - log_scale_) / (1.0 - decay_));
}

std::string PowerLawPhi::describe() const {
    std::ostringstream os;
    os << "power_law(" << std::exp(log_scale_) << ", -" << decay_ << ")";
    return os.str();
}

}  // namespace capeq
