// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace capeq {

/**
 * A running-maximum price functional phi(xbar), so that the price satisfies
 * P^(1+beta) = X phi(Xbar).
 *
 * Implementations work in log coordinates: values of phi and of
 * u(xbar) = xbar phi(xbar) are handled through their logarithms so that
 * evaluation far into the tails neither overflows nor underflows.
 * Derivatives are left-hand derivatives.
 */
class PriceFunctional {
public:
    virtual ~PriceFunctional() = default;

    virtual double log_value(double xbar) const = 0;

    /// xbar phi'_-(xbar) / phi(xbar).
    virtual double elasticity(double xbar) const = 0;

    /// Points where phi has a kink (quadrature breakpoints).
    virtual std::vector<double> kinks() const { return {}; }

    virtual std::string describe() const = 0;

    /// Inverse of xbar -> ln(xbar phi(xbar)); bracketed monotone root-finding by default.
    virtual double log_u_inverse(double log_u) const;

    double value(double xbar) const;
    double left_derivative(double xbar) const;
    double log_u(double xbar) const;
};

using PriceFunctionalPtr = std::shared_ptr<const PriceFunctional>;

/// phi == phi0.
class ConstantPhi final : public PriceFunctional {
public:
    explicit ConstantPhi(double phi0);
    double log_value(double) const override { return log_phi0_; }
    double elasticity(double) const override { return 0.0; }
    double log_u_inverse(double log_u) const override { return std::exp(log_u - log_phi0_); }
    std::string describe() const override;

private:
    double log_phi0_;
};

/// phi(xbar) = scale * xbar^(-decay) with decay < 1 so that xbar phi increases.
class PowerLawPhi final : public PriceFunctional {
public:
    PowerLawPhi(double scale, double decay);
    double log_value(double xbar) const override;
    double elasticity(double) const override { return -decay_; }
    double log_u_inverse(double log_u) const override;
    std::string describe() const override;

private:
    double log_scale_;
    double decay_;
};

}  // namespace capeq
