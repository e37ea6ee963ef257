// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "capeq/population.hpp"
#include "capeq/price_functional.hpp"

namespace capeq {

/**
 * A strictly increasing strategy function z -> X_i(z) with X_i(0+) = 0 and
 * X_i(inf) = inf, either a power law K z^e or a table interpolated linearly
 * in (ln z, ln X).
 */
class StrategyFunction {
public:
    static StrategyFunction power_law(double coefficient, double exponent);
    static StrategyFunction tabulated(std::vector<double> z, std::vector<double> values);

    double log_value(double z) const;
    double value(double z) const;

    /// z X'_-(z) / X(z). For tables this is the left difference quotient of the
    /// interpolant and `difference_quotient` is set.
    double elasticity(double z, bool* difference_quotient = nullptr) const;

    bool is_power_law() const { return log_z_.empty(); }

private:
    double log_coefficient_ = 0.0;
    double exponent_ = 1.0;
    std::vector<double> log_z_;
    std::vector<double> log_values_;
};

/// One strategy per population member, in population order.
struct StrategyFamily {
    std::vector<StrategyFunction> members;
};

/// ln of the aggregation operator: -gamma ln((1+beta) sum_i w_i lambda_i (c_i^a_i v X_i(z)^a_i)).
double log_aggregate_I(const StrategyFamily& family, std::span<const ProducerType> population, double beta,
                       double gamma, double z);

double aggregate_I(const StrategyFamily& family, std::span<const ProducerType> population, double beta,
                   double gamma, double z);

struct DerivativeValue {
    double value = 0.0;
    bool difference_quotient = false;
};

/// Left derivative of the aggregation operator in z; always <= 0.
DerivativeValue aggregate_I_derivative(const StrategyFamily& family, std::span<const ProducerType> population,
                                       double beta, double gamma, double z);

/// z chi'_-(z) / chi(z) for chi the aggregation operator.
double aggregate_I_elasticity(const StrategyFamily& family, std::span<const ProducerType> population,
                              double beta, double gamma, double z, bool* difference_quotient = nullptr);

struct GridSpec {
    double pbar_min = 1e-3;
    double pbar_max = 1e3;
    std::size_t nodes = 400;
};

/// Equilibrium functionals tabulated on a p-bar grid and its image under h.
struct EquilibriumProfile {
    std::vector<std::string> producer_ids;
    std::vector<double> pbar;
    std::vector<double> psi;
    std::vector<double> h;
    std::vector<double> xbar;
    std::vector<double> phi;
    std::vector<double> u;                     ///< xbar * phi(xbar)
    std::vector<std::vector<double>> Phi_star;  ///< [producer][node]
    double kappa0_gamma = 0.0;                 ///< kappa0^(-gamma), the left limit of psi
    std::size_t first_strict_decrease = 0;     ///< first node where psi < kappa0^(-gamma)
    double max_fixed_point_residual = 0.0;
    std::size_t worst_fixed_point_node = 0;
};

/**
 * The competitive equilibrium built from the optimal price-threshold
 * strategies Psi_i(pbar) = K_i pbar^((1+beta)/(1-alpha_i)).
 *
 * psi = I[Psi] is evaluated in closed form per type; h(pbar) = pbar^(1+beta)/psi(pbar)
 * is inverted by guarded Newton in log coordinates; phi = psi o h^-1 and
 * Phi_i(xbar) = K_i (xbar phi(xbar))^(1/(1-alpha_i)).
 *
 * Construction throws DomainError when some producer has r <= mu.
 */
class Equilibrium {
public:
    Equilibrium(Population population, DerivedMarket market);

    const Population& population() const { return population_; }
    const DerivedMarket& market() const { return market_; }
    const StrategyFamily& psi_family() const { return psi_family_; }

    double K(std::size_t i) const { return K_[i]; }
    double psi_exponent(std::size_t i) const { return exponents_[i]; }
    double kappa0() const { return kappa0_; }
    double kappa0_gamma() const;

    double Psi(std::size_t i, double pbar) const;
    double log_psi(double pbar) const;
    double psi(double pbar) const;
    double psi_elasticity(double pbar) const;
    double psi_left_derivative(double pbar) const;

    double h(double pbar) const;
    double h_left_derivative(double pbar) const;
    double h_inverse(double xbar) const;

    double log_phi(double xbar) const;
    double phi(double xbar) const;
    double phi_elasticity(double xbar) const;
    double phi_left_derivative(double xbar) const;
    double Phi(std::size_t i, double xbar) const;

    /// pbar_i with Psi_i(pbar_i) = c_i, sorted ascending.
    std::vector<double> activation_pbar() const;
    std::vector<double> activation_xbar() const;

    /// Tabulates the profile and verifies I[Phi*] = phi* at every node. Throws
    /// NumericError naming the worst node when the residual exceeds `fixed_point_tol`.
    EquilibriumProfile tabulate(const GridSpec& grid, double fixed_point_tol = 1e-8) const;

private:
    double log_h(double log_pbar) const;

    Population population_;
    DerivedMarket market_;
    std::vector<double> K_;
    std::vector<double> exponents_;
    StrategyFamily psi_family_;
    double kappa0_ = 0.0;
};

/// phi* of an equilibrium, evaluated exactly (no interpolation).
class EquilibriumPhi final : public PriceFunctional {
public:
    explicit EquilibriumPhi(std::shared_ptr<const Equilibrium> eq) : eq_(std::move(eq)) {}
    double log_value(double xbar) const override { return eq_->log_phi(xbar); }
    double elasticity(double xbar) const override { return eq_->phi_elasticity(xbar); }
    std::vector<double> kinks() const override { return eq_->activation_xbar(); }
    double log_u_inverse(double log_u) const override;
    std::string describe() const override { return "equilibrium"; }

private:
    std::shared_ptr<const Equilibrium> eq_;
};

/**
 * phi interpolated linearly in (ln xbar, ln phi) from tabulated nodes.
 * Below the first node the value is held at kappa0^(-gamma) when the first
 * node is still on the flat branch; otherwise, and above the last node, the
 * end segments are extended as power laws and `covers` reports false.
 */
class TabulatedPhi final : public PriceFunctional {
public:
    TabulatedPhi(std::vector<double> xbar, std::vector<double> phi, double kappa0_gamma);
    static std::shared_ptr<TabulatedPhi> from_profile(const EquilibriumProfile& profile);

    double log_value(double xbar) const override;
    double elasticity(double xbar) const override;
    std::vector<double> kinks() const override { return xbar_; }
    std::string describe() const override { return "tabulated"; }
    bool covers(double xbar) const;

private:
    std::size_t segment(double log_x) const;

    std::vector<double> xbar_;
    std::vector<double> log_x_;
    std::vector<double> log_phi_;
    double log_kappa0_gamma_;
    bool flat_left_;
};

std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
    double half_width = 0.0;  ///< 95% normal-approximation half width
    std::size_t points = 0;
};

/// Least-squares slope of ln f against ln z for samples with z in [zmin, zmax].
/// Needs at least 8 points spanning two decades; otherwise DomainError.
SlopeFit asymptotic_slope(std::span<const double> z, std::span<const double> f, double zmin, double zmax);

/// The six large-argument log-log slopes of psi, -psi', phi, -phi', xbar phi, (xbar phi)'.
struct AsymptoticSlopes {
    double psi = 0.0;
    double psi_derivative = 0.0;
    double phi = 0.0;
    double phi_derivative = 0.0;
    double xphi = 0.0;
    double xphi_derivative = 0.0;
};

AsymptoticSlopes asymptotic_limits(double alpha_bar, double beta, double gamma);

/// Fits all six slopes from exact evaluations on `points` log-spaced samples of [zmin, zmax].
AsymptoticSlopes fit_asymptotic_slopes(const Equilibrium& eq, double zmin, double zmax, std::size_t points = 64);

}  // namespace capeq
