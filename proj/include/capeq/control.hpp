// SPDX-License-Identifier: MIT
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "capeq/population.hpp"
#include "capeq/price_functional.hpp"

namespace capeq {

enum class Region { C1, C2, C3, S1Surface, S2Surface };

std::string to_string(Region r);

/// A point of the control problem's state space, 0 < x <= xbar.
struct State {
    double c;
    double x;
    double xbar;
};

struct ControlOptions {
    double quad_rel_tol = 1e-13;
    double coefficient_agreement = 1e-7;  ///< max relative gap between the two A expressions
    double tie_tolerance = 1e-12;         ///< relative tolerance for surface labels
    double fd_relative_step = 1e-4;
    int fd_shrink_attempts = 3;
};

/// Finite-difference residuals of the HJB equation at one state.
struct HjbResidual {
    Region region = Region::C2;
    double pde_residual = 0.0;    ///< L w + c^a x phi(xbar)
    double pde_scale = 0.0;       ///< c^a x phi(xbar)
    double gradient_slack = 0.0;  ///< w_c - k
    double boundary_slack = 0.0;  ///< w_xbar at x = xbar; NaN unless evaluated
    bool boundary_evaluated = false;
    bool region_locked = false;   ///< a stencil crossed a surface and was continued analytically
};

struct SmoothPastingReport {
    double c = 0.0;
    double xbar = 0.0;
    double G = 0.0;
    double wc_at_G = 0.0;    ///< one-sided w_c at x = G
    double wcx_at_G = 0.0;   ///< one-sided w_cx at x = G
    double fb1 = 0.0;        ///< analytic left side of the first pasting equation (should equal k)
    double fb2 = 0.0;        ///< should be 0
    double fb3 = 0.0;        ///< w_xbar condition residual
    double fb3_scale = 0.0;  ///< sum of magnitudes of the FB3 terms
};

/**
 * Closed-form solution of one producer's singular control problem against a
 * given price functional phi.
 *
 *   G(c, xbar)     = c^(1-a) / (K^(1-a) phi(xbar))      (investment boundary in x)
 *   Gamma(x, xbar) = K (x phi(xbar))^(1/(1-a))           (its inverse in c)
 *   Phi(xbar)      = Gamma(xbar, xbar)
 *
 * The value function is a x^n + b x on each (c, xbar) slice of the waiting
 * regions and is extended linearly in c (slope k) into the investment region.
 *
 * A(xbar) is the expensive ingredient: it is computed by two independent tail
 * quadratures and memoised per xbar. Instances are safe to share across
 * threads.
 */
class ControlSolution {
public:
    ControlSolution(ProducerType producer, DerivedMarket market, PriceFunctionalPtr phi,
                    ControlOptions options = {});

    const ProducerType& producer() const { return p_; }
    const DerivedMarket& market() const { return mk_; }
    const PriceFunctional& phi() const { return *phi_; }
    PriceFunctionalPtr phi_ptr() const { return phi_; }
    const ControlOptions& options() const { return opt_; }
    double n() const { return n_; }
    double m() const { return m_; }
    double K() const { return K_; }

    double G(double c, double xbar) const;
    double Gamma(double x, double xbar) const;
    double Phi(double xbar) const;
    double Phi_left_derivative(double xbar) const;
    double Phi_inverse(double c) const;

    Region classify(const State& s) const;

    struct CoefficientPair {
        double first;
        double second;
    };
    /// Both integral expressions for A(xbar), without the agreement check.
    CoefficientPair coefficient_A_pair(double xbar) const;
    /// A(xbar); throws NumericError when the two expressions disagree.
    double coefficient_A(double xbar) const;
    double coefficient_B(double c, double xbar) const;
    double f_tilde(double xbar) const;
    double f(double y) const;

    /// w = a x^n + b x at fixed (c, xbar), continuing the formula of `region` (C2 or C3).
    struct Slice {
        double a;
        double b;
    };
    Slice slice(double c, double xbar, Region region) const;

    double value_w(const State& s) const;
    /// Evaluates the formula of `region` at s, also outside that region.
    double value_w_in_region(const State& s, Region region) const;

    HjbResidual hjb_residual(const State& s) const;
    HjbResidual hjb_residual(const State& s, double relative_step) const;
    SmoothPastingReport smooth_pasting_check(double c, double xbar) const;

    /// int_0^G y^(-m-1) (a c^(a-1) y phi(xbar) - r k) dy, relative to r k G^(-m) / (-m).
    double G_root_integral(double c, double xbar) const;

    /// Fitted log-log slope of xbar Phi^a(xbar) on [lo, hi].
    double growth_slope(double lo = 1.0, double hi = 1e6) const;

private:
    Region formula_region(const State& s) const;

    ProducerType p_;
    DerivedMarket mk_;
    PriceFunctionalPtr phi_;
    ControlOptions opt_;
    double n_ = 0.0;
    double m_ = 0.0;
    double K_ = 0.0;
    double rmu_ = 0.0;
    std::vector<double> log_kinks_;

    struct Cache {
        std::mutex mutex;
        std::map<double, double> A;
    };
    std::shared_ptr<Cache> cache_;
};

}  // namespace capeq
