// SPDX-License-Identifier: MIT
#include "capeq/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "capeq/clearing.hpp"
#include "capeq/errors.hpp"
#include "capeq/quadrature.hpp"

namespace capeq {

namespace {

constexpr double kSingularBand = 1e-8;

bool near_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

}  // namespace

std::string to_string(Region r) {
    switch (r) {
        case Region::C1: return "C1";
        case Region::C2: return "C2";
        case Region::C3: return "C3";
        case Region::S1Surface: return "S1_surface";
        case Region::S2Surface: return "S2_surface";
    }
    return "?";
}

ControlSolution::ControlSolution(ProducerType producer, DerivedMarket market, PriceFunctionalPtr phi,
                                 ControlOptions options)
    : p_(std::move(producer)), mk_(market), phi_(std::move(phi)), opt_(options), cache_(std::make_shared<Cache>()) {
    if (!phi_) throw DomainError("control solution needs a price functional");
    const auto roots = characteristic_roots(mk_.mu, mk_.sigma, p_.r);
    n_ = roots.n;
    m_ = roots.m;
    K_ = investment_coefficient(p_, mk_);
    rmu_ = p_.r - mk_.mu;
    for (double k : phi_->kinks())
        if (k > 0.0) log_kinks_.push_back(std::log(k));
    std::sort(log_kinks_.begin(), log_kinks_.end());
}

double ControlSolution::G(double c, double xbar) const {
    return std::exp((1.0 - p_.alpha) * std::log(c / K_) - phi_->log_value(xbar));
}

double ControlSolution::Gamma(double x, double xbar) const {
    return K_ * std::exp((std::log(x) + phi_->log_value(xbar)) / (1.0 - p_.alpha));
}

double ControlSolution::Phi(double xbar) const { return K_ * std::exp(phi_->log_u(xbar) / (1.0 - p_.alpha)); }

double ControlSolution::Phi_left_derivative(double xbar) const {
    return Phi(xbar) * (1.0 + phi_->elasticity(xbar)) / ((1.0 - p_.alpha) * xbar);
}

double ControlSolution::Phi_inverse(double c) const {
    if (!(c > 0.0)) throw DomainError("Phi_inverse needs c > 0");
    return phi_->log_u_inverse((1.0 - p_.alpha) * std::log(c / K_));
}

Region ControlSolution::classify(const State& s) const {
    const double tol = opt_.tie_tolerance;
    const double gamma = Gamma(s.x, s.xbar);
    if (near_rel(s.c, gamma, tol)) return Region::S1Surface;
    if (s.c < gamma) return Region::C1;
    const double phi_c = Phi(s.xbar);
    if (near_rel(s.c, phi_c, tol)) return Region::S2Surface;
    if (s.c > phi_c) return Region::C3;
    return Region::C2;
}

Region ControlSolution::formula_region(const State& s) const {
    const double tol = opt_.tie_tolerance;
    if (s.c >= Phi(s.xbar) * (1.0 - tol)) return Region::C3;
    if (s.c >= Gamma(s.x, s.xbar) * (1.0 - tol)) return Region::C2;
    return Region::C1;
}

ControlSolution::CoefficientPair ControlSolution::coefficient_A_pair(double xbar) const {
    if (!(xbar > 0.0)) throw DomainError("coefficient A needs xbar > 0");
    const double a = p_.alpha;
    const double n = n_;
    const double k = p_.k;
    const double s0 = std::log(xbar);
    const double lu0 = phi_->log_u(xbar);

    // Both integrals are written in s = ln y and scaled by xbar^(-n) Phi(xbar).
    auto ratio = [&](double s) { return std::exp(-n * (s - s0) + (phi_->log_u(std::exp(s)) - lu0) / (1.0 - a)); };
    auto j1 = [&](double s) { return ratio(s); };
    auto j2 = [&](double s) { return ratio(s) * (1.0 + phi_->elasticity(std::exp(s))) / (1.0 - a); };

    const auto i1 = integrate_exp_tail(j1, s0, log_kinks_, opt_.quad_rel_tol);
    const auto i2 = integrate_exp_tail(j2, s0, log_kinks_, opt_.quad_rel_tol);

    const double scale = std::exp(-n * s0 + (1.0 - a) * std::log(Phi(xbar)));
    const double first = scale * (-((1.0 - a) * (n - 1.0) + 1.0) * k / (a * (n - 1.0)) + (1.0 - a) * n * k / a * i1.value);
    const double second = scale * (-k / (a * (n - 1.0)) + (1.0 - a) * k / a * i2.value);
    return {first, second};
}

double ControlSolution::coefficient_A(double xbar) const {
    {
        std::lock_guard<std::mutex> lock(cache_->mutex);
        const auto it = cache_->A.find(xbar);
        if (it != cache_->A.end()) return it->second;
    }
    const auto [first, second] = coefficient_A_pair(xbar);
    const double gap = std::abs(first - second) / std::max(std::abs(first), std::abs(second));
    if (!(gap <= opt_.coefficient_agreement)) {
        std::ostringstream os;
        os << "coefficient A expressions disagree at xbar=" << xbar << ": " << first << " vs " << second
           << " (relative gap " << gap << ")";
        throw NumericError(os.str());
    }
    const double value = 0.5 * (first + second);
    std::lock_guard<std::mutex> lock(cache_->mutex);
    cache_->A.emplace(xbar, value);
    return value;
}

double ControlSolution::f_tilde(double xbar) const {
    const double e = n_ * (1.0 - p_.alpha) - 1.0;
    if (std::abs(e) < kSingularBand)
        throw DomainError("B-coefficient singularity: n_i(1-alpha_i) = 1");
    const double phi_c = Phi(xbar);
    return std::pow(phi_c, p_.alpha) * coefficient_A(xbar) -
           p_.k / ((n_ - 1.0) * e) * std::exp(-n_ * std::log(xbar)) * phi_c;
}

double ControlSolution::coefficient_B(double c, double xbar) const {
    const double e = n_ * (1.0 - p_.alpha) - 1.0;
    if (std::abs(e) < kSingularBand)
        throw DomainError("B-coefficient singularity: n_i(1-alpha_i) = 1");
    const double phi_c = Phi(xbar);
    // Equivalent to f~ + k c^(1-n(1-a)) xbar^-n Phi^(n(1-a)) / ((n-1) e), without the cancellation near c = Phi.
    const double tail = p_.k / ((n_ - 1.0) * e) * std::exp(-n_ * std::log(xbar)) * phi_c *
                        std::expm1(e * std::log(phi_c / c));
    return std::pow(phi_c, p_.alpha) * coefficient_A(xbar) + tail;
}

double ControlSolution::f(double y) const {
    const double xi = Phi_inverse(y);
    return -p_.k / (n_ - 1.0) * std::pow(y, -p_.alpha) * std::pow(xi, -n_) - p_.alpha / y * coefficient_A(xi);
}

ControlSolution::Slice ControlSolution::slice(double c, double xbar, Region region) const {
    const double ca = std::pow(c, p_.alpha);
    const double phi_x = phi_->value(xbar);
    Slice sl{0.0, ca * phi_x / rmu_};
    if (region == Region::C2 || region == Region::S1Surface) {
        sl.a = coefficient_B(c, xbar);
        return sl;
    }
    if (region != Region::C3 && region != Region::S2Surface)
        throw DomainError("slice is defined for the waiting regions only");

    const double xi = Phi_inverse(c);
    const double s0 = std::log(xbar);
    const double s1 = std::log(xi);
    const double lphi0 = phi_->log_value(xbar);
    // int_xbar^xi y^-n phi(y) dy, scaled by xbar^(1-n) phi(xbar)
    auto g = [&](double s) { return std::exp((1.0 - n_) * (s - s0) + phi_->log_value(std::exp(s)) - lphi0); };
    const double integral = integrate(g, s0, s1, log_kinks_, opt_.quad_rel_tol).value;
    const double base = std::exp((1.0 - n_) * s0 + lphi0);
    const double end = std::exp((1.0 - n_) * s1 + phi_->log_value(xi));
    sl.a = ca * (coefficient_A(xi) + (end - base + (n_ - 1.0) * base * integral) / rmu_);
    return sl;
}

double ControlSolution::value_w_in_region(const State& s, Region region) const {
    if (region == Region::C1) {
        const double g = Gamma(s.x, s.xbar);
        const State on_surface{g, s.x, s.xbar};
        const Region inner = g >= Phi(s.xbar) * (1.0 - opt_.tie_tolerance) ? Region::C3 : Region::C2;
        return value_w_in_region(on_surface, inner) - p_.k * (g - s.c);
    }
    const auto sl = slice(s.c, s.xbar, region);
    return sl.a * std::pow(s.x, n_) + sl.b * s.x;
}

double ControlSolution::value_w(const State& s) const {
    if (!(s.c > 0.0 && s.x > 0.0 && s.x <= s.xbar)) throw DomainError("state must satisfy c > 0 and 0 < x <= xbar");
    return value_w_in_region(s, formula_region(s));
}

HjbResidual ControlSolution::hjb_residual(const State& s) const { return hjb_residual(s, opt_.fd_relative_step); }

HjbResidual ControlSolution::hjb_residual(const State& s, double relative_step) const {
    if (!(s.c > 0.0 && s.x > 0.0 && s.x <= s.xbar)) throw DomainError("state must satisfy c > 0 and 0 < x <= xbar");
    HjbResidual out;
    out.region = classify(s);
    const Region fr = formula_region(s);
    auto w = [&](double c, double x, double xbar) { return value_w_in_region({c, x, xbar}, fr); };

    // Pick the widest step whose stencil stays in the region; otherwise continue the formula.
    auto choose_step = [&](auto&& stays) {
        double h = relative_step;
        for (int attempt = 0; attempt <= opt_.fd_shrink_attempts; ++attempt, h /= 10.0)
            if (stays(h)) return h;
        out.region_locked = true;
        return relative_step;
    };

    const double hx = s.x * choose_step([&](double h) {
        const double d = h * s.x;
        return s.x + d <= s.xbar && formula_region({s.c, s.x + d, s.xbar}) == fr &&
               formula_region({s.c, s.x - d, s.xbar}) == fr;
    });
    const double w0 = w(s.c, s.x, s.xbar);
    const double wp = w(s.c, s.x + hx, s.xbar);
    const double wm = w(s.c, s.x - hx, s.xbar);
    const double wx = (wp - wm) / (2.0 * hx);
    const double wxx = (wp - 2.0 * w0 + wm) / (hx * hx);
    const double sig2 = mk_.sigma * mk_.sigma;
    out.pde_scale = std::pow(s.c, p_.alpha) * s.x * phi_->value(s.xbar);
    out.pde_residual = 0.5 * sig2 * s.x * s.x * wxx + mk_.mu * s.x * wx - p_.r * w0 + out.pde_scale;

    const double hc = s.c * choose_step([&](double h) {
        const double d = h * s.c;
        return formula_region({s.c + d, s.x, s.xbar}) == fr && formula_region({s.c - d, s.x, s.xbar}) == fr;
    });
    out.gradient_slack = (w(s.c + hc, s.x, s.xbar) - w(s.c - hc, s.x, s.xbar)) / (2.0 * hc) - p_.k;

    out.boundary_slack = std::numeric_limits<double>::quiet_NaN();
    if (s.x == s.xbar && fr == Region::C3) {
        const double hb = relative_step * s.xbar;
        const double wz = (w(s.c, s.x, s.xbar + hb) - w(s.c, s.x, s.xbar - hb)) / (2.0 * hb);
        out.boundary_slack = s.xbar * wz / w0;
        out.boundary_evaluated = true;
    }
    return out;
}

SmoothPastingReport ControlSolution::smooth_pasting_check(double c, double xbar) const {
    SmoothPastingReport rep;
    rep.c = c;
    rep.xbar = xbar;
    rep.G = G(c, xbar);
    const double h = opt_.fd_relative_step * c;
    auto wc = [&](double x) {
        // One-sided second-order difference into the waiting region c > Gamma(x, xbar).
        auto w = [&](double cc) { return value_w_in_region({cc, x, xbar}, Region::C2); };
        return (-3.0 * w(c) + 4.0 * w(c + h) - w(c + 2.0 * h)) / (2.0 * h);
    };
    rep.wc_at_G = wc(rep.G);
    const double hx = opt_.fd_relative_step * rep.G;
    rep.wcx_at_G = rep.G * (wc(rep.G + hx) - wc(rep.G - hx)) / (2.0 * hx) / p_.k;

    const double phi_c = Phi(xbar);
    const double A = coefficient_A(xbar);
    const double fPhi = f(phi_c);
    const double xphi = xbar * phi_->value(xbar);
    const double core = std::pow(phi_c, p_.alpha - 1.0) * (p_.alpha * A + phi_c * fPhi) * std::pow(xbar, n_);
    const double particular = p_.alpha / rmu_ * std::pow(phi_c, p_.alpha - 1.0) * xphi;
    rep.fb1 = core + particular;
    rep.fb2 = n_ * core + particular;

    const double hb = opt_.fd_relative_step * xbar;
    const double dA = (coefficient_A(xbar + hb) - coefficient_A(xbar - hb)) / (2.0 * hb);
    const double dPhi = Phi_left_derivative(xbar);
    const double xn = std::pow(xbar, n_);
    const double dphi_term = xbar * phi_->left_derivative(xbar) / rmu_;
    rep.fb3 = (dA - fPhi * dPhi) * xn + dphi_term;
    rep.fb3_scale = std::abs(dA) * xn + std::abs(fPhi * dPhi) * xn + std::abs(dphi_term);
    return rep;
}

double ControlSolution::G_root_integral(double c, double xbar) const {
    const double g = G(c, xbar);
    const double ratio = p_.alpha * std::pow(c, p_.alpha - 1.0) * g * phi_->value(xbar) / (p_.r * p_.k);
    const double power = -1.0 / m_;
    // Substituting u = (y/G)^(-m) turns the weight y^(-m-1) into a constant.
    auto integrand = [&](double u) { return ratio * std::pow(u, power) - 1.0; };
    return integrate(integrand, 0.0, 1.0, {}, 1e-12).value;
}

double ControlSolution::growth_slope(double lo, double hi) const {
    const auto z = log_grid(lo, hi, 64);
    std::vector<double> v;
    v.reserve(z.size());
    for (double x : z) v.push_back(x * std::pow(Phi(x), p_.alpha));
    return asymptotic_slope(z, v, lo, hi).slope;
}

}  // namespace capeq
