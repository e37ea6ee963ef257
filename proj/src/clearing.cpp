// SPDX-License-Identifier: MIT
#include "capeq/clearing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "capeq/errors.hpp"
#include "capeq/root_finding.hpp"

namespace capeq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct AggregateTerms {
    double log_sum = 0.0;     // ln sum_i w_i lambda_i (c_i^a v X_i^a)
    double elasticity = 0.0;  // sum over active types of weight share * alpha_i * elasticity_i
    bool difference_quotient = false;
};

AggregateTerms aggregate_terms(const StrategyFamily& family, std::span<const ProducerType> population, double z,
                               bool want_elasticity) {
    if (population.empty()) throw DomainError("aggregation over an empty population");
    if (family.members.size() != population.size())
        throw DomainError("strategy family size does not match population size");
    if (z < 0.0) throw DomainError("aggregation level must be >= 0");

    const std::size_t n = population.size();
    std::vector<double> log_terms(n);
    std::vector<char> active(n, 0);
    double top = kNegInf;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = population[i];
        const double log_c = std::log(p.c);
        const double log_x = z > 0.0 ? family.members[i].log_value(z) : kNegInf;
        active[i] = log_x > log_c;
        log_terms[i] = std::log(p.weight * p.lambda) + p.alpha * std::max(log_c, log_x);
        top = std::max(top, log_terms[i]);
    }
    double sum = 0.0;
    for (double t : log_terms) sum += std::exp(t - top);
    AggregateTerms out;
    out.log_sum = top + std::log(sum);
    if (want_elasticity && z > 0.0) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            bool dq = false;
            const double e = family.members[i].elasticity(z, &dq);
            out.difference_quotient = out.difference_quotient || dq;
            acc += std::exp(log_terms[i] - out.log_sum) * population[i].alpha * e;
        }
        out.elasticity = acc;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// StrategyFunction

StrategyFunction StrategyFunction::power_law(double coefficient, double exponent) {
    if (!(coefficient > 0.0)) throw DomainError("power-law strategy coefficient must be > 0");
    if (!(exponent > 0.0)) throw DomainError("power-law strategy exponent must be > 0");
    StrategyFunction f;
    f.log_coefficient_ = std::log(coefficient);
    f.exponent_ = exponent;
    return f;
}

StrategyFunction StrategyFunction::tabulated(std::vector<double> z, std::vector<double> values) {
    if (z.size() != values.size() || z.size() < 2) throw DomainError("tabulated strategy needs >= 2 matching nodes");
    StrategyFunction f;
    f.log_z_.reserve(z.size());
    f.log_values_.reserve(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (!(z[j] > 0.0) || !(values[j] > 0.0)) throw DomainError("tabulated strategy nodes must be positive");
        if (j > 0 && !(z[j] > z[j - 1] && values[j] > values[j - 1]))
            throw DomainError("tabulated strategy must be strictly increasing");
        f.log_z_.push_back(std::log(z[j]));
        f.log_values_.push_back(std::log(values[j]));
    }
    return f;
}

double StrategyFunction::log_value(double z) const {
    const double lz = std::log(z);
    if (is_power_law()) return log_coefficient_ + exponent_ * lz;
    const auto it = std::lower_bound(log_z_.begin(), log_z_.end(), lz);
    const std::size_t idx = static_cast<std::size_t>(it - log_z_.begin());
    const std::size_t j = std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, log_z_.size() - 2);
    const double slope = (log_values_[j + 1] - log_values_[j]) / (log_z_[j + 1] - log_z_[j]);
    return log_values_[j] + slope * (lz - log_z_[j]);
}

double StrategyFunction::value(double z) const { return std::exp(log_value(z)); }

double StrategyFunction::elasticity(double z, bool* difference_quotient) const {
    if (is_power_law()) {
        if (difference_quotient) *difference_quotient = false;
        return exponent_;
    }
    if (difference_quotient) *difference_quotient = true;
    const double lz = std::log(z);
    const auto it = std::lower_bound(log_z_.begin(), log_z_.end(), lz);
    const std::size_t idx = static_cast<std::size_t>(it - log_z_.begin());
    const std::size_t j = std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, log_z_.size() - 2);
    return (log_values_[j + 1] - log_values_[j]) / (log_z_[j + 1] - log_z_[j]);
}

// ---------------------------------------------------------------------------
// Aggregation operator

double log_aggregate_I(const StrategyFamily& family, std::span<const ProducerType> population, double beta,
                       double gamma, double z) {
    const auto t = aggregate_terms(family, population, z, false);
    return -gamma * (std::log1p(beta) + t.log_sum);
}

double aggregate_I(const StrategyFamily& family, std::span<const ProducerType> population, double beta,
                   double gamma, double z) {
    return std::exp(log_aggregate_I(family, population, beta, gamma, z));
}

double aggregate_I_elasticity(const StrategyFamily& family, std::span<const ProducerType> population, double beta,
                              double gamma, double z, bool* difference_quotient) {
    (void)beta;
    const auto t = aggregate_terms(family, population, z, true);
    if (difference_quotient) *difference_quotient = t.difference_quotient;
    return -gamma * t.elasticity;
}

DerivativeValue aggregate_I_derivative(const StrategyFamily& family, std::span<const ProducerType> population,
                                       double beta, double gamma, double z) {
    DerivativeValue d;
    if (z <= 0.0) return d;
    const auto t = aggregate_terms(family, population, z, true);
    const double chi = std::exp(-gamma * (std::log1p(beta) + t.log_sum));
    d.value = -gamma * t.elasticity * chi / z;
    d.difference_quotient = t.difference_quotient;
    return d;
}

// ---------------------------------------------------------------------------
// Equilibrium

Equilibrium::Equilibrium(Population population, DerivedMarket market)
    : population_(std::move(population)), market_(market) {
    if (population_.empty()) throw DomainError("equilibrium needs a non-empty population");
    for (const auto& p : population_) {
        const double K = investment_coefficient(p, market_);
        const double e = (1.0 + market_.beta) / (1.0 - p.alpha);
        K_.push_back(K);
        exponents_.push_back(e);
        psi_family_.members.push_back(StrategyFunction::power_law(K, e));
    }
    kappa0_ = capeq::kappa0(population_, market_.beta);
}

double Equilibrium::kappa0_gamma() const { return std::pow(kappa0_, -market_.gamma); }

double Equilibrium::Psi(std::size_t i, double pbar) const { return K_[i] * std::pow(pbar, exponents_[i]); }

double Equilibrium::log_psi(double pbar) const {
    return log_aggregate_I(psi_family_, population_, market_.beta, market_.gamma, pbar);
}

double Equilibrium::psi(double pbar) const { return std::exp(log_psi(pbar)); }

double Equilibrium::psi_elasticity(double pbar) const {
    return aggregate_I_elasticity(psi_family_, population_, market_.beta, market_.gamma, pbar);
}

double Equilibrium::psi_left_derivative(double pbar) const {
    return aggregate_I_derivative(psi_family_, population_, market_.beta, market_.gamma, pbar).value;
}

double Equilibrium::log_h(double log_pbar) const {
    return (1.0 + market_.beta) * log_pbar - log_psi(std::exp(log_pbar));
}

double Equilibrium::h(double pbar) const {
    if (!(pbar > 0.0)) throw DomainError("h needs pbar > 0");
    return std::exp(log_h(std::log(pbar)));
}

double Equilibrium::h_left_derivative(double pbar) const {
    // h'/h = ((1+beta) - psi elasticity) / pbar
    return h(pbar) * ((1.0 + market_.beta) - psi_elasticity(pbar)) / pbar;
}

double Equilibrium::h_inverse(double xbar) const {
    if (!(xbar > 0.0)) throw DomainError("h_inverse needs xbar > 0");
    const double target = std::log(xbar);
    const double slope_floor = 1.0 + market_.beta;
    auto g = [&](double s) {
        const double p = std::exp(s);
        return std::pair{log_h(s) - target, slope_floor - psi_elasticity(p)};
    };
    // d ln h / d ln p >= 1 + beta, so one residual evaluation yields a bracket.
    const double s0 = target / slope_floor;
    const double d = g(s0).first;
    if (!std::isfinite(d)) {
        std::ostringstream os;
        os << "h_inverse: non-finite residual at xbar=" << xbar;
        throw NumericError(os.str());
    }
    if (d == 0.0) return std::exp(s0);
    const double other = s0 - d / slope_floor;
    Bracket b = d > 0.0 ? Bracket{other, s0} : Bracket{s0, other};
    // Guard against rounding at the bracket ends.
    const double pad = 1e-12 * (1.0 + std::abs(other));
    b.lo -= pad;
    b.hi += pad;
    return std::exp(guarded_newton(g, b, 1e-15));
}

double Equilibrium::log_phi(double xbar) const { return log_psi(h_inverse(xbar)); }

double Equilibrium::phi(double xbar) const { return std::exp(log_phi(xbar)); }

double Equilibrium::phi_elasticity(double xbar) const {
    const double e = psi_elasticity(h_inverse(xbar));
    return e / ((1.0 + market_.beta) - e);
}

double Equilibrium::phi_left_derivative(double xbar) const {
    return phi(xbar) * phi_elasticity(xbar) / xbar;
}

double Equilibrium::Phi(std::size_t i, double xbar) const { return Psi(i, h_inverse(xbar)); }

std::vector<double> Equilibrium::activation_pbar() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < population_.size(); ++i)
        out.push_back(std::pow(population_[i].c / K_[i], 1.0 / exponents_[i]));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> Equilibrium::activation_xbar() const {
    auto p = activation_pbar();
    for (double& v : p) v = h(v);
    return p;
}

EquilibriumProfile Equilibrium::tabulate(const GridSpec& grid, double fixed_point_tol) const {
    if (!(grid.pbar_min > 0.0 && grid.pbar_max > grid.pbar_min) || grid.nodes < 2)
        throw DomainError("grid needs 0 < pbar_min < pbar_max and >= 2 nodes");
    auto nodes = log_grid(grid.pbar_min, grid.pbar_max, grid.nodes);
    for (double a : activation_pbar())
        if (a > grid.pbar_min && a < grid.pbar_max) nodes.push_back(a);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    EquilibriumProfile prof;
    for (const auto& p : population_) prof.producer_ids.push_back(p.id);
    prof.kappa0_gamma = kappa0_gamma();
    prof.Phi_star.assign(population_.size(), {});
    prof.first_strict_decrease = nodes.size();

    // Phi* as a tabulated family over xbar feeds the fixed-point check.
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double p = nodes[j];
        const double lpsi = log_psi(p);
        const double psi_v = std::exp(lpsi);
        const double hv = std::exp((1.0 + market_.beta) * std::log(p) - lpsi);
        prof.pbar.push_back(p);
        prof.psi.push_back(psi_v);
        prof.h.push_back(hv);
        prof.xbar.push_back(hv);
        prof.phi.push_back(psi_v);
        prof.u.push_back(hv * psi_v);
        for (std::size_t i = 0; i < population_.size(); ++i)
            prof.Phi_star[i].push_back(K_[i] * std::pow(hv * psi_v, 1.0 / (1.0 - population_[i].alpha)));
        if (prof.first_strict_decrease == nodes.size() && psi_v < prof.kappa0_gamma * (1.0 - 1e-14))
            prof.first_strict_decrease = j;
    }

    for (std::size_t j = 0; j < nodes.size(); ++j) {
        // I[Phi*](xbar_j) from the tabulated Phi* values.
        double top = kNegInf;
        std::vector<double> terms(population_.size());
        for (std::size_t i = 0; i < population_.size(); ++i) {
            const auto& pt = population_[i];
            terms[i] = std::log(pt.weight * pt.lambda) +
                       pt.alpha * std::max(std::log(pt.c), std::log(prof.Phi_star[i][j]));
            top = std::max(top, terms[i]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - top);
        const double fixed = std::exp(-market_.gamma * (std::log1p(market_.beta) + top + std::log(s)));
        const double resid = std::abs(fixed / prof.phi[j] - 1.0);
        if (!(resid <= prof.max_fixed_point_residual)) {
            prof.max_fixed_point_residual = resid;
            prof.worst_fixed_point_node = j;
        }
    }
    if (!(prof.max_fixed_point_residual <= fixed_point_tol)) {
        std::ostringstream os;
        os << "fixed point I[Phi*] = phi* violated: residual " << prof.max_fixed_point_residual << " at xbar="
           << prof.xbar[prof.worst_fixed_point_node];
        throw NumericError(os.str());
    }
    return prof;
}

double EquilibriumPhi::log_u_inverse(double log_u) const {
    // xbar phi(xbar) = h^-1(xbar)^(1+beta), so the inverse is h at u^(1/(1+beta)).
    return eq_->h(std::exp(log_u / (1.0 + eq_->market().beta)));
}

// ---------------------------------------------------------------------------
// TabulatedPhi

TabulatedPhi::TabulatedPhi(std::vector<double> xbar, std::vector<double> phi, double kappa0_gamma)
    : xbar_(std::move(xbar)), log_kappa0_gamma_(std::log(kappa0_gamma)) {
    if (xbar_.size() != phi.size() || xbar_.size() < 2) throw DomainError("tabulated phi needs >= 2 nodes");
    for (std::size_t j = 0; j < xbar_.size(); ++j) {
        if (!(xbar_[j] > 0.0 && phi[j] > 0.0)) throw DomainError("tabulated phi nodes must be positive");
        if (j > 0 && !(xbar_[j] > xbar_[j - 1])) throw DomainError("tabulated phi grid must be increasing");
        log_x_.push_back(std::log(xbar_[j]));
        log_phi_.push_back(std::log(phi[j]));
    }
    flat_left_ = std::abs(log_phi_.front() - log_kappa0_gamma_) < 1e-14;
}

std::shared_ptr<TabulatedPhi> TabulatedPhi::from_profile(const EquilibriumProfile& profile) {
    return std::make_shared<TabulatedPhi>(profile.xbar, profile.phi, profile.kappa0_gamma);
}

std::size_t TabulatedPhi::segment(double lx) const {
    const auto it = std::lower_bound(log_x_.begin(), log_x_.end(), lx);
    const std::size_t idx = static_cast<std::size_t>(it - log_x_.begin());
    return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, log_x_.size() - 2);
}

double TabulatedPhi::log_value(double xbar) const {
    const double lx = std::log(xbar);
    if (lx <= log_x_.front() && flat_left_) return log_kappa0_gamma_;
    const std::size_t j = segment(lx);
    const double slope = (log_phi_[j + 1] - log_phi_[j]) / (log_x_[j + 1] - log_x_[j]);
    return log_phi_[j] + slope * (lx - log_x_[j]);
}

double TabulatedPhi::elasticity(double xbar) const {
    const double lx = std::log(xbar);
    if (lx <= log_x_.front() && flat_left_) return 0.0;
    const std::size_t j = segment(lx);
    return (log_phi_[j + 1] - log_phi_[j]) / (log_x_[j + 1] - log_x_[j]);
}

bool TabulatedPhi::covers(double xbar) const {
    return xbar <= xbar_.back() && (flat_left_ || xbar >= xbar_.front());
}

// ---------------------------------------------------------------------------
// Asymptotics

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw DomainError("log_grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(n);
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t j = 0; j < n; ++j) g[j] = std::exp(a + (b - a) * static_cast<double>(j) / static_cast<double>(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

SlopeFit asymptotic_slope(std::span<const double> z, std::span<const double> f, double zmin, double zmax) {
    if (z.size() != f.size()) throw DomainError("slope fit: sample sizes differ");
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j] < zmin || z[j] > zmax) continue;
        if (!(z[j] > 0.0 && f[j] > 0.0)) throw DomainError("slope fit needs positive samples");
        lx.push_back(std::log(z[j]));
        ly.push_back(std::log(f[j]));
    }
    if (lx.size() < 8) throw DomainError("slope fit needs at least 8 samples inside the fit range");
    const auto [mn, mx] = std::minmax_element(lx.begin(), lx.end());
    if (*mx - *mn < 2.0 * std::log(10.0)) throw DomainError("slope fit samples must span at least two decades");

    const double n = static_cast<double>(lx.size());
    const double mean_x = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double mean_y = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t j = 0; j < lx.size(); ++j) {
        sxx += (lx[j] - mean_x) * (lx[j] - mean_x);
        sxy += (lx[j] - mean_x) * (ly[j] - mean_y);
    }
    SlopeFit fit;
    fit.points = lx.size();
    fit.slope = sxy / sxx;
    const double intercept = mean_y - fit.slope * mean_x;
    double rss = 0.0;
    for (std::size_t j = 0; j < lx.size(); ++j) {
        const double e = ly[j] - intercept - fit.slope * lx[j];
        rss += e * e;
    }
    fit.stderr_ = std::sqrt(rss / (n - 2.0) / sxx);
    fit.half_width = 1.96 * fit.stderr_;
    return fit;
}

AsymptoticSlopes asymptotic_limits(double abar, double beta, double gamma) {
    AsymptoticSlopes s;
    s.psi = -abar * (1.0 + beta) * gamma / (1.0 - abar);
    s.psi_derivative = s.psi - 1.0;
    const double denom = 1.0 - abar + abar * gamma;
    s.phi = -abar * gamma / denom;
    s.phi_derivative = s.phi - 1.0;
    s.xphi = (1.0 - abar) / denom;
    s.xphi_derivative = -abar * gamma / denom;
    return s;
}

AsymptoticSlopes fit_asymptotic_slopes(const Equilibrium& eq, double zmin, double zmax, std::size_t points) {
    const auto z = log_grid(zmin, zmax, points);
    std::vector<double> psi, dpsi, phi, dphi, xphi, dxphi;
    for (double v : z) {
        psi.push_back(eq.psi(v));
        dpsi.push_back(-eq.psi_left_derivative(v));
        const double ph = eq.phi(v);
        const double e = eq.phi_elasticity(v);
        phi.push_back(ph);
        dphi.push_back(-ph * e / v);
        xphi.push_back(v * ph);
        dxphi.push_back(ph * (1.0 + e));
    }
    AsymptoticSlopes s;
    s.psi = asymptotic_slope(z, psi, zmin, zmax).slope;
    s.psi_derivative = asymptotic_slope(z, dpsi, zmin, zmax).slope;
    s.phi = asymptotic_slope(z, phi, zmin, zmax).slope;
    s.phi_derivative = asymptotic_slope(z, dphi, zmin, zmax).slope;
    s.xphi = asymptotic_slope(z, xphi, zmin, zmax).slope;
    s.xphi_derivative = asymptotic_slope(z, dxphi, zmin, zmax).slope;
    return s;
}

}  // namespace capeq
