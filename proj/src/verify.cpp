// SPDX-License-Identifier: MIT
#include "capeq/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "capeq/clearing.hpp"
#include "capeq/control.hpp"
#include "capeq/errors.hpp"
#include "capeq/paths.hpp"

namespace capeq {

using nlohmann::json;

std::string to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Skip: return "skip";
    }
    return "?";
}

json CheckResult::to_json() const {
    json j{{"id", id}, {"scenario", scenario}, {"status", capeq::to_string(status)}, {"relation", relation}};
    j["measured"] = std::isfinite(measured) ? json(measured) : json(std::to_string(measured));
    j["tolerance"] = std::isfinite(tolerance) ? json(tolerance) : json(std::to_string(tolerance));
    j["notes"] = notes;
    return j;
}

namespace {

CheckResult make(std::string id, const Scenario& s, double measured, double tolerance, std::string relation,
                 bool ok, std::string notes) {
    CheckResult r;
    r.id = std::move(id);
    r.scenario = s.id;
    r.measured = measured;
    r.tolerance = tolerance;
    r.relation = std::move(relation);
    r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
    r.notes = std::move(notes);
    return r;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

CheckResult check_at_most(std::string id, const Scenario& s, double measured, double tolerance, std::string notes) {
    return make(std::move(id), s, measured, tolerance, "<=", measured <= tolerance, std::move(notes));
}

CheckResult check_below(std::string id, const Scenario& s, double measured, double tolerance, std::string notes) {
    return make(std::move(id), s, measured, tolerance, "<", measured < tolerance, std::move(notes));
}

CheckResult check_above(std::string id, const Scenario& s, double measured, double tolerance, std::string notes) {
    return make(std::move(id), s, measured, tolerance, ">", measured > tolerance, std::move(notes));
}

CheckResult check_within(std::string id, const Scenario& s, double measured, double lo, double hi, std::string notes) {
    std::string n = "range [" + fmt(lo) + ", " + fmt(hi) + "]";
    if (!notes.empty()) n += "; " + notes;
    return make(std::move(id), s, measured, hi, "in", measured >= lo && measured <= hi, std::move(n));
}

CheckResult skipped(std::string id, const Scenario& s, std::string why) {
    CheckResult r;
    r.id = std::move(id);
    r.scenario = s.id;
    r.status = CheckStatus::Skip;
    r.measured = std::numeric_limits<double>::quiet_NaN();
    r.tolerance = std::numeric_limits<double>::quiet_NaN();
    r.notes = std::move(why);
    return r;
}

// ---------------------------------------------------------------------------
// identities of the characteristic roots

namespace {

struct RootErrors {
    double sum;      // n + m - 1 = -2 mu / sigma^2
    double product;  // n m = -2 r / sigma^2
    double spread;   // r - mu = sigma^2 (n - 1)(1 - m) / 2
};

RootErrors root_errors(double mu, double sigma, double r, CharacteristicRoots roots) {
    const double s2 = sigma * sigma;
    const double n = roots.n;
    const double m = roots.m;
    RootErrors e{};
    e.sum = std::abs((n + m - 1.0) + 2.0 * mu / s2) / (std::abs(n) + std::abs(m) + 1.0);
    e.product = std::abs(n * m + 2.0 * r / s2) / (2.0 * r / s2);
    e.spread = std::abs((r - mu) - 0.5 * s2 * (n - 1.0) * (1.0 - m)) / (std::abs(r) + std::abs(mu));
    return e;
}

}  // namespace

std::vector<CheckResult> run_identity_suite(const Scenario& s, std::size_t random_draws) {
    std::vector<CheckResult> out;
    const double tol = s.tolerances.identity_rel;
    RootErrors worst{};
    bool signs_ok = true;
    for (const auto& p : s.producers) {
        const auto roots = characteristic_roots(s.market.mu, s.market.sigma, p.r);
        const auto e = root_errors(s.market.mu, s.market.sigma, p.r, roots);
        worst.sum = std::max(worst.sum, e.sum);
        worst.product = std::max(worst.product, e.product);
        worst.spread = std::max(worst.spread, e.spread);
        signs_ok = signs_ok && roots.m < 0.0 && roots.n > 0.0 && ((p.r > s.market.mu) == (roots.n > 1.0));
    }
    out.push_back(check_at_most("identity.scenario.sum", s, worst.sum, tol));
    out.push_back(check_at_most("identity.scenario.product", s, worst.product, tol));
    out.push_back(check_at_most("identity.scenario.spread", s, worst.spread, tol));
    out.push_back(check_at_most("identity.scenario.root_signs", s, signs_ok ? 0.0 : 1.0, 0.0,
                                "m < 0 < n and (n > 1 iff r > mu)"));

    std::mt19937_64 rng(s.simulation.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    RootErrors rw{};
    for (std::size_t d = 0; d < random_draws; ++d) {
        const double mu = -1.0 + 2.0 * U(rng);
        const double sigma = 0.05 + 1.95 * U(rng);
        const double r = 0.01 + 2.99 * U(rng);
        const auto e = root_errors(mu, sigma, r, characteristic_roots(mu, sigma, r));
        rw.sum = std::max(rw.sum, e.sum);
        rw.product = std::max(rw.product, e.product);
        rw.spread = std::max(rw.spread, e.spread);
    }
    const std::string note = std::to_string(random_draws) + " draws";
    out.push_back(check_at_most("identity.random.sum", s, rw.sum, tol, note));
    out.push_back(check_at_most("identity.random.product", s, rw.product, tol, note));
    out.push_back(check_at_most("identity.random.spread", s, rw.spread, tol, note));

    // The suite must notice a root that is off by 1e-6.
    const auto& p = s.producers.front();
    auto roots = characteristic_roots(s.market.mu, s.market.sigma, p.r);
    roots.n += 1e-6;
    const auto bad = root_errors(s.market.mu, s.market.sigma, p.r, roots);
    out.push_back(check_above("negative_control.corrupted_root", s, std::max({bad.sum, bad.product, bad.spread}), tol,
                              "identity error of n + 1e-6 must exceed the tolerance"));
    return out;
}

// ---------------------------------------------------------------------------
// equilibrium

std::vector<CheckResult> run_equilibrium_suite(const Scenario& s) {
    std::vector<CheckResult> out;
    const auto& tol = s.tolerances;
    const auto report = validate_assumptions(s.producers, s.market);
    std::string reasons;
    for (const auto& f : report.failures) reasons += f + "; ";
    for (const auto& pc : report.producers)
        for (const auto& f : pc.failures) reasons += pc.id + ": " + f + "; ";
    const bool usable = reasons.empty();
    out.push_back(check_at_most("equilibrium.assumptions", s, usable ? 0.0 : 1.0, 0.0, reasons));
    if (!usable) return out;

    const Equilibrium eq(s.producers, s.market);
    EquilibriumProfile prof;
    try {
        prof = eq.tabulate(s.grid, std::numeric_limits<double>::infinity());
    } catch (const std::exception& e) {
        out.push_back(check_at_most("equilibrium.tabulate", s, 1.0, 0.0, e.what()));
        return out;
    }
    const std::size_t N = prof.pbar.size();
    const double kg = prof.kappa0_gamma;

    double psi_rise = -std::numeric_limits<double>::infinity();
    double h_growth = std::numeric_limits<double>::infinity();
    double h_slope_min = std::numeric_limits<double>::infinity();
    double u_growth = std::numeric_limits<double>::infinity();
    double Phi_growth = std::numeric_limits<double>::infinity();
    double phi_excess = -std::numeric_limits<double>::infinity();
    double strict_rise = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < N; ++j) {
        psi_rise = std::max(psi_rise, prof.psi[j + 1] / prof.psi[j] - 1.0);
        h_growth = std::min(h_growth, prof.h[j + 1] / prof.h[j] - 1.0);
        h_slope_min = std::min(h_slope_min, (prof.h[j + 1] - prof.h[j]) / (prof.pbar[j + 1] - prof.pbar[j]));
        u_growth = std::min(u_growth, prof.u[j + 1] / prof.u[j] - 1.0);
        for (const auto& col : prof.Phi_star) Phi_growth = std::min(Phi_growth, col[j + 1] / col[j] - 1.0);
        if (j >= prof.first_strict_decrease) strict_rise = std::max(strict_rise, prof.psi[j + 1] / prof.psi[j] - 1.0);
    }
    for (double v : prof.phi) phi_excess = std::max(phi_excess, v / kg - 1.0);

    out.push_back(check_at_most("equilibrium.psi_nonincreasing", s, psi_rise, 0.0, "max relative rise between nodes"));
    out.push_back(check_above("equilibrium.h_increasing", s, h_growth, 0.0, "min relative growth between nodes"));
    out.push_back(check_above("equilibrium.xphi_increasing", s, u_growth, 0.0));
    out.push_back(check_above("equilibrium.Phi_increasing", s, Phi_growth, 0.0));
    out.push_back(check_at_most("equilibrium.phi_bounded", s, phi_excess, tol.left_limit_rel, "max phi / kappa0^-gamma - 1"));
    out.push_back(check_above("equilibrium.h_slope_positive", s, h_slope_min, 0.0,
                              "smallest difference quotient of h on the grid"));

    const auto act = eq.activation_pbar();
    const double first_act = act.front();
    std::size_t first_after = N;
    for (std::size_t j = 0; j < N; ++j)
        if (prof.pbar[j] >= first_act * (1.0 - 1e-12)) {
            first_after = j;
            break;
        }
    out.push_back(check_at_most("equilibrium.strict_decrease_start", s,
                                std::abs(static_cast<double>(prof.first_strict_decrease) -
                                         static_cast<double>(std::min(first_after + 1, N))),
                                1.0, "first node with psi < kappa0^-gamma versus the first activation point"));
    if (prof.first_strict_decrease + 1 < N)
        out.push_back(check_below("equilibrium.strictly_decreasing_after_activation", s, strict_rise, 0.0));

    const double p_small = 1e-6 * first_act;
    out.push_back(check_at_most("equilibrium.left_limit", s, std::abs(eq.psi(p_small) / kg - 1.0),
                                tol.left_limit_rel, "psi(0+) against kappa0^-gamma"));

    std::mt19937_64 rng(s.simulation.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> U(std::log(prof.xbar.front()), std::log(prof.xbar.back()));
    double rt = 0.0;
    for (int d = 0; d < 1000; ++d) {
        const double x = std::exp(U(rng));
        rt = std::max(rt, std::abs(eq.h(eq.h_inverse(x)) / x - 1.0));
    }
    out.push_back(check_at_most("equilibrium.h_roundtrip", s, rt, tol.roundtrip_rel, "1000 log-uniform xbar"));
    out.push_back(check_at_most("equilibrium.fixed_point", s, prof.max_fixed_point_residual, tol.fixed_point_rel,
                                "worst node xbar=" + fmt(prof.xbar[prof.worst_fixed_point_node])));

    // Left derivative of psi against a central difference at smooth points.
    double deriv_gap = 0.0;
    for (double p : {0.5 * first_act, 2.0 * first_act, 10.0 * first_act, 100.0 * first_act}) {
        bool near_kink = false;
        for (double a : act) near_kink = near_kink || std::abs(p / a - 1.0) < 1e-3;
        if (near_kink) continue;
        const double hstep = 1e-5 * p;
        const double fd = (eq.psi(p + hstep) - eq.psi(p - hstep)) / (2.0 * hstep);
        const double an = eq.psi_left_derivative(p);
        deriv_gap = std::max(deriv_gap, std::abs(fd - an) / std::max(std::abs(an), std::abs(fd)));
    }
    out.push_back(check_at_most("equilibrium.psi_derivative_fd", s, deriv_gap, 1e-6));

    const auto fit = fit_asymptotic_slopes(eq, 1e3, 1e6);
    const auto lim = asymptotic_limits(alpha_bar(s.producers), s.market.beta, s.market.gamma);
    auto slope_check = [&](const char* id, double got, double want) {
        out.push_back(check_at_most(id, s, std::abs(got / want - 1.0), tol.slope_rel,
                                    "fitted " + fmt(got) + " vs limit " + fmt(want) + " on [1e3, 1e6]"));
    };
    slope_check("equilibrium.slope.psi", fit.psi, lim.psi);
    slope_check("equilibrium.slope.psi_derivative", fit.psi_derivative, lim.psi_derivative);
    slope_check("equilibrium.slope.phi", fit.phi, lim.phi);
    slope_check("equilibrium.slope.phi_derivative", fit.phi_derivative, lim.phi_derivative);
    slope_check("equilibrium.slope.xphi", fit.xphi, lim.xphi);
    slope_check("equilibrium.slope.xphi_derivative", fit.xphi_derivative, lim.xphi_derivative);

    // A phi perturbed by 1e-6 must break the fixed point.
    double bad = 0.0;
    for (std::size_t j = 0; j < N; j += std::max<std::size_t>(1, N / 50)) {
        double sum = 0.0;
        const double phi_bad = prof.phi[j] * (1.0 + 1e-6);
        const double u_bad = prof.xbar[j] * phi_bad;
        for (std::size_t i = 0; i < s.producers.size(); ++i) {
            const auto& p = s.producers[i];
            const double Phi = eq.K(i) * std::pow(u_bad, 1.0 / (1.0 - p.alpha));
            sum += p.weight * p.lambda * std::pow(std::max(p.c, Phi), p.alpha);
        }
        const double fixed = std::pow((1.0 + s.market.beta) * sum, -s.market.gamma);
        bad = std::max(bad, std::abs(fixed / phi_bad - 1.0));
    }
    out.push_back(check_above("negative_control.perturbed_phi", s, bad, tol.fixed_point_rel,
                              "fixed-point residual of phi * (1 + 1e-6) must exceed the tolerance"));
    return out;
}

// ---------------------------------------------------------------------------
// HJB

namespace {

std::size_t target_producer(const Scenario& s) { return s.mc.producer.empty() ? 0 : s.producer_index(s.mc.producer); }

bool singular(const ProducerType& p, const DerivedMarket& mk) {
    const auto roots = characteristic_roots(mk.mu, mk.sigma, p.r);
    return std::abs(roots.n * (1.0 - p.alpha) - 1.0) < 1e-8;
}

}  // namespace

std::vector<CheckResult> run_hjb_suite(const Scenario& s) {
    std::vector<CheckResult> out;
    const auto& tol = s.tolerances;
    const std::size_t idx = target_producer(s);
    const auto& prod = s.producers[idx];
    if (!(prod.r > s.market.mu)) {
        out.push_back(skipped("hjb", s, "producer '" + prod.id + "' has r <= mu"));
        return out;
    }
    if (singular(prod, s.market)) {
        out.push_back(skipped("hjb", s,
                              "producer '" + prod.id + "' has n(1-alpha) = 1; the waiting-region coefficient is singular"));
        return out;
    }
    auto eq = std::make_shared<const Equilibrium>(s.producers, s.market);
    ControlOptions opt;
    opt.coefficient_agreement = tol.coefficient_agreement;
    opt.fd_relative_step = tol.fd_relative_step;
    const ControlSolution sol(prod, s.market, std::make_shared<EquilibriumPhi>(eq), opt);
    const auto& g = s.hjb;
    const auto xbars = log_grid(g.xbar_min, g.xbar_max, g.nxbar);
    const auto cs = log_grid(g.c_min, g.c_max, g.nc);
    auto xs = log_grid(g.x_min, 1.0, g.nx);
    xs.back() = 1.0;
    const auto kinks = eq->activation_xbar();
    const double k = prod.k;

    double pde_wait = 0.0, pde_c1 = -std::numeric_limits<double>::infinity();
    double wc_c1 = 0.0, wc_wait = -std::numeric_limits<double>::infinity();
    double w_min = std::numeric_limits<double>::infinity(), boundary = 0.0, continuity = 0.0, inverse_pair = 0.0;
    std::size_t n_c1 = 0, n_wait = 0, n_boundary = 0, locked = 0;
    double sp_wc = 0.0, sp_wcx = 0.0, fb1 = 0.0, fb2 = 0.0, fb3 = 0.0, g_root = 0.0;
    double f_max = -std::numeric_limits<double>::infinity(), a_comb_min = std::numeric_limits<double>::infinity();
    double agreement = 0.0;
    const double rmu = prod.r - s.market.mu;

    for (double xbar : xbars) {
        const double Phi = sol.Phi(xbar);
        for (double cr : cs) {
            const double c = cr * Phi;
            for (double xr : xs) {
                const double x = xr * xbar;
                const State st{c, x, xbar};
                const double w = sol.value_w(st);
                w_min = std::min(w_min, w);
                const auto r = sol.hjb_residual(st);
                locked += r.region_locked ? 1 : 0;
                const double rel = r.pde_residual / r.pde_scale;
                if (r.region == Region::C1) {
                    ++n_c1;
                    pde_c1 = std::max(pde_c1, rel);
                    wc_c1 = std::max(wc_c1, std::abs(r.gradient_slack) / k);
                } else if (r.region != Region::S1Surface) {
                    ++n_wait;
                    pde_wait = std::max(pde_wait, std::abs(rel));
                    wc_wait = std::max(wc_wait, r.gradient_slack / k);
                }
                if (r.boundary_evaluated) {
                    ++n_boundary;
                    boundary = std::max(boundary, std::abs(r.boundary_slack));
                }
                inverse_pair = std::max(inverse_pair, std::abs(sol.Gamma(sol.G(c, xbar), xbar) / c - 1.0));
                inverse_pair = std::max(inverse_pair, std::abs(sol.G(sol.Gamma(x, xbar), xbar) / x - 1.0));
            }
        }
        // Continuity across the surface c = Phi(xbar).
        for (double xr : xs) {
            const State on{Phi, xr * xbar, xbar};
            continuity = std::max(continuity, rel_gap(sol.value_w_in_region(on, Region::C2),
                                                      sol.value_w_in_region(on, Region::C3)));
        }
        // Smooth pasting on the investment boundary x = G(c, xbar) < xbar.
        for (double cr : {0.1, 0.3, 0.6}) {
            const auto sp = sol.smooth_pasting_check(cr * Phi, xbar);
            sp_wc = std::max(sp_wc, std::abs(sp.wc_at_G - k) / k);
            sp_wcx = std::max(sp_wcx, std::abs(sp.wcx_at_G));
            fb1 = std::max(fb1, std::abs(sp.fb1 - k));
            fb2 = std::max(fb2, std::abs(sp.fb2));
            bool near_kink = false;
            for (double kx : kinks) near_kink = near_kink || std::abs(xbar / kx - 1.0) < 10.0 * tol.fd_relative_step;
            if (!near_kink) fb3 = std::max(fb3, std::abs(sp.fb3) / sp.fb3_scale);
            g_root = std::max(g_root, std::abs(sol.G_root_integral(cr * Phi, xbar)));
        }
        f_max = std::max(f_max, sol.f(Phi));
        const double A = sol.coefficient_A(xbar);
        a_comb_min = std::min(a_comb_min, A + std::pow(xbar, 1.0 - sol.n()) * sol.phi().value(xbar) / rmu);
    }

    std::mt19937_64 rng(s.simulation.seed + 17);
    std::uniform_real_distribution<double> U(std::log(g.xbar_min), std::log(g.xbar_max));
    for (int d = 0; d < 100; ++d) {
        const auto pair = sol.coefficient_A_pair(std::exp(U(rng)));
        agreement = std::max(agreement, rel_gap(pair.first, pair.second));
    }

    const std::string grid_note = std::to_string(g.nc) + "x" + std::to_string(g.nx) + "x" + std::to_string(g.nxbar) +
                                  " grid, producer " + prod.id;
    out.push_back(check_at_most("hjb.pde_waiting", s, pde_wait, tol.hjb_pde_rel,
                                grid_note + ", " + std::to_string(n_wait) + " states in C2/C3, " +
                                    std::to_string(locked) + " region-locked stencils"));
    if (n_c1 > 0) {
        out.push_back(check_below("hjb.pde_investment_negative", s, pde_c1, 0.0, std::to_string(n_c1) + " states in C1"));
        out.push_back(check_at_most("hjb.wc_equals_k_in_C1", s, wc_c1, tol.wc_c1_rel));
    } else {
        out.push_back(skipped("hjb.pde_investment_negative", s, "no grid state in C1"));
    }
    out.push_back(check_below("hjb.wc_below_k_waiting", s, wc_wait, 0.0, "max (w_c - k)/k in C2/C3"));
    out.push_back(check_above("hjb.w_positive", s, w_min, 0.0));
    if (n_boundary > 0)
        out.push_back(check_at_most("hjb.wxbar_at_diagonal", s, boundary, tol.boundary_rel,
                                    std::to_string(n_boundary) + " states with x = xbar in C3"));
    out.push_back(check_at_most("hjb.continuity_S2", s, continuity, tol.continuity_rel));
    out.push_back(check_at_most("hjb.smooth_pasting_wc", s, sp_wc, tol.smooth_pasting_rel));
    out.push_back(check_at_most("hjb.smooth_pasting_wcx", s, sp_wcx, tol.smooth_pasting_cross, "G w_cx / k"));
    out.push_back(check_at_most("hjb.fb1", s, fb1, tol.fb12_abs));
    out.push_back(check_at_most("hjb.fb2", s, fb2, tol.fb12_abs));
    out.push_back(check_at_most("hjb.fb3", s, fb3, tol.fb3_rel));
    out.push_back(check_at_most("hjb.inverse_pair", s, inverse_pair, tol.inverse_pair_rel));
    out.push_back(check_at_most("hjb.G_root_integral", s, g_root, tol.g_root_rel));
    out.push_back(check_below("hjb.f_negative_on_Phi", s, f_max, 0.0));
    out.push_back(check_above("hjb.A_combination_positive", s, a_comb_min, 0.0, "A + xbar^(1-n) phi / (r - mu)"));
    out.push_back(check_at_most("hjb.A_expressions_agree", s, agreement, tol.coefficient_agreement, "100 random xbar"));
    const double slope = sol.growth_slope();
    out.push_back(check_below("hjb.growth_slope", s, slope, sol.n(), "log-log slope of xbar Phi^a on [1, 1e6] vs n"));

    // A 1% error in the particular solution must show up in the PDE residual.
    {
        const double xbar = xbars[xbars.size() / 2];
        const double c = 2.0 * sol.Phi(xbar);
        const double x = 0.5 * xbar;
        const auto sl = sol.slice(c, xbar, Region::C3);
        auto w = [&](double xx) { return sl.a * std::pow(xx, sol.n()) + 1.01 * sl.b * xx; };
        const double h = tol.fd_relative_step * x;
        const double wx = (w(x + h) - w(x - h)) / (2.0 * h);
        const double wxx = (w(x + h) - 2.0 * w(x) + w(x - h)) / (h * h);
        const double scale = std::pow(c, prod.alpha) * x * sol.phi().value(xbar);
        const double res = 0.5 * s.market.sigma * s.market.sigma * x * x * wxx + s.market.mu * x * wx - prod.r * w(x) + scale;
        out.push_back(check_above("negative_control.perturbed_value", s, std::abs(res) / scale, tol.hjb_pde_rel,
                                  "PDE residual of w with a 1% error in the linear term"));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

std::vector<CheckResult> run_mc_suite(const Scenario& s) {
    std::vector<CheckResult> out;
    const auto& tol = s.tolerances;
    const std::size_t idx = target_producer(s);
    const auto& prod = s.producers[idx];
    const auto& cfg = s.simulation;
    if (!(prod.r > s.market.mu)) {
        out.push_back(skipped("mc", s, "producer '" + prod.id + "' has r <= mu"));
        return out;
    }

    // Constant phi, no investment: J = c^a x phi0 (1 - e^-(r-mu)T) / (r - mu) in closed form on [0, T].
    {
        const ControlSolution flat(prod, s.market, std::make_shared<ConstantPhi>(s.mc.constant_phi));
        const auto study = estimate_payoffs(s.market, cfg, flat, {{"no_investment", 1.0, false}});
        const auto& e = study.estimates.front();
        const double rmu = prod.r - s.market.mu;
        const double oracle = std::pow(prod.c, prod.alpha) * cfg.x0 * s.mc.constant_phi / rmu;
        const double z = std::abs(e.mean - oracle) / e.se;
        out.push_back(check_at_most("mc.no_investment_value", s, z, tol.mc_z,
                                    "mean " + fmt(e.mean) + " se " + fmt(e.se) + " oracle " + fmt(oracle) +
                                        ", horizon factor e^-(r-mu)T = " + fmt(std::exp(-rmu * cfg.horizon))));
    }

    auto eq = std::make_shared<const Equilibrium>(s.producers, s.market);
    const ControlSolution sol(prod, s.market, std::make_shared<EquilibriumPhi>(eq));
    const auto study = estimate_payoffs(s.market, cfg, sol,
                                        {{"optimal", 1.0, true}, {"scaled_0.8", 0.8, true}, {"scaled_1.25", 1.25, true}});
    const auto& opt = study.estimates[0];
    std::string tail_note = "tail proxy " + fmt(opt.tail_bound) + (opt.tail_warning ? " exceeds budget " + fmt(cfg.tail_budget) : "");
    try {
        const double w = sol.value_w({prod.c, cfg.x0, cfg.xbar0});
        const double z = std::abs(opt.mean - w) / opt.se;
        out.push_back(check_at_most("mc.optimal_value", s, z, tol.mc_z,
                                    "mean " + fmt(opt.mean) + " se " + fmt(opt.se) + " w " + fmt(w) + "; " + tail_note));
        const double zbad = std::abs(opt.mean - 1.05 * w) / opt.se;
        out.push_back(check_above("negative_control.shifted_value", s, zbad, tol.mc_z,
                                  "the estimate must reject w * 1.05"));
    } catch (const DomainError& e) {
        out.push_back(skipped("mc.optimal_value", s, e.what()));
    }
    for (std::size_t k = 1; k < study.estimates.size(); ++k) {
        const auto d = paired_difference(study, k, 0);
        out.push_back(check_at_most("mc.suboptimal." + study.estimates[k].strategy, s, d.mean / d.se,
                                    tol.mc_suboptimal_z,
                                    "paired difference " + fmt(d.mean) + " se " + fmt(d.se) + ", in paired SE units"));
    }
    out.push_back(check_below("mc.admissibility", s, opt.admissibility, std::numeric_limits<double>::infinity(),
                              "E int e^-rt C^a X dt over the horizon"));

    // Clearing and the price equation along paths.
    PathConfig pc = cfg;
    pc.paths = std::min(cfg.paths, s.mc.price_paths);
    const auto bundle = simulate_gbm_with_max(s.market, pc);
    double clearing = 0.0, peqn = 0.0;
    for (const auto& path : bundle.paths) {
        const auto price = equilibrium_price_path(path, *eq, std::numeric_limits<double>::infinity());
        clearing = std::max(clearing, price.max_clearing);
        peqn = std::max(peqn, price.max_peqn);
    }
    const std::string pnote = std::to_string(pc.paths) + " paths x " + std::to_string(pc.steps()) + " steps";
    out.push_back(check_at_most("mc.market_clearing", s, clearing, tol.clearing_rel, pnote));
    out.push_back(check_at_most("mc.price_equation", s, peqn, tol.peqn_rel, pnote));

    PathConfig dc = pc;
    dc.scheme = MaxScheme::Discrete;
    const auto discrete = simulate_gbm_with_max(s.market, dc);
    double probe = 0.0;
    for (const auto& path : discrete.paths)
        probe = std::max(probe, price_uniqueness_probe(path, equilibrium_price_path(path, *eq, 1.0), *eq));
    out.push_back(check_at_most("mc.price_uniqueness", s, probe, tol.peqn_rel, "discrete running max, " + pnote));

    PathConfig rc = pc;
    double x_dyn = s.mc.dynamics_x0;
    if (!(x_dyn > 0.0)) {
        const auto kinks = eq->activation_xbar();
        x_dyn = std::max(cfg.x0, 2.0 * kinks.back());
    }
    rc.x0 = x_dyn;
    rc.xbar0 = x_dyn;
    const auto refinement = price_dynamics_refinement(s.market, rc, *eq);
    out.push_back(check_within("mc.price_dynamics_refinement", s, refinement.ratio, tol.dynamics_ratio_lo,
                               tol.dynamics_ratio_hi,
                               "mean per-path max residual " + fmt(refinement.coarse.mean_path_max) + " -> " +
                                   fmt(refinement.fine.mean_path_max) + " when steps double, x0 = " + fmt(x_dyn)));
    return out;
}

std::vector<CheckResult> run_suites(const Scenario& s, const std::string& selector) {
    if (selector != "all" && selector != "identity" && selector != "equilibrium" && selector != "hjb" && selector != "mc")
        throw ConfigError("unknown suite '" + selector + "' (expected all, identity, equilibrium, hjb or mc)");
    std::vector<CheckResult> out;
    auto add = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
    if (selector == "all" || selector == "identity") add(run_identity_suite(s));
    if (selector == "all" || selector == "equilibrium") add(run_equilibrium_suite(s));
    const bool assumptions_ok = validate_assumptions(s.producers, s.market).failures.empty();
    if (selector == "all" || selector == "hjb") {
        if (assumptions_ok)
            add(run_hjb_suite(s));
        else
            out.push_back(skipped("hjb", s, "population-level assumptions fail"));
    }
    if (selector == "all" || selector == "mc") {
        if (assumptions_ok)
            add(run_mc_suite(s));
        else
            out.push_back(skipped("mc", s, "population-level assumptions fail"));
    }
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::none_of(results.begin(), results.end(), [](const auto& r) { return r.status == CheckStatus::Fail; });
}

json report_json(const std::vector<CheckResult>& results) {
    json checks = json::array();
    std::size_t pass = 0, fail = 0, skip = 0;
    for (const auto& r : results) {
        checks.push_back(r.to_json());
        pass += r.status == CheckStatus::Pass;
        fail += r.status == CheckStatus::Fail;
        skip += r.status == CheckStatus::Skip;
    }
    return json{{"checks", checks}, {"passed", pass}, {"failed", fail}, {"skipped", skip}, {"pass", fail == 0}};
}

std::string summary_table(const std::vector<CheckResult>& results) {
    std::size_t width = 5;
    for (const auto& r : results) width = std::max(width, r.id.size());
    std::ostringstream os;
    char line[512];
    std::snprintf(line, sizeof line, "%-*s  %-6s %14s %3s %-12s %s\n", static_cast<int>(width), "check", "status",
                  "measured", "", "tolerance", "notes");
    os << line;
    for (const auto& r : results) {
        std::snprintf(line, sizeof line, "%-*s  %-6s %14.6g %3s %-12.4g ", static_cast<int>(width), r.id.c_str(),
                      to_string(r.status).c_str(), r.measured, r.relation.c_str(), r.tolerance);
        os << line << r.notes << "\n";
    }
    return os.str();
}

}  // namespace capeq
