// SPDX-License-Identifier: MIT
#include "capeq/paths.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <omp.h>

#include "capeq/errors.hpp"

namespace capeq {

MaxScheme parse_max_scheme(const std::string& s) {
    if (s == "bridge") return MaxScheme::Bridge;
    if (s == "discrete") return MaxScheme::Discrete;
    throw ConfigError("unknown max_scheme '" + s + "' (expected bridge or discrete)");
}

std::string to_string(MaxScheme s) { return s == MaxScheme::Bridge ? "bridge" : "discrete"; }

std::size_t PathConfig::steps() const {
    return static_cast<std::size_t>(std::llround(horizon * static_cast<double>(steps_per_unit)));
}

double PathConfig::dt() const { return horizon / static_cast<double>(steps()); }

void PathConfig::validate() const {
    if (!(horizon > 0.0)) throw ConfigError("simulation.horizon must be > 0");
    if (steps_per_unit < 1) throw ConfigError("simulation.steps_per_unit must be >= 1");
    if (steps() < 1) throw ConfigError("simulation needs at least one step");
    if (paths < 1) throw ConfigError("simulation.paths must be >= 1");
    if (!(x0 > 0.0)) throw ConfigError("simulation.x0 must be > 0");
    if (!(xbar0 >= x0)) throw ConfigError("simulation.xbar0 must be >= x0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
}

// ---------------------------------------------------------------------------

PathStepper::PathStepper(const DerivedMarket& market, const PathConfig& cfg, std::size_t index)
    : drift_((market.mu - 0.5 * market.sigma * market.sigma) * cfg.dt()),
      vol_(market.sigma),
      sqrt_dt_(std::sqrt(cfg.dt())),
      bridge_var_(2.0 * market.sigma * market.sigma * cfg.dt()),
      steps_(cfg.steps()),
      scheme_(cfg.scheme),
      x0_(cfg.x0),
      xbar0_(cfg.xbar0) {
    const auto idx = static_cast<std::uint64_t>(index);
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32)};
    rng_.seed(seq);
}

void PathStepper::generate(SimulatedPath& out) {
    out.X.resize(steps_ + 1);
    out.running_max.resize(steps_ + 1);
    out.Xtilde.resize(steps_ + 1);
    out.dW.resize(steps_);
    double lx = std::log(x0_);
    double lmax = lx;
    out.X[0] = x0_;
    out.running_max[0] = x0_;
    out.Xtilde[0] = std::max(xbar0_, x0_);
    for (std::size_t j = 0; j < steps_; ++j) {
        const double z = normal_(rng_);
        const double u = 1.0 - uniform_(rng_);  // in (0, 1]
        const double dw = sqrt_dt_ * z;
        const double next = lx + drift_ + vol_ * dw;
        double peak = next;
        if (scheme_ == MaxScheme::Bridge) {
            const double d = next - lx;
            peak = 0.5 * (lx + next + std::sqrt(d * d - bridge_var_ * std::log(u)));
        }
        lx = next;
        if (peak > lmax) lmax = peak;
        out.dW[j] = dw;
        out.X[j + 1] = std::exp(lx);
        out.running_max[j + 1] = std::exp(lmax);
        out.Xtilde[j + 1] = std::max(xbar0_, out.running_max[j + 1]);
    }
}

PathBundle simulate_gbm_with_max(const DerivedMarket& market, const PathConfig& cfg) {
    cfg.validate();
    PathBundle b;
    const std::size_t steps = cfg.steps();
    const double dt = cfg.dt();
    b.time.resize(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) b.time[j] = static_cast<double>(j) * dt;
    b.xbar0 = cfg.xbar0;
    b.paths.resize(cfg.paths);
    const long n = static_cast<long>(cfg.paths);
    const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (long i = 0; i < n; ++i) {
        PathStepper stepper(market, cfg, static_cast<std::size_t>(i));
        stepper.generate(b.paths[static_cast<std::size_t>(i)]);
    }
    return b;
}

SimulatedPath coarsen(const SimulatedPath& fine, double x0, double xbar0) {
    if (fine.dW.size() % 2 != 0) throw DomainError("coarsen needs an even number of steps");
    const std::size_t steps = fine.dW.size() / 2;
    SimulatedPath c;
    c.X.resize(steps + 1);
    c.running_max.resize(steps + 1);
    c.Xtilde.resize(steps + 1);
    c.dW.resize(steps);
    double peak = x0;
    for (std::size_t j = 0; j <= steps; ++j) {
        c.X[j] = fine.X[2 * j];
        peak = std::max(peak, c.X[j]);
        c.running_max[j] = peak;
        c.Xtilde[j] = std::max(xbar0, peak);
        if (j < steps) c.dW[j] = fine.dW[2 * j] + fine.dW[2 * j + 1];
    }
    return c;
}

// ---------------------------------------------------------------------------

namespace {

/// Evaluates a strategy along a path, recomputing boundaries only when the maximum moves.
class StrategyTracker {
public:
    StrategyTracker(const ControlSolution& sol, const StrategySpec& spec, double xbar0)
        : sol_(sol), spec_(spec), xbar0_(xbar0), c_(sol.producer().c) {}

    double at(double running_max, double xtilde) {
        if (!spec_.invest) return c_;
        if (running_max != last_max_) {
            last_max_ = running_max;
            const double boundary = running_max < xbar0_ ? sol_.Gamma(running_max, xbar0_) : sol_.Phi(xtilde);
            target_ = spec_.threshold_scale * boundary;
        }
        return std::max(c_, target_);
    }

private:
    const ControlSolution& sol_;
    const StrategySpec& spec_;
    double xbar0_;
    double c_;
    double last_max_ = -1.0;
    double target_ = 0.0;
};

}  // namespace

std::vector<double> realize_strategy(const SimulatedPath& path, double xbar0, const ControlSolution& sol,
                                     const StrategySpec& spec) {
    StrategyTracker tr(sol, spec, xbar0);
    std::vector<double> C(path.X.size());
    double prev = sol.producer().c;
    for (std::size_t j = 0; j < C.size(); ++j) {
        // Monotone by construction; the max keeps rounding from breaking it.
        prev = std::max(prev, tr.at(path.running_max[j], path.Xtilde[j]));
        C[j] = prev;
    }
    return C;
}

// ---------------------------------------------------------------------------

PricePath equilibrium_price_path(const SimulatedPath& path, const Equilibrium& eq, double tolerance) {
    const auto& mk = eq.market();
    const auto& pop = eq.population();
    const double one_beta = 1.0 + mk.beta;
    const std::size_t n = path.X.size();
    PricePath out;
    out.P.resize(n);
    out.Pbar.resize(n);
    out.clearing_residual.resize(n);
    out.peqn_residual.resize(n);

    double last_xt = -1.0;
    double pbar = 0.0;
    double log_phi = 0.0;
    double log_supply_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double xt = path.Xtilde[j];
        if (xt != last_xt) {
            last_xt = xt;
            pbar = eq.h_inverse(xt);
            log_phi = eq.log_psi(pbar);
            double s = 0.0;
            for (std::size_t i = 0; i < pop.size(); ++i) {
                const double C = std::max(pop[i].c, eq.Psi(i, pbar));
                s += pop[i].weight * pop[i].lambda * std::pow(C, pop[i].alpha);
            }
            log_supply_sum = std::log(s);
        }
        const double lx = std::log(path.X[j]);
        const double lp = (lx + log_phi) / one_beta;
        out.P[j] = std::exp(lp);
        // Pbar from its own definition (Xtilde phi(Xtilde))^(1/(1+beta)) rather than the root.
        out.Pbar[j] = std::exp((std::log(xt) + log_phi) / one_beta);

        const double log_demand = lx / mk.gamma - mk.delta * lp;
        const double log_supply = std::log1p(mk.beta) + mk.beta * lp + log_supply_sum;
        out.clearing_residual[j] = std::abs(std::expm1(log_supply - log_demand));
        out.peqn_residual[j] = std::abs(std::expm1(lx + eq.log_psi(out.Pbar[j]) - one_beta * lp));
        if (out.peqn_residual[j] > out.max_peqn) {
            out.max_peqn = out.peqn_residual[j];
            out.worst_index = j;
        }
        out.max_clearing = std::max(out.max_clearing, out.clearing_residual[j]);
    }
    if (!(out.max_peqn <= tolerance)) {
        std::ostringstream os;
        os << "price equation residual " << out.max_peqn << " exceeds " << tolerance << " at node " << out.worst_index;
        throw NumericError(os.str());
    }
    return out;
}

double price_uniqueness_probe(const SimulatedPath& path, const PricePath& price, const Equilibrium& eq) {
    const double one_beta = 1.0 + eq.market().beta;
    double pbar = price.Pbar.front();
    double worst = 0.0;
    for (std::size_t j = 0; j < price.P.size(); ++j) {
        pbar = std::max(pbar, price.P[j]);
        const double p = std::exp((std::log(path.X[j]) + eq.log_psi(pbar)) / one_beta);
        worst = std::max(worst, std::abs(p / price.P[j] - 1.0));
    }
    return worst;
}

PriceDynamicsResult price_dynamics_check(const PathBundle& bundle, const Equilibrium& eq) {
    const auto& mk = eq.market();
    const double one_beta = 1.0 + mk.beta;
    const double dt = bundle.time.size() > 1 ? bundle.time[1] - bundle.time[0] : 0.0;
    const double drift = (mk.mu - 0.5 * mk.sigma * mk.sigma) * dt;
    PriceDynamicsResult res;
    double sum_max = 0.0;
    for (const auto& path : bundle.paths) {
        const auto price = equilibrium_price_path(path, eq, 1.0);
        double path_max = 0.0;
        for (std::size_t j = 0; j + 1 < price.P.size(); ++j) {
            const double pb = price.Pbar[j];
            const double dpb = price.Pbar[j + 1] - pb;
            const double reflection = dpb != 0.0 ? eq.psi_elasticity(pb) / pb * dpb : 0.0;
            const double predicted = (drift + reflection + mk.sigma * path.dW[j]) / one_beta;
            const double r = std::abs(std::log(price.P[j + 1] / price.P[j]) - predicted);
            path_max = std::max(path_max, r);
            if (dpb == 0.0) res.max_off_max_residual = std::max(res.max_off_max_residual, r);
        }
        res.max_residual = std::max(res.max_residual, path_max);
        sum_max += path_max;
    }
    res.mean_path_max = bundle.paths.empty() ? 0.0 : sum_max / static_cast<double>(bundle.paths.size());
    return res;
}

PriceRefinement price_dynamics_refinement(const DerivedMarket& market, const PathConfig& cfg,
                                          const Equilibrium& eq) {
    PathConfig fine_cfg = cfg;
    fine_cfg.steps_per_unit = 2 * cfg.steps_per_unit;
    fine_cfg.scheme = MaxScheme::Discrete;
    const auto fine = simulate_gbm_with_max(market, fine_cfg);
    PathBundle coarse;
    coarse.xbar0 = fine.xbar0;
    for (std::size_t j = 0; j < fine.time.size(); j += 2) coarse.time.push_back(fine.time[j]);
    coarse.paths.reserve(fine.paths.size());
    for (const auto& p : fine.paths) coarse.paths.push_back(coarsen(p, cfg.x0, cfg.xbar0));
    PriceRefinement out;
    out.fine = price_dynamics_check(fine, eq);
    out.coarse = price_dynamics_check(coarse, eq);
    out.ratio = out.fine.mean_path_max / out.coarse.mean_path_max;
    return out;
}

// ---------------------------------------------------------------------------

std::size_t payoff_row_width(std::size_t strategies) { return 2 * strategies + 1; }

void path_payoffs(const SimulatedPath& path, std::span<const double> time, std::span<const double> discount,
                  const PayoffProblem& problem, std::span<double> row) {
    const auto& sol = *problem.sol;
    const auto& p = sol.producer();
    const auto& phi = sol.phi();
    const std::size_t S = problem.strategies.size();
    const std::size_t n = path.X.size();

    // X phi(Xtilde) is shared by all strategies.
    const auto& disc = discount;
    thread_local std::vector<double> xphi;
    xphi.resize(n);
    double last_xt = -1.0;
    double phi_v = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (path.Xtilde[j] != last_xt) {
            last_xt = path.Xtilde[j];
            phi_v = phi.value(last_xt);
        }
        xphi[j] = path.X[j] * phi_v;
    }

    for (std::size_t s = 0; s < S; ++s) {
        StrategyTracker tr(sol, problem.strategies[s], problem.cfg.xbar0);
        double prev_c = p.c;
        double running = 0.0;
        double admiss = 0.0;
        double cost = 0.0;
        double prev_run = 0.0;
        double prev_adm = 0.0;
        double ca = 0.0;
        double last_c = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = std::max(prev_c, tr.at(path.running_max[j], path.Xtilde[j]));
            // Increments between nodes are charged at the left endpoint; the time-0 jump at t = 0.
            const double charge_time = j == 0 ? disc[0] : disc[j - 1];
            cost += charge_time * (c - prev_c);
            prev_c = c;
            if (c != last_c) {
                last_c = c;
                ca = std::pow(c, p.alpha);
            }
            const double run = disc[j] * ca * xphi[j];
            const double adm = disc[j] * ca * path.X[j];
            if (j > 0) {
                const double h = time[j] - time[j - 1];
                running += 0.5 * h * (prev_run + run);
                admiss += 0.5 * h * (prev_adm + adm);
            }
            prev_run = run;
            prev_adm = adm;
        }
        row[s] = running - p.k * cost;
        row[S + s] = admiss;
    }
    row[2 * S] = disc[n - 1] * (1.0 + std::pow(path.Xtilde[n - 1], problem.growth_exponent));
}

namespace {

struct Grid {
    std::vector<double> time;
    std::vector<double> discount;
};

Grid make_grid(const PayoffProblem& problem) {
    Grid g;
    const auto& cfg = problem.cfg;
    g.time.resize(cfg.steps() + 1);
    g.discount.resize(g.time.size());
    for (std::size_t j = 0; j < g.time.size(); ++j) {
        g.time[j] = static_cast<double>(j) * cfg.dt();
        g.discount[j] = std::exp(-problem.sol->producer().r * g.time[j]);
    }
    return g;
}

void payoff_row(const PayoffProblem& problem, const Grid& grid, std::size_t i, std::span<double> rows,
                SimulatedPath& buffer) {
    const std::size_t w = payoff_row_width(problem.strategies.size());
    PathStepper stepper(problem.market, problem.cfg, i);
    stepper.generate(buffer);
    path_payoffs(buffer, grid.time, grid.discount, problem, rows.subspan(i * w, w));
}

}  // namespace

void payoff_rows_serial(const PayoffProblem& problem, std::span<double> rows) {
    const auto grid = make_grid(problem);
    SimulatedPath buffer;
    for (std::size_t i = 0; i < problem.cfg.paths; ++i) payoff_row(problem, grid, i, rows, buffer);
}

void payoff_rows_parallel(const PayoffProblem& problem, std::span<double> rows) {
    const auto grid = make_grid(problem);
    const long n = static_cast<long>(problem.cfg.paths);
    const int threads = problem.cfg.threads > 0 ? problem.cfg.threads : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
    {
        SimulatedPath buffer;
#pragma omp for schedule(dynamic, 64)
        for (long i = 0; i < n; ++i) payoff_row(problem, grid, static_cast<std::size_t>(i), rows, buffer);
    }
}

double ordered_sum(std::span<const double> v, std::size_t stride, std::size_t offset) {
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = offset; i < v.size(); i += stride) {
        const double x = v[i];
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

namespace {

struct MeanSe {
    double mean;
    double se;
};

template <class Get>
MeanSe mean_se(std::size_t n, Get&& get) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = get(i);
    const double mean = ordered_sum(v) / static_cast<double>(n);
    for (double& x : v) x = (x - mean) * (x - mean);
    const double var = n > 1 ? ordered_sum(v) / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

PayoffStudy estimate_payoffs(const DerivedMarket& market, const PathConfig& cfg, const ControlSolution& sol,
                             std::vector<StrategySpec> strategies) {
    cfg.validate();
    if (strategies.empty()) throw DomainError("payoff estimation needs at least one strategy");
    PayoffProblem problem{market, cfg, &sol, std::move(strategies), 0.0};
    // Tail proxy exponent n - theta, with theta the fitted margin of x Phi^a below n.
    problem.growth_exponent = sol.growth_slope();

    const std::size_t S = problem.strategies.size();
    PayoffStudy study;
    study.width = payoff_row_width(S);
    study.rows.assign(cfg.paths * study.width, 0.0);
    if (cfg.threads == 1)
        payoff_rows_serial(problem, study.rows);
    else
        payoff_rows_parallel(problem, study.rows);

    const std::size_t n = cfg.paths;
    const std::size_t w = study.width;
    const double tail = ordered_sum(study.rows, w, 2 * S) / static_cast<double>(n);
    for (std::size_t s = 0; s < S; ++s) {
        PayoffEstimate e;
        e.strategy = problem.strategies[s].id;
        const auto ms = mean_se(n, [&](std::size_t i) { return study.rows[i * w + s]; });
        e.mean = ms.mean;
        e.se = ms.se;
        e.paths = n;
        e.admissibility = ordered_sum(study.rows, w, S + s) / static_cast<double>(n);
        e.tail_bound = tail;
        e.tail_warning = tail > cfg.tail_budget;
        study.estimates.push_back(e);
    }
    return study;
}

PairedDifference paired_difference(const PayoffStudy& study, std::size_t a, std::size_t b) {
    const std::size_t n = study.rows.size() / study.width;
    const auto ms = mean_se(n, [&](std::size_t i) { return study.rows[i * study.width + a] - study.rows[i * study.width + b]; });
    return {ms.mean, ms.se};
}

}  // namespace capeq
