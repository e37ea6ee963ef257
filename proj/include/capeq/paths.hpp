// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "capeq/clearing.hpp"
#include "capeq/control.hpp"
#include "capeq/population.hpp"

namespace capeq {

enum class MaxScheme { Discrete, Bridge };

MaxScheme parse_max_scheme(const std::string& s);
std::string to_string(MaxScheme s);

struct PathConfig {
    double horizon = 5.0;
    std::size_t steps_per_unit = 200;
    std::size_t paths = 10000;
    std::uint64_t seed = 20240611;
    MaxScheme scheme = MaxScheme::Bridge;
    double x0 = 1.0;
    double xbar0 = 1.0;
    int threads = 0;  ///< 0: OpenMP default
    std::size_t export_paths = 0;
    double tail_budget = 1e-3;

    std::size_t steps() const;
    double dt() const;
    void validate() const;
};

/// One simulated trajectory on the time grid t_j = j dt, j = 0..steps.
struct SimulatedPath {
    std::vector<double> X;
    std::vector<double> running_max;  ///< max of X over [0, t_j], started at x0
    std::vector<double> Xtilde;       ///< xbar0 v running_max
    std::vector<double> dW;           ///< Brownian increments, dW[j] on (t_j, t_j+1]
};

struct PathBundle {
    std::vector<double> time;
    double xbar0 = 1.0;
    std::vector<SimulatedPath> paths;
};

/**
 * Generates the path with the given index. Each path owns the random stream
 * seeded by (seed, index), so results do not depend on how paths are spread
 * over workers. Every step draws a normal and then a uniform, whichever
 * running-max scheme is used, so both schemes share the same X.
 */
class PathStepper {
public:
    PathStepper(const DerivedMarket& market, const PathConfig& cfg, std::size_t index);

    /// Fills `out` with a full trajectory, reusing its storage.
    void generate(SimulatedPath& out);

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    double drift_;
    double vol_;
    double sqrt_dt_;
    double bridge_var_;
    std::size_t steps_;
    MaxScheme scheme_;
    double x0_;
    double xbar0_;
};

PathBundle simulate_gbm_with_max(const DerivedMarket& market, const PathConfig& cfg);

/// Every other node of `fine`: increments are summed pairwise and the running
/// max is recomputed from the retained nodes only.
SimulatedPath coarsen(const SimulatedPath& fine, double x0, double xbar0);

/// A capability rule c v s * (Gamma(Xbar, xbar0) if Xbar < xbar0 else Phi(Xtilde)),
/// or the constant c when `invest` is false.
struct StrategySpec {
    std::string id = "optimal";
    double threshold_scale = 1.0;
    bool invest = true;
};

/// Capability at each grid node, C(0) included; C(0-) is the producer's c.
std::vector<double> realize_strategy(const SimulatedPath& path, double xbar0, const ControlSolution& sol,
                                     const StrategySpec& spec = {});

struct PricePath {
    std::vector<double> P;
    std::vector<double> Pbar;
    std::vector<double> clearing_residual;  ///< |demand - supply| / demand
    std::vector<double> peqn_residual;      ///< |P^(1+beta) - X psi(Pbar)| / P^(1+beta)
    double max_clearing = 0.0;
    double max_peqn = 0.0;
    std::size_t worst_index = 0;
};

/// Equilibrium price P = (X phi(Xtilde))^(1/(1+beta)) with clearing against
/// C_i = c_i v Phi_i(Xtilde). Throws NumericError naming the worst node when
/// the price equation residual exceeds `tolerance`.
PricePath equilibrium_price_path(const SimulatedPath& path, const Equilibrium& eq, double tolerance = 1e-6);

/// Reconstructs Pbar as the running max of P scaled back through psi and
/// re-solves P^(1+beta) = X psi(Pbar); returns the max relative deviation from `price.P`.
double price_uniqueness_probe(const SimulatedPath& path, const PricePath& price, const Equilibrium& eq);

struct PriceDynamicsResult {
    double max_residual = 0.0;       ///< over all steps and paths
    double mean_path_max = 0.0;      ///< mean over paths of the per-path max
    double max_off_max_residual = 0.0;  ///< over steps where Pbar does not move
};

/// Compares each increment of ln P with the stochastic differential of the price.
PriceDynamicsResult price_dynamics_check(const PathBundle& bundle, const Equilibrium& eq);

struct PriceRefinement {
    PriceDynamicsResult coarse;
    PriceDynamicsResult fine;
    double ratio = 0.0;  ///< fine / coarse of the mean per-path max
};

/// Simulates with 2 * steps (discrete scheme) and coarsens to `steps`.
PriceRefinement price_dynamics_refinement(const DerivedMarket& market, const PathConfig& cfg, const Equilibrium& eq);

struct PayoffEstimate {
    std::string strategy;
    double mean = 0.0;
    double se = 0.0;
    std::size_t paths = 0;
    double tail_bound = 0.0;     ///< mean of e^(-rT) (1 + Xtilde_T^(n - theta))
    double admissibility = 0.0;  ///< mean of int e^(-rt) C^a X dt
    bool tail_warning = false;
};

/// Per-path payoffs of several strategies evaluated on the same paths.
struct PayoffStudy {
    std::vector<PayoffEstimate> estimates;
    std::vector<double> rows;  ///< paths x width, see PayoffLayout
    std::size_t width = 0;
};

struct PairedDifference {
    double mean = 0.0;  ///< mean of payoff(a) - payoff(b)
    double se = 0.0;
};

PairedDifference paired_difference(const PayoffStudy& study, std::size_t a, std::size_t b);

/// Inputs of the payoff kernels.
struct PayoffProblem {
    DerivedMarket market;
    PathConfig cfg;
    const ControlSolution* sol = nullptr;
    std::vector<StrategySpec> strategies;
    double growth_exponent = 0.0;  ///< n - theta used by the tail proxy
};

/// Row layout: payoffs of each strategy, then admissibility integrals, then the tail proxy.
std::size_t payoff_row_width(std::size_t strategies);

/// Payoff integrals of one stored path for each strategy, written to `row`.
/// `discount` holds e^(-r t_j) on the same grid as `time`.
void path_payoffs(const SimulatedPath& path, std::span<const double> time, std::span<const double> discount,
                  const PayoffProblem& problem, std::span<double> row);

void payoff_rows_serial(const PayoffProblem& problem, std::span<double> rows);
void payoff_rows_parallel(const PayoffProblem& problem, std::span<double> rows);

/// Runs the parallel kernel unless cfg.threads == 1 and reduces rows in path order.
PayoffStudy estimate_payoffs(const DerivedMarket& market, const PathConfig& cfg, const ControlSolution& sol,
                             std::vector<StrategySpec> strategies);

/// Compensated sum in index order.
double ordered_sum(std::span<const double> v, std::size_t stride = 1, std::size_t offset = 0);

}  // namespace capeq
