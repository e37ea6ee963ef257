// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "capeq/errors.hpp"
#include "capeq/paths.hpp"
#include "fixtures.hpp"

using namespace capeq;
using namespace capeq::testing;

namespace {

PathConfig small_config(std::size_t paths = 64) {
    PathConfig c;
    c.horizon = 1.0;
    c.steps_per_unit = 50;
    c.paths = paths;
    c.seed = 99;
    return c;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

SimulatedPath constant_path(double x, double xbar0, std::size_t steps) {
    SimulatedPath p;
    p.X.assign(steps + 1, x);
    p.running_max.assign(steps + 1, x);
    p.Xtilde.assign(steps + 1, std::max(x, xbar0));
    p.dW.assign(steps, 0.0);
    return p;
}

}  // namespace

TEST(PathConfig, Validation) {
    auto c = small_config();
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.steps(), 50u);
    auto bad = c;
    bad.paths = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.xbar0 = 0.5;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.horizon = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(parse_max_scheme("exact"), ConfigError);
    EXPECT_EQ(parse_max_scheme("discrete"), MaxScheme::Discrete);
}

TEST(Simulate, DeterministicLimit) {
    const auto m = market_from_gbm(1.0, 1.0, 0.3, 1e-12, 1.0);
    auto c = small_config(4);
    c.xbar0 = 1.2;
    const auto b = simulate_gbm_with_max(m, c);
    for (const auto& p : b.paths)
        for (std::size_t j = 0; j < p.X.size(); ++j) {
            const double t = b.time[j];
            EXPECT_NEAR(p.X[j], std::exp(0.3 * t), 1e-10);
            EXPECT_NEAR(p.Xtilde[j], std::max(1.2, std::exp(0.3 * t)), 1e-10);
        }
}

TEST(Simulate, RunningMaxInvariants) {
    for (auto scheme : {MaxScheme::Discrete, MaxScheme::Bridge}) {
        auto c = small_config(50);
        c.scheme = scheme;
        c.x0 = 0.8;
        c.xbar0 = 1.1;
        const auto b = simulate_gbm_with_max(s1_market(), c);
        for (const auto& p : b.paths) {
            EXPECT_EQ(p.X.front(), 0.8);
            for (std::size_t j = 0; j < p.X.size(); ++j) {
                EXPECT_GE(p.running_max[j], p.X[j]);
                EXPECT_GE(p.Xtilde[j], 1.1);
                EXPECT_EQ(p.Xtilde[j], std::max(1.1, p.running_max[j]));
                if (j) EXPECT_GE(p.Xtilde[j], p.Xtilde[j - 1]);
            }
        }
    }
}

TEST(Simulate, MeanGrowthMatchesDrift) {
    const auto m = s1_market();
    auto c = small_config(100000);
    c.steps_per_unit = 4;
    const auto b = simulate_gbm_with_max(m, c);
    double s = 0.0, sq = 0.0;
    for (const auto& p : b.paths) {
        s += p.X.back();
        sq += p.X.back() * p.X.back();
    }
    const double n = static_cast<double>(b.paths.size());
    const double mean = s / n, se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - std::exp(m.mu)), 3.0 * se);
}

TEST(Simulate, BridgeMaxDominatesDiscreteAndGapShrinks) {
    const auto m = s1_market();
    double previous_gap = std::numeric_limits<double>::infinity();
    for (std::size_t spu : {10, 40, 160}) {
        auto c = small_config(2000);
        c.steps_per_unit = spu;
        auto d = c;
        d.scheme = MaxScheme::Discrete;
        const auto bb = simulate_gbm_with_max(m, c);
        const auto db = simulate_gbm_with_max(m, d);
        double gap = 0.0;
        for (std::size_t i = 0; i < bb.paths.size(); ++i) {
            ASSERT_TRUE(same_bits(bb.paths[i].X, db.paths[i].X));
            for (std::size_t j = 0; j < bb.paths[i].X.size(); ++j)
                EXPECT_GE(bb.paths[i].running_max[j], db.paths[i].running_max[j]);
            gap += bb.paths[i].running_max.back() - db.paths[i].running_max.back();
        }
        EXPECT_LT(gap, previous_gap);
        previous_gap = gap;
    }
}

TEST(Simulate, IndependentOfWorkerCountAndPathCount) {
    auto c = small_config(300);
    c.threads = 1;
    const auto one = simulate_gbm_with_max(s1_market(), c);
    c.threads = 4;
    const auto four = simulate_gbm_with_max(s1_market(), c);
    c.paths = 100;
    const auto fewer = simulate_gbm_with_max(s1_market(), c);
    for (std::size_t i = 0; i < one.paths.size(); ++i) {
        EXPECT_TRUE(same_bits(one.paths[i].X, four.paths[i].X));
        EXPECT_TRUE(same_bits(one.paths[i].Xtilde, four.paths[i].Xtilde));
        EXPECT_TRUE(same_bits(one.paths[i].dW, four.paths[i].dW));
        if (i < fewer.paths.size()) EXPECT_TRUE(same_bits(one.paths[i].X, fewer.paths[i].X));
    }
}

TEST(Coarsen, KeepsEveryOtherNode) {
    auto c = small_config(3);
    c.scheme = MaxScheme::Discrete;
    const auto b = simulate_gbm_with_max(s1_market(), c);
    for (const auto& f : b.paths) {
        const auto g = coarsen(f, c.x0, c.xbar0);
        ASSERT_EQ(g.X.size(), 26u);
        double mx = c.x0;
        for (std::size_t j = 0; j < g.X.size(); ++j) {
            EXPECT_EQ(g.X[j], f.X[2 * j]);
            mx = std::max(mx, g.X[j]);
            EXPECT_EQ(g.running_max[j], mx);
            if (j < g.dW.size()) EXPECT_EQ(g.dW[j], f.dW[2 * j] + f.dW[2 * j + 1]);
        }
    }
}

TEST(Strategy, InitialJumpToBoundary) {
    const auto eq = s1_equilibrium();
    const ControlSolution sol(s1_producer(0.5, 0.5), s1_market(), std::make_shared<EquilibriumPhi>(eq));
    auto path = constant_path(2.0, 4.0, 10);
    const auto C = realize_strategy(path, 4.0, sol);
    EXPECT_NEAR(C.front(), 1.0, 1e-14);  // Gamma(2, 4) = 4/4
    // Running max rising above xbar0 moves the capability to Phi.
    path.X.back() = path.running_max.back() = path.Xtilde.back() = 9.0;
    const auto D = realize_strategy(path, 4.0, sol);
    EXPECT_NEAR(D.back(), 9.0, 1e-12);
    EXPECT_TRUE(std::is_sorted(D.begin(), D.end()));
}

TEST(Strategy, NoInvestmentWhenCapabilityIsAmple) {
    const auto eq = s1_equilibrium();
    const ControlSolution sol(s1_producer(0.5, 50.0), s1_market(), std::make_shared<EquilibriumPhi>(eq));
    auto c = small_config(20);
    const auto b = simulate_gbm_with_max(s1_market(), c);
    for (const auto& p : b.paths) {
        ASSERT_LT(sol.Phi(p.Xtilde.back()), 50.0);
        for (double v : realize_strategy(p, c.xbar0, sol)) EXPECT_EQ(v, 50.0);
    }
}

TEST(Strategy, HigherCostLowersCapability) {
    const auto phi = std::make_shared<EquilibriumPhi>(s1_equilibrium());
    auto cheap = s1_producer(0.45, 0.1);
    auto dear = cheap;
    dear.k = 2.0 * cheap.k;
    const ControlSolution a(cheap, s1_market(), phi), b(dear, s1_market(), phi);
    const auto bundle = simulate_gbm_with_max(s1_market(), small_config(30));
    for (const auto& p : bundle.paths) {
        const auto Ca = realize_strategy(p, 1.0, a), Cb = realize_strategy(p, 1.0, b);
        for (std::size_t j = 0; j < Ca.size(); ++j) EXPECT_LE(Cb[j], Ca[j]);
        EXPECT_TRUE(std::is_sorted(Ca.begin(), Ca.end()));
    }
}

TEST(Price, FlatBranchIsSquareRoot) {
    const auto eq = s1_equilibrium();
    auto c = small_config(20);
    c.x0 = 0.3;
    c.xbar0 = 1.0;
    const auto b = simulate_gbm_with_max(market_from_gbm(1.0, 1.0, -0.5, 0.2, 0.3), c);
    for (const auto& p : b.paths) {
        if (p.running_max.back() > 1.0) continue;
        const auto price = equilibrium_price_path(p, *eq);
        for (std::size_t j = 0; j < p.X.size(); ++j) EXPECT_LT(rel_err(price.P[j], std::sqrt(p.X[j])), 1e-13);
    }
}

TEST(Price, ClearingAndPriceEquationAlongPaths) {
    Population pop{s1_producer(0.45, 0.3), s1_producer(0.3, 1.2)};
    pop[1].id = "b";
    const Equilibrium eq(pop, s1_market());
    auto c = small_config(40);
    c.scheme = MaxScheme::Discrete;
    const auto b = simulate_gbm_with_max(s1_market(), c);
    for (const auto& p : b.paths) {
        const auto price = equilibrium_price_path(p, eq);
        EXPECT_LT(price.max_clearing, 1e-6);
        EXPECT_LT(price.max_peqn, 1e-6);
        EXPECT_LT(rel_err(price.P[0], std::sqrt(p.X[0] * eq.phi(p.Xtilde[0]))), 1e-14);
        EXPECT_LT(price_uniqueness_probe(p, price, eq), 1e-6);
        for (std::size_t j = 1; j < p.X.size(); ++j) EXPECT_GE(price.Pbar[j], price.Pbar[j - 1]);
    }
}

TEST(Price, DynamicsExactWithoutNoiseOffTheMaximum) {
    const auto m = market_from_gbm(1.0, 1.0, -0.4, 1e-9, 2.0);
    const Equilibrium eq(s1_population(), m);
    auto c = small_config(2);
    c.x0 = 2.0;
    c.xbar0 = 2.0;
    const auto b = simulate_gbm_with_max(m, c);
    const auto r = price_dynamics_check(b, eq);
    EXPECT_LT(r.max_residual, 1e-12);
}

TEST(Payoff, SingleInitialJumpCost) {
    const auto m = market_from_gbm(1.0, 1.0, 0.0, 1e-12, 2.0);
    const auto p = s1_producer(0.5, 0.5);
    const ControlSolution sol(p, m, std::make_shared<ConstantPhi>(1.0));
    PayoffProblem prob{m, small_config(1), &sol, {{"optimal", 1.0, true}, {"none", 1.0, false}}, 1.0};
    prob.cfg.x0 = 2.0;
    prob.cfg.xbar0 = 4.0;
    const std::size_t steps = prob.cfg.steps();
    const auto path = constant_path(2.0, 4.0, steps);
    std::vector<double> time(steps + 1), disc(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) {
        time[j] = static_cast<double>(j) * prob.cfg.dt();
        disc[j] = std::exp(-p.r * time[j]);
    }
    std::vector<double> row(payoff_row_width(2));
    path_payoffs(path, time, disc, prob, row);
    const double C1 = sol.Gamma(2.0, 4.0);
    double running_opt = 0.0, running_none = 0.0;
    for (std::size_t j = 0; j < steps; ++j) {
        const double w = 0.5 * prob.cfg.dt() * (disc[j] + disc[j + 1]);
        running_opt += w * std::sqrt(C1) * 2.0;
        running_none += w * std::sqrt(0.5) * 2.0;
    }
    EXPECT_LT(rel_err(row[0], running_opt - p.k * (C1 - 0.5)), 1e-12);
    EXPECT_LT(rel_err(row[1], running_none), 1e-12);
}

TEST(Payoff, SerialParallelAndStoredAgree) {
    const auto eq = s1_equilibrium();
    const ControlSolution sol(s1_producer(0.45, 0.3), s1_market(), std::make_shared<EquilibriumPhi>(eq));
    PayoffProblem prob{s1_market(), small_config(200), &sol, {{"optimal", 1.0, true}, {"s", 0.8, true}}, 1.4};
    const std::size_t w = payoff_row_width(2);
    std::vector<double> serial(200 * w), parallel(200 * w), stored(200 * w);
    payoff_rows_serial(prob, serial);
    prob.cfg.threads = 3;
    payoff_rows_parallel(prob, parallel);
    EXPECT_TRUE(same_bits(serial, parallel));

    const auto bundle = simulate_gbm_with_max(s1_market(), prob.cfg);
    std::vector<double> disc;
    for (double t : bundle.time) disc.push_back(std::exp(-2.0 * t));
    for (std::size_t i = 0; i < bundle.paths.size(); ++i)
        path_payoffs(bundle.paths[i], bundle.time, disc, prob, std::span<double>(stored).subspan(i * w, w));
    EXPECT_TRUE(same_bits(serial, stored));
}

TEST(Payoff, NoInvestmentMatchesClosedForm) {
    const auto p = s1_producer(0.45, 0.7);
    const ControlSolution sol(p, s1_market(), std::make_shared<ConstantPhi>(1.3));
    auto c = small_config(20000);
    c.horizon = 5.0;
    c.steps_per_unit = 40;
    const auto study = estimate_payoffs(s1_market(), c, sol, {{"none", 1.0, false}});
    const auto& e = study.estimates[0];
    const double oracle = std::pow(0.7, 0.45) * 1.0 * 1.3 / 1.5;
    EXPECT_LT(std::abs(e.mean - oracle), 3.0 * e.se);
    EXPECT_EQ(e.paths, 20000u);
    // se is the sample standard deviation over sqrt(paths).
    double s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 20000; ++i) {
        const double v = study.rows[i * study.width];
        s += v;
        sq += v * v;
    }
    const double mean = s / 20000.0;
    EXPECT_NEAR(e.se, std::sqrt((sq - 20000.0 * mean * mean) / 19999.0 / 20000.0), 1e-6 * e.se);
}

TEST(Payoff, PairedDifferenceOfIdenticalStrategiesIsZero) {
    const ControlSolution sol(s1_producer(0.45, 0.3), s1_market(), std::make_shared<ConstantPhi>(1.0));
    const auto study = estimate_payoffs(s1_market(), small_config(100), sol, {{"a", 1.0, true}, {"b", 1.0, true}});
    const auto d = paired_difference(study, 1, 0);
    EXPECT_EQ(d.mean, 0.0);
    EXPECT_EQ(d.se, 0.0);
}

TEST(OrderedSum, CompensatesCancellation) {
    const std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    EXPECT_EQ(ordered_sum(v), 2.0);
    EXPECT_EQ(ordered_sum(v, 2, 1), 2.0);
}
