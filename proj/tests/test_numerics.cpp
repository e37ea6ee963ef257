// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "capeq/errors.hpp"
#include "capeq/quadrature.hpp"
#include "capeq/root_finding.hpp"

using namespace capeq;

TEST(GuardedNewton, FindsCubeRoot) {
    auto g = [](double x) { return std::pair{x * x * x - 2.0, 3.0 * x * x}; };
    EXPECT_NEAR(guarded_newton(g, {0.0, 2.0}, 1e-15), std::cbrt(2.0), 1e-14);
}

TEST(GuardedNewton, SurvivesKinkedFunction) {
    // Piecewise-linear with a kink at the root; Newton alone would cycle.
    auto g = [](double x) { return x < 1.0 ? std::pair{3.0 * (x - 1.0), 3.0} : std::pair{0.01 * (x - 1.0), 0.01}; };
    EXPECT_NEAR(guarded_newton(g, {-5.0, 50.0}, 1e-14), 1.0, 1e-13);
}

TEST(GuardedNewton, ThrowsWithoutBracket) {
    auto g = [](double x) { return std::pair{x + 10.0, 1.0}; };
    EXPECT_THROW(guarded_newton(g, {0.0, 1.0}, 1e-12), NumericError);
}

TEST(ExpandBracket, WalksOutwardBothWays) {
    auto g = [](double x) { return std::pair{x - 100.0, 1.0}; };
    const auto b = expand_bracket(g, 0.0, 1.0);
    EXPECT_LE(b.lo, 100.0);
    EXPECT_GE(b.hi, 100.0);
    auto h = [](double x) { return std::pair{x + 7.0, 1.0}; };
    const auto c = expand_bracket(h, 0.0, 0.5);
    EXPECT_LE(c.lo, -7.0);
    EXPECT_GE(c.hi, -7.0);
}

TEST(ExpandBracket, FailsOnConstantSign) {
    auto g = [](double) { return std::pair{1.0, 0.0}; };
    EXPECT_THROW(expand_bracket(g, 0.0, 1.0, 20), NumericError);
}

TEST(Integrate, PolynomialIsExact) {
    const std::vector<double> none;
    const auto r = integrate([](double x) { return 3.0 * x * x; }, 0.0, 2.0, none, 1e-14);
    EXPECT_NEAR(r.value, 8.0, 1e-13);
}

TEST(Integrate, SplitsAtBreakpoints) {
    const std::vector<double> kinks{0.3};
    const auto r = integrate([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0, kinks, 1e-13);
    EXPECT_NEAR(r.value, 0.5 * (0.09 + 0.49), 1e-14);
}

TEST(Integrate, TinyIntervalTerminates) {
    const std::vector<double> none;
    const double a = 1.0, b = 1.0 + 1e-13;
    const auto r = integrate([](double x) { return std::exp(x); }, a, b, none, 1e-13);
    EXPECT_NEAR(r.value / (std::exp(a) * (b - a)), 1.0, 1e-9);
}

TEST(IntegrateExpTail, ExponentialDecay) {
    const std::vector<double> none;
    const auto r = integrate_exp_tail([](double s) { return std::exp(-1.5 * s); }, 0.0, none, 1e-13);
    EXPECT_NEAR(r.value, 1.0 / 1.5, 1e-11);
}

TEST(IntegrateExpTail, SlowDecayWithKink) {
    const std::vector<double> kinks{2.0};
    auto f = [](double s) { return s < 2.0 ? std::exp(-0.2 * s) : std::exp(-0.4) * std::exp(-0.3 * (s - 2.0)); };
    const double exact = (1.0 - std::exp(-0.4)) / 0.2 + std::exp(-0.4) / 0.3;
    const auto r = integrate_exp_tail(f, 0.0, kinks, 1e-13);
    EXPECT_NEAR(r.value / exact, 1.0, 1e-10);
}

TEST(IntegrateExpTail, DetectsDivergence) {
    const std::vector<double> none;
    EXPECT_THROW(integrate_exp_tail([](double s) { return std::exp(0.1 * s); }, 0.0, none, 1e-12), NumericError);
}
