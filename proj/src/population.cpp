// SPDX-License-Identifier: MIT
#include "capeq/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "capeq/errors.hpp"

namespace capeq {

namespace {

void require_positive(double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << field << " must be a finite positive number (got " << v << ")";
        throw DomainError(os.str());
    }
}

constexpr double kSingularityBand = 1e-8;

}  // namespace

DerivedMarket derive_market(const MarketParams& params) {
    require_positive(params.beta, "market.beta");
    require_positive(params.delta, "market.delta");
    require_positive(params.sigma_tilde, "market.sigma_tilde");
    require_positive(params.D0, "market.D0");
    if (!std::isfinite(params.mu_tilde)) throw DomainError("market.mu_tilde must be finite");

    DerivedMarket m;
    m.beta = params.beta;
    m.delta = params.delta;
    m.gamma = (1.0 + params.beta) / (params.delta + params.beta);
    if (m.gamma > 1.0) throw DomainError("market.delta must be >= 1 so that gamma <= 1");
    m.sigma = m.gamma * params.sigma_tilde;
    m.mu = m.gamma * params.mu_tilde + 0.5 * m.gamma * m.gamma * params.sigma_tilde * params.sigma_tilde;
    m.X0 = std::pow(params.D0, m.gamma);
    return m;
}

DerivedMarket market_from_gbm(double beta, double gamma, double mu, double sigma, double X0) {
    require_positive(beta, "market.beta");
    require_positive(gamma, "market.gamma");
    require_positive(sigma, "market.sigma");
    require_positive(X0, "market.X0");
    if (!std::isfinite(mu)) throw DomainError("market.mu must be finite");
    if (gamma > 1.0) throw DomainError("market.gamma must lie in (0,1]");
    DerivedMarket m;
    m.beta = beta;
    m.gamma = gamma;
    m.delta = (1.0 + beta) / gamma - beta;
    m.mu = mu;
    m.sigma = sigma;
    m.X0 = X0;
    return m;
}

CharacteristicRoots characteristic_roots(double mu, double sigma, double r) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
    if (!(r > 0.0)) throw DomainError("r must be > 0");
    const double s2 = sigma * sigma;
    const double b = mu - 0.5 * s2;
    const double disc = std::sqrt(b * b + 2.0 * s2 * r);
    // Avoid cancellation: compute the root whose numerator has no sign clash,
    // the other one from the product n m = -2 r / sigma^2.
    CharacteristicRoots roots{};
    if (b >= 0.0) {
        roots.m = (-b - disc) / s2;
        roots.n = -2.0 * r / (s2 * roots.m);
    } else {
        roots.n = (-b + disc) / s2;
        roots.m = -2.0 * r / (s2 * roots.n);
    }
    return roots;
}

double kappa0(std::span<const ProducerType> population, double beta) {
    double sum = 0.0;
    for (const auto& p : population) sum += p.weight * p.lambda * std::pow(p.c, p.alpha);
    return (1.0 + beta) * sum;
}

double alpha_bar(std::span<const ProducerType> population) {
    double a = 0.0;
    for (const auto& p : population)
        if (p.weight > 0.0) a = std::max(a, p.alpha);
    return a;
}

double xphi_growth_exponent(double abar, double gamma) {
    return (1.0 - abar) / (1.0 - abar + abar * gamma);
}

double investment_coefficient(const ProducerType& p, const DerivedMarket& market) {
    if (!(p.r > market.mu)) throw DomainError("producer '" + p.id + "': r must exceed mu");
    const auto roots = characteristic_roots(market.mu, market.sigma, p.r);
    const double base = p.alpha * (roots.n - 1.0) / ((p.r - market.mu) * roots.n * p.k);
    return std::pow(base, 1.0 / (1.0 - p.alpha));
}

ProducerDerived derive_producer(const ProducerType& p, const DerivedMarket& market, double abar) {
    ProducerDerived d{};
    d.roots = characteristic_roots(market.mu, market.sigma, p.r);
    d.epsilon = (d.roots.n - 1.0) * (1.0 - p.alpha) / p.alpha - xphi_growth_exponent(abar, market.gamma);
    d.K = p.r > market.mu ? investment_coefficient(p, market) : std::numeric_limits<double>::quiet_NaN();
    return d;
}

double production_rate(const ProducerType& p, double C, double P, double beta) {
    if (!(C > 0.0)) throw DomainError("capability must be > 0");
    if (!(P > 0.0)) throw DomainError("price must be > 0");
    return p.lambda * (1.0 + beta) * std::pow(C, p.alpha) * std::pow(P, beta);
}

double production_profit(const ProducerType& p, double Q, double C, double P, double beta) {
    const double cost = beta / (std::pow(p.lambda, 1.0 / beta) * std::pow(1.0 + beta, 1.0 + 1.0 / beta)) *
                        std::pow(Q, 1.0 + 1.0 / beta) / std::pow(C, p.alpha / beta);
    return Q * P - cost;
}

double payoff_rate(const ProducerType& p, double C, double P, double beta) {
    if (!(C > 0.0)) throw DomainError("capability must be > 0");
    if (!(P > 0.0)) throw DomainError("price must be > 0");
    return std::pow(C, p.alpha) * std::pow(P, 1.0 + beta);
}

ValidationReport validate_assumptions(std::span<const ProducerType> population,
                                      const DerivedMarket& market) {
    ValidationReport report;
    if (population.empty()) {
        report.failures.emplace_back("population is empty");
        return report;
    }
    report.kappa0 = kappa0(population, market.beta);
    report.alpha_bar = alpha_bar(population);
    if (!(market.sigma > 0.0)) report.failures.emplace_back("sigma must be > 0");
    if (!(market.gamma > 0.0 && market.gamma <= 1.0)) report.failures.emplace_back("gamma must lie in (0,1]");
    if (!(report.kappa0 > 0.0 && std::isfinite(report.kappa0)))
        report.failures.emplace_back("kappa0 must be finite and positive");

    for (const auto& p : population) {
        ProducerCheck chk;
        chk.id = p.id;
        if (!(p.c > 0.0)) chk.failures.emplace_back("c must be > 0");
        if (!(p.alpha > 0.0 && p.alpha < 1.0)) chk.failures.emplace_back("alpha must lie in (0,1)");
        if (!(p.lambda > 0.0)) chk.failures.emplace_back("lambda must be > 0");
        if (!(p.k > 0.0)) chk.failures.emplace_back("k must be > 0");
        if (!(p.r > 0.0)) chk.failures.emplace_back("r must be > 0");
        if (!(p.weight > 0.0)) chk.failures.emplace_back("weight must be > 0");
        if (chk.failures.empty() && market.sigma > 0.0) {
            const auto d = derive_producer(p, market, report.alpha_bar);
            chk.m = d.roots.m;
            chk.n = d.roots.n;
            chk.epsilon = d.epsilon;
            if (!(p.r > market.mu)) {
                chk.failures.emplace_back("r_i <= mu");
            } else {
                const double base = p.alpha * (d.roots.n - 1.0) / ((p.r - market.mu) * d.roots.n * p.k);
                chk.growth_integrand = p.lambda * std::pow(base, p.alpha / (1.0 - p.alpha));
                report.growth_integral += p.weight * chk.growth_integrand;
            }
            if (!(d.epsilon > 0.0)) chk.failures.emplace_back("epsilon_i <= 0");
            if (std::abs(d.roots.n * (1.0 - p.alpha) - 1.0) < kSingularityBand)
                chk.flags.emplace_back("B-coefficient singularity: n_i(1-alpha_i) = 1");
        }
        report.producers.push_back(std::move(chk));
    }
    report.pass = report.failures.empty() &&
                  std::all_of(report.producers.begin(), report.producers.end(),
                              [](const ProducerCheck& c) { return c.pass(); });
    return report;
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json j;
    j["kappa0"] = kappa0;
    j["alpha_bar"] = alpha_bar;
    j["growth_integral_q1"] = growth_integral;
    j["pass"] = pass;
    j["failures"] = failures;
    auto arr = nlohmann::json::array();
    for (const auto& p : producers) {
        arr.push_back({{"id", p.id},
                       {"m", p.m},
                       {"n", p.n},
                       {"epsilon", p.epsilon},
                       {"growth_integrand_q1", p.growth_integrand},
                       {"pass", p.pass()},
                       {"failures", p.failures},
                       {"flags", p.flags}});
    }
    j["producers"] = arr;
    return j;
}

}  // namespace capeq
