// SPDX-License-Identifier: MIT
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace capeq {

/**
 * One heterogeneous producer class.
 *
 * Each record stands for a continuum of identical price-taking producers of
 * total mass `weight`; a population of finitely many types is a quadrature of
 * the aggregate over producers.
 */
struct ProducerType {
    std::string id;
    double c = 1.0;       ///< initial capability
    double alpha = 0.5;   ///< production-cost exponent, in (0,1)
    double lambda = 1.0;  ///< cost scale
    double k = 1.0;       ///< unit expansion cost
    double r = 1.0;       ///< discount rate
    double weight = 1.0;  ///< quadrature mass
};

using Population = std::vector<ProducerType>;

/// Demand-side primitives: elasticities and the base-demand GBM.
struct MarketParams {
    double beta = 1.0;
    double delta = 1.0;
    double mu_tilde = 0.0;
    double sigma_tilde = 1.0;
    double D0 = 1.0;
};

/// The demand transform X = D^gamma and its GBM coefficients.
struct DerivedMarket {
    double beta = 1.0;
    double delta = 1.0;
    double gamma = 1.0;
    double mu = 0.0;
    double sigma = 1.0;
    double X0 = 1.0;
};

struct CharacteristicRoots {
    double m;  ///< negative root
    double n;  ///< positive root
};

/// Per-producer quantities that follow from the producer record and the market.
struct ProducerDerived {
    CharacteristicRoots roots;
    double epsilon;  ///< margin in the growth condition, must be > 0
    double K;        ///< investment coefficient, NaN when r <= mu
};

struct ProducerCheck {
    std::string id;
    double m = 0.0;
    double n = 0.0;
    double epsilon = 0.0;
    double growth_integrand = 0.0;  ///< lambda * (alpha(n-1)/((r-mu) n k))^(alpha/(1-alpha)) at q = 1
    std::vector<std::string> failures;
    std::vector<std::string> flags;  ///< conditions that disable some formulas but not the model

    bool pass() const { return failures.empty(); }
};

struct ValidationReport {
    double kappa0 = 0.0;
    double alpha_bar = 0.0;
    double growth_integral = 0.0;
    std::vector<ProducerCheck> producers;
    std::vector<std::string> failures;  ///< population-level failures
    bool pass = false;

    nlohmann::json to_json() const;
};

/// Builds the GBM of X = D^gamma: gamma = (1+beta)/(delta+beta), sigma = gamma
/// sigma_tilde, mu = gamma mu_tilde + gamma^2 sigma_tilde^2 / 2, X0 = D0^gamma.
DerivedMarket derive_market(const MarketParams& params);

/// Validates a market given directly by (beta, gamma, mu, sigma, X0).
DerivedMarket market_from_gbm(double beta, double gamma, double mu, double sigma, double X0);

/// Roots m < 0 < n of sigma^2 l^2 / 2 + (mu - sigma^2/2) l - r = 0.
CharacteristicRoots characteristic_roots(double mu, double sigma, double r);

double kappa0(std::span<const ProducerType> population, double beta);

/// Largest alpha among positively weighted types.
double alpha_bar(std::span<const ProducerType> population);

/// Asymptotic log-log slope of xbar * phi(xbar): (1 - abar) / (1 - abar + abar gamma).
double xphi_growth_exponent(double alpha_bar, double gamma);

/// (alpha (n-1) / ((r-mu) n k))^(1/(1-alpha)). Throws DomainError when r <= mu.
double investment_coefficient(const ProducerType& p, const DerivedMarket& market);

ProducerDerived derive_producer(const ProducerType& p, const DerivedMarket& market, double alpha_bar);

/// Profit-maximising production rate lambda (1+beta) C^alpha P^beta.
double production_rate(const ProducerType& p, double C, double P, double beta);

/// Revenue minus production cost per unit time at production rate Q.
double production_profit(const ProducerType& p, double Q, double C, double P, double beta);

/// Running payoff per unit of lambda at the optimal rate: C^alpha P^(1+beta).
double payoff_rate(const ProducerType& p, double C, double P, double beta);

/// Report-based check of the standing assumptions; never throws.
ValidationReport validate_assumptions(std::span<const ProducerType> population,
                                      const DerivedMarket& market);

}  // namespace capeq
