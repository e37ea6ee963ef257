// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "capeq/clearing.hpp"
#include "capeq/paths.hpp"
#include "capeq/population.hpp"

namespace capeq {

/// Every numeric threshold used by the verification suites.
struct Tolerances {
    double identity_rel = 1e-10;
    double roundtrip_rel = 1e-8;
    double fixed_point_rel = 1e-8;
    double left_limit_rel = 1e-12;
    double slope_rel = 0.02;
    double hjb_pde_rel = 1e-4;
    double wc_c1_rel = 1e-6;
    double continuity_rel = 1e-8;
    double smooth_pasting_rel = 1e-5;
    double smooth_pasting_cross = 1e-4;
    double fb12_abs = 1e-9;
    double fb3_rel = 1e-6;
    double boundary_rel = 1e-6;
    double inverse_pair_rel = 1e-10;
    double g_root_rel = 1e-8;
    double coefficient_agreement = 1e-7;
    double fd_relative_step = 1e-4;
    double mc_z = 3.0;
    double mc_suboptimal_z = 2.0;
    double clearing_rel = 1e-6;
    double peqn_rel = 1e-6;
    double dynamics_ratio_lo = 0.4;
    double dynamics_ratio_hi = 0.6;

    nlohmann::json to_json() const;
    /// Overrides the fields present in `j`; unknown keys are a ConfigError.
    void merge(const nlohmann::json& j, const std::string& where = "tolerances");
};

/// The (c, x, xbar) grid of the HJB suite. c and x are relative to Phi(xbar) and xbar.
struct HjbGridSpec {
    std::size_t nc = 20;
    std::size_t nx = 20;
    std::size_t nxbar = 20;
    double xbar_min = 0.2;
    double xbar_max = 20.0;
    double c_min = 0.02;  ///< times Phi(xbar)
    double c_max = 3.0;   ///< times Phi(xbar)
    double x_min = 0.1;   ///< times xbar
};

struct McSettings {
    std::string producer;          ///< producer id for value checks; empty: the first
    double constant_phi = 1.0;     ///< phi for the no-investment oracle
    std::size_t price_paths = 2000;
    double dynamics_x0 = 0.0;      ///< start of the price-dynamics study; 0: above every kink
};

struct Scenario {
    std::string id;
    DerivedMarket market;
    Population producers;
    GridSpec grid;
    PathConfig simulation;
    Tolerances tolerances;
    HjbGridSpec hjb;
    McSettings mc;
    std::string output_dir = ".";

    std::size_t producer_index(const std::string& id) const;
};

/// Parses a scenario document. Errors name the offending field path.
Scenario parse_scenario(const nlohmann::json& doc, const std::string& fallback_id = "scenario");
Scenario load_scenario(const std::string& path);

nlohmann::json read_json_file(const std::string& path);

}  // namespace capeq
