// SPDX-License-Identifier: MIT
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "capeq/scenario.hpp"

namespace capeq {

enum class CheckStatus { Pass, Fail, Skip };

std::string to_string(CheckStatus s);

/// One named check: a measured value compared with a tolerance.
struct CheckResult {
    std::string id;
    std::string scenario;
    CheckStatus status = CheckStatus::Skip;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string relation;  ///< how measured is compared with tolerance, e.g. "<="
    std::string notes;

    nlohmann::json to_json() const;
};

/// measured <= tolerance passes; NaN fails.
CheckResult check_at_most(std::string id, const Scenario& s, double measured, double tolerance, std::string notes = {});
/// measured < tolerance passes.
CheckResult check_below(std::string id, const Scenario& s, double measured, double tolerance, std::string notes = {});
/// measured > tolerance passes.
CheckResult check_above(std::string id, const Scenario& s, double measured, double tolerance, std::string notes = {});
/// lo <= measured <= hi passes; `tolerance` records hi and the notes carry lo.
CheckResult check_within(std::string id, const Scenario& s, double measured, double lo, double hi,
                         std::string notes = {});
CheckResult skipped(std::string id, const Scenario& s, std::string why);

std::vector<CheckResult> run_identity_suite(const Scenario& s, std::size_t random_draws = 1000);
std::vector<CheckResult> run_equilibrium_suite(const Scenario& s);
std::vector<CheckResult> run_hjb_suite(const Scenario& s);
std::vector<CheckResult> run_mc_suite(const Scenario& s);

/// Suite selector: "all", "identity", "equilibrium", "hjb" or "mc".
std::vector<CheckResult> run_suites(const Scenario& s, const std::string& selector);

bool all_passed(const std::vector<CheckResult>& results);
nlohmann::json report_json(const std::vector<CheckResult>& results);
std::string summary_table(const std::vector<CheckResult>& results);

}  // namespace capeq
