// SPDX-License-Identifier: MIT
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion with its
// wall-clock time; a criterion also fails when it exceeds its time budget.
// Usage: acceptance <path to capeq executable>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "capeq/clearing.hpp"
#include "capeq/control.hpp"
#include "capeq/paths.hpp"
#include "capeq/scenario.hpp"
#include "capeq/verify.hpp"

using namespace capeq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

Scenario scenario(const std::string& name) { return load_scenario(std::string(CAPEQ_CONFIG_DIR) + "/" + name + ".json"); }

std::string failed_checks(const std::vector<CheckResult>& r) {
    std::string s;
    for (const auto& c : r)
        if (c.status == CheckStatus::Fail) s += c.id + "=" + fmt(c.measured) + " ";
    return s;
}

// --- criterion 1 ------------------------------------------------------------
Outcome root_identities() {
    Outcome o;
    const auto s = scenario("s1");
    const auto r = run_identity_suite(s, 1000);
    double worst = 0.0;
    for (const auto& c : r)
        if (c.id.rfind("identity.", 0) == 0 && c.relation == "<=") worst = std::max(worst, c.measured);
    o.require(all_passed(r), "failing: " + failed_checks(r));
    o.note("worst relative identity error " + fmt(worst) + " over S1 and 1000 random draws");
    return o;
}

// --- criterion 2 ------------------------------------------------------------
Outcome closed_form_equilibrium() {
    Outcome o;
    const auto s = scenario("s1");
    const Equilibrium eq(s.producers, s.market);
    const auto prof = eq.tabulate(s.grid, s.tolerances.fixed_point_rel);
    double e_psi = 0, e_hinv = 0, e_phi = 0, e_Phi = 0;
    for (std::size_t j = 0; j < prof.pbar.size(); ++j) {
        const double p = prof.pbar[j], x = prof.xbar[j];
        e_psi = std::max(e_psi, rel(prof.psi[j], 1.0 / std::max(1.0, p * p)));
        e_hinv = std::max(e_hinv, rel(eq.h_inverse(x), x <= 1.0 ? std::sqrt(x) : std::pow(x, 0.25)));
        e_phi = std::max(e_phi, rel(prof.phi[j], std::min(1.0, 1.0 / std::sqrt(x))));
        e_Phi = std::max(e_Phi, rel(prof.Phi_star[0][j], x <= 1.0 ? x * x : x));
    }
    const double worst = std::max({e_psi, e_hinv, e_phi, e_Phi});
    o.require(worst < 1e-8, "closed-form mismatch " + fmt(worst));
    o.require(prof.max_fixed_point_residual < 1e-8, "fixed point " + fmt(prof.max_fixed_point_residual));
    o.note(std::to_string(prof.pbar.size()) + " nodes; max rel err psi " + fmt(e_psi) + ", h^-1 " + fmt(e_hinv) +
           ", phi " + fmt(e_phi) + ", Phi " + fmt(e_Phi) + "; fixed point " + fmt(prof.max_fixed_point_residual));
    return o;
}

// --- criterion 3 ------------------------------------------------------------
Population random_five_types(const DerivedMarket& m) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (;;) {
        Population pop;
        for (int i = 0; i < 5; ++i) {
            ProducerType p;
            p.id = "r" + std::to_string(i + 1);
            p.c = 0.2 + 2.0 * U(rng);
            p.alpha = 0.15 + 0.6 * U(rng);
            p.lambda = 0.2 + U(rng);
            p.k = 0.05 + 0.3 * U(rng);
            p.r = 1.0 + 2.0 * U(rng);
            p.weight = 0.1 + U(rng);
            pop.push_back(p);
        }
        if (validate_assumptions(pop, m).pass) return pop;
    }
}

Outcome asymptotic_slopes() {
    Outcome o;
    const auto s = scenario("s1");
    auto check = [&](const std::string& name, const Population& pop) {
        const Equilibrium eq(pop, s.market);
        const double ab = alpha_bar(pop);
        const auto fit = fit_asymptotic_slopes(eq, 1e3, 1e6);
        const auto lim = asymptotic_limits(ab, s.market.beta, s.market.gamma);
        const double e1 = rel(fit.psi, lim.psi), e2 = rel(fit.phi, lim.phi), e3 = rel(fit.xphi, lim.xphi);
        const double worst = std::max({e1, e2, e3});
        o.require(worst <= s.tolerances.slope_rel, name + " slope error " + fmt(worst));
        o.note(name + " (alpha_bar " + fmt(ab) + "): rel err psi " + fmt(e1) + ", phi " + fmt(e2) + ", xphi " + fmt(e3));
    };
    check("S1", s.producers);
    const auto pop = random_five_types(s.market);
    std::string alphas;
    for (const auto& p : pop) alphas += fmt(p.alpha) + " ";
    o.note("random alphas " + alphas);
    check("random 5-type", pop);
    return o;
}

// --- criterion 4 ------------------------------------------------------------
Outcome hjb_verification() {
    Outcome o;
    const auto s = scenario("s1_perturbed");
    const auto r = run_hjb_suite(s);
    o.require(all_passed(r), "failing: " + failed_checks(r));
    for (const auto& c : r)
        if (c.id == "hjb.pde_waiting" || c.id == "hjb.continuity_S2" || c.id == "hjb.smooth_pasting_wc" ||
            c.id == "hjb.wc_equals_k_in_C1")
            o.note(c.id + " " + fmt(c.measured));
    o.note(std::to_string(r.size()) + " checks on the " + std::to_string(s.hjb.nc) + "x" + std::to_string(s.hjb.nx) +
           "x" + std::to_string(s.hjb.nxbar) + " grid");
    return o;
}

// --- criterion 5 ------------------------------------------------------------
Outcome coefficient_cross_check() {
    Outcome o;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(std::log(0.05), std::log(1e4));
    for (const char* name : {"s1", "s1_perturbed"}) {
        const auto s = scenario(name);
        auto eq = std::make_shared<const Equilibrium>(s.producers, s.market);
        const ControlSolution sol(s.producers[0], s.market, std::make_shared<EquilibriumPhi>(eq));
        double gap = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto pair = sol.coefficient_A_pair(std::exp(U(rng)));
            gap = std::max(gap, rel(pair.first, pair.second));
        }
        o.require(gap <= 1e-7, std::string(name) + " expressions differ by " + fmt(gap));
        o.note(std::string(name) + " max gap " + fmt(gap));
        if (std::string(name) == "s1") {
            double err = 0.0;
            for (double x : {1.001, 1.5, 3.0, 10.0, 100.0, 1e4}) err = std::max(err, rel(sol.coefficient_A(x), -std::pow(x, -1.5) / 6.0));
            o.require(err <= 1e-8, "S1 closed form off by " + fmt(err));
            o.note("S1 A vs -(1/6) xbar^-1.5: " + fmt(err));
        }
    }
    return o;
}

// --- criteria 6 and 7 -----------------------------------------------------------
PathConfig mc_config(const Scenario& s) {
    PathConfig c = s.simulation;
    c.horizon = 5.0;
    c.steps_per_unit = 200;
    c.paths = 100000;
    return c;
}

Outcome mc_value_match() {
    Outcome o;
    const auto s = scenario("s1");
    const auto& p = s.producers[0];
    const auto cfg = mc_config(s);
    const double tail = std::exp(-p.r * cfg.horizon);
    o.require(tail < 1e-3, "e^-rT = " + fmt(tail));

    const ControlSolution flat(p, s.market, std::make_shared<ConstantPhi>(1.0));
    const auto a = estimate_payoffs(s.market, cfg, flat, {{"no_investment", 1.0, false}}).estimates[0];
    const double oracle = std::pow(p.c, p.alpha) * cfg.x0 / (p.r - s.market.mu);
    const double za = std::abs(a.mean - oracle) / a.se;
    o.require(za <= 3.0, "no-investment z " + fmt(za));

    auto eq = std::make_shared<const Equilibrium>(s.producers, s.market);
    const ControlSolution sol(p, s.market, std::make_shared<EquilibriumPhi>(eq));
    const auto b = estimate_payoffs(s.market, cfg, sol, {{"optimal", 1.0, true}}).estimates[0];
    const double w = sol.value_w({p.c, cfg.x0, cfg.xbar0});
    const double zb = std::abs(b.mean - w) / b.se;
    o.require(zb <= 3.0, "optimal z " + fmt(zb));
    o.note("1e5 paths x " + std::to_string(cfg.steps()) + " steps, e^-rT " + fmt(tail) + "; constant phi: " +
           fmt(a.mean) + " +- " + fmt(a.se) + " vs " + fmt(oracle) + " (z " + fmt(za) + "); optimal: " + fmt(b.mean) +
           " +- " + fmt(b.se) + " vs w " + fmt(w) + " (z " + fmt(zb) + ")");
    return o;
}

Outcome suboptimality() {
    Outcome o;
    const auto s = scenario("s1");
    auto eq = std::make_shared<const Equilibrium>(s.producers, s.market);
    const ControlSolution sol(s.producers[0], s.market, std::make_shared<EquilibriumPhi>(eq));
    const auto study = estimate_payoffs(s.market, mc_config(s), sol,
                                        {{"optimal", 1.0, true}, {"scaled_0.8", 0.8, true}, {"scaled_1.25", 1.25, true}});
    const auto& opt = study.estimates[0];
    for (std::size_t k = 1; k < 3; ++k) {
        const auto& e = study.estimates[k];
        const auto d = paired_difference(study, k, 0);
        // J(perturbed) <= J(optimal) + 2 SE, with SE of the common-random-number difference.
        o.require(d.mean <= 2.0 * d.se, e.strategy + " exceeds optimal by " + fmt(d.mean / d.se) + " SE");
        o.note(e.strategy + " " + fmt(e.mean) + " vs optimal " + fmt(opt.mean) + ", difference " + fmt(d.mean) +
               " (paired SE " + fmt(d.se) + ")");
    }
    return o;
}

// --- criterion 8 ------------------------------------------------------------
Outcome clearing_and_price_law() {
    Outcome o;
    for (const char* name : {"s1", "five_types"}) {
        const auto s = scenario(name);
        const Equilibrium eq(s.producers, s.market);
        PathConfig cfg = s.simulation;
        cfg.paths = s.mc.price_paths;
        const auto bundle = simulate_gbm_with_max(s.market, cfg);
        double clearing = 0.0, peqn = 0.0;
        for (const auto& path : bundle.paths) {
            const auto price = equilibrium_price_path(path, eq, 1.0);
            clearing = std::max(clearing, price.max_clearing);
            peqn = std::max(peqn, price.max_peqn);
        }
        o.require(clearing < 1e-6, std::string(name) + " clearing " + fmt(clearing));
        o.require(peqn < 1e-6, std::string(name) + " price equation " + fmt(peqn));
        o.note(std::string(name) + ": " + std::to_string(cfg.paths) + " paths x " + std::to_string(cfg.steps()) +
               " steps, clearing " + fmt(clearing) + ", price equation " + fmt(peqn));
    }
    const auto s = scenario("s1");
    const Equilibrium eq(s.producers, s.market);
    PathConfig cfg = s.simulation;
    cfg.paths = s.mc.price_paths;
    cfg.x0 = cfg.xbar0 = 2.0;  // above the activation point, where the reflection term is active
    const auto ref = price_dynamics_refinement(s.market, cfg, eq);
    o.require(ref.ratio >= 0.4 && ref.ratio <= 0.6, "refinement ratio " + fmt(ref.ratio));
    o.note("dynamics residual " + fmt(ref.coarse.mean_path_max) + " -> " + fmt(ref.fine.mean_path_max) +
           " when steps double (ratio " + fmt(ref.ratio) + ")");
    return o;
}

// --- criterion 9 ------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

Outcome determinism(const std::string& exe) {
    Outcome o;
    if (exe.empty()) {
        o.require(false, "no capeq executable given");
        return o;
    }
    const fs::path root = fs::temp_directory_path() / "capeq_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    auto doc = read_json_file(std::string(CAPEQ_CONFIG_DIR) + "/s1_perturbed.json");
    doc["simulation"]["paths"] = 4000;
    doc["mc"]["price_paths"] = 200;
    const auto cfg = (root / "s1_small.json").string();
    std::ofstream(cfg) << doc.dump(2);

    const std::vector<std::string> commands{"validate", "equilibrium", "boundaries --producer a", "simulate",
                                            "verify --suite identity", "asymptotics"};
    const std::vector<std::pair<std::string, std::string>> runs{{"run1", "1"}, {"run2", "1"}, {"run3", "4"}};
    std::size_t compared = 0;
    for (const auto& cmd : commands) {
        for (const auto& [dir, threads] : runs) {
            const std::string line = "\"" + exe + "\" " + cmd + " \"" + cfg + "\" --seed 17 --threads " + threads +
                                     " --out-dir \"" + (root / dir).string() + "\" > /dev/null";
            if (std::system(line.c_str()) != 0) o.require(false, "command failed: " + cmd);
        }
        for (const auto& entry : fs::directory_iterator(root / "run1")) {
            const auto name = entry.path().filename();
            const auto a = slurp(entry.path());
            for (const char* other : {"run2", "run3"}) {
                const auto b = slurp(root / other / name);
                if (a != b) o.require(false, name.string() + " differs in " + other + " after " + cmd);
            }
            ++compared;
        }
    }
    o.note(std::to_string(compared) + " file comparisons over 3 runs (threads 1, 1, 4)");
    fs::remove_all(root);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string exe = argc > 1 ? argv[1] : "";
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "root identities", 1.0, root_identities},
        {2, "closed-form equilibrium", 1.0, closed_form_equilibrium},
        {3, "asymptotic slopes", 5.0, asymptotic_slopes},
        {4, "HJB verification", 30.0, hjb_verification},
        {5, "coefficient cross-check", 5.0, coefficient_cross_check},
        {6, "Monte Carlo value match", 60.0, mc_value_match},
        {7, "suboptimality", 90.0, suboptimality},
        {8, "market clearing and price law", 60.0, clearing_and_price_law},
        {9, "determinism", 0.0, [&] { return determinism(exe); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) o.require(false, "time budget " + fmt(c.budget_s) + " s exceeded");
        failures += o.pass ? 0 : 1;
        std::printf("criterion %d %-30s %s  %8.2f s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
