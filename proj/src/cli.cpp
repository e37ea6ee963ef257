// SPDX-License-Identifier: MIT
#include "capeq/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "capeq/clearing.hpp"
#include "capeq/control.hpp"
#include "capeq/csv.hpp"
#include "capeq/errors.hpp"
#include "capeq/paths.hpp"
#include "capeq/scenario.hpp"
#include "capeq/verify.hpp"

namespace capeq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct CommonOptions {
    std::string config;
    std::string out_dir;
    std::string tolerances;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

struct Context {
    Scenario scenario;
    fs::path out;
    json metadata;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError(path.string() + ": cannot open for writing");
    os << j.dump(2) << '\n';
}

Context prepare(const std::string& command, const CommonOptions& o) {
    Context ctx;
    ctx.scenario = load_scenario(o.config);
    auto& s = ctx.scenario;
    if (o.seed_set) s.simulation.seed = o.seed;
    if (!o.tolerances.empty()) s.tolerances.merge(read_json_file(o.tolerances), o.tolerances);
    if (o.threads < 0) throw ConfigError("--threads: must be >= 0");
    s.simulation.threads = o.threads;

    std::string dir = s.output_dir;
    if (const char* env = std::getenv("CAPEQ_OUT_DIR"); env && *env) dir = env;
    if (!o.out_dir.empty()) dir = o.out_dir;
    ctx.out = dir;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw ConfigError("output directory '" + dir + "': " + ec.message());

    // Worker count and output location do not change results, so they are not recorded.
    ctx.metadata = json{{"command", command},
                        {"config", o.config},
                        {"scenario", s.id},
                        {"seed", s.simulation.seed},
                        {"tolerances_file", o.tolerances},
                        {"tolerances", s.tolerances.to_json()},
                        {"version", kVersion}};
    return ctx;
}

void finish(const Context& ctx, const json& extra = json::object()) {
    json meta = ctx.metadata;
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    write_json(ctx.out / "metadata.json", meta);
}

std::shared_ptr<const Equilibrium> build_equilibrium(const Scenario& s) {
    const auto report = validate_assumptions(s.producers, s.market);
    if (!report.pass) throw DomainError("the scenario fails validation; run `capeq validate` for details");
    return std::make_shared<const Equilibrium>(s.producers, s.market);
}

int cmd_validate(const CommonOptions& o) {
    auto ctx = prepare("validate", o);
    const auto report = validate_assumptions(ctx.scenario.producers, ctx.scenario.market);
    write_json(ctx.out / "validation.json", report.to_json());
    finish(ctx);
    std::cout << "kappa0 " << format_double(report.kappa0) << ", alpha_bar " << format_double(report.alpha_bar) << "\n";
    for (const auto& f : report.failures) std::cout << "fail: " << f << "\n";
    for (const auto& p : report.producers) {
        for (const auto& f : p.failures) std::cout << "fail: " << p.id << ": " << f << "\n";
        for (const auto& f : p.flags) std::cout << "flag: " << p.id << ": " << f << "\n";
    }
    std::cout << (report.pass ? "PASS" : "FAIL") << "\n";
    return report.pass ? kPass : kCheckFailure;
}

int cmd_equilibrium(const CommonOptions& o) {
    auto ctx = prepare("equilibrium", o);
    const auto& s = ctx.scenario;
    const auto eq = build_equilibrium(s);
    const auto prof = eq->tabulate(s.grid, s.tolerances.fixed_point_rel);

    CsvWriter pb((ctx.out / "profile_pbar.csv").string(), {"pbar", "psi", "h"});
    for (std::size_t j = 0; j < prof.pbar.size(); ++j) pb.row({prof.pbar[j], prof.psi[j], prof.h[j]});
    pb.close();

    std::vector<std::string> header{"xbar", "phi", "u"};
    for (const auto& id : prof.producer_ids) header.push_back("Phi_" + id);
    CsvWriter xb((ctx.out / "profile_xbar.csv").string(), header);
    for (std::size_t j = 0; j < prof.xbar.size(); ++j) {
        std::vector<double> row{prof.xbar[j], prof.phi[j], prof.u[j]};
        for (const auto& col : prof.Phi_star) row.push_back(col[j]);
        xb.row(row);
    }
    xb.close();
    finish(ctx, {{"nodes", prof.pbar.size()}, {"max_fixed_point_residual", prof.max_fixed_point_residual}});
    std::cout << prof.pbar.size() << " nodes, fixed-point residual " << format_double(prof.max_fixed_point_residual)
              << "\n";
    return kPass;
}

int cmd_boundaries(const CommonOptions& o, const std::string& producer) {
    auto ctx = prepare("boundaries", o);
    const auto& s = ctx.scenario;
    const std::size_t idx = s.producer_index(producer);
    const auto eq = build_equilibrium(s);
    const ControlSolution sol(s.producers[idx], s.market, std::make_shared<EquilibriumPhi>(eq));
    const auto& g = s.hjb;
    const auto xbars = log_grid(g.xbar_min, g.xbar_max, g.nxbar);
    const auto crel = log_grid(g.c_min, 1.0, g.nc);
    auto xrel = log_grid(g.x_min, 1.0, g.nx);
    xrel.back() = 1.0;
    const std::string& id = s.producers[idx].id;

    CsvWriter phi((ctx.out / ("boundaries_Phi_" + id + ".csv")).string(), {"xbar", "Phi"});
    CsvWriter G((ctx.out / ("boundaries_G_" + id + ".csv")).string(), {"xbar", "c", "G"});
    CsvWriter Gamma((ctx.out / ("boundaries_Gamma_" + id + ".csv")).string(), {"xbar", "x", "Gamma"});
    for (double xbar : xbars) {
        const double Phi = sol.Phi(xbar);
        phi.row({xbar, Phi});
        for (double cr : crel) G.row({xbar, cr * Phi, sol.G(cr * Phi, xbar)});
        for (double xr : xrel) Gamma.row({xbar, xr * xbar, sol.Gamma(xr * xbar, xbar)});
    }
    phi.close();
    G.close();
    Gamma.close();
    finish(ctx, {{"producer", id}});
    return kPass;
}

int cmd_simulate(const CommonOptions& o) {
    auto ctx = prepare("simulate", o);
    const auto& s = ctx.scenario;
    const auto eq = build_equilibrium(s);
    const std::size_t idx = s.mc.producer.empty() ? 0 : s.producer_index(s.mc.producer);
    const auto& prod = s.producers[idx];
    const ControlSolution sol(prod, s.market, std::make_shared<EquilibriumPhi>(eq));
    const auto& cfg = s.simulation;
    cfg.validate();

    const std::vector<StrategySpec> strategies{{"optimal", 1.0, true}, {"scaled_0.8", 0.8, true},
                                               {"scaled_1.25", 1.25, true}};
    const auto study = estimate_payoffs(s.market, cfg, sol, strategies);

    json est = json::array();
    for (std::size_t k = 0; k < study.estimates.size(); ++k) {
        const auto& e = study.estimates[k];
        json j{{"strategy", e.strategy},   {"mean", e.mean},
               {"se", e.se},               {"paths", e.paths},
               {"tail_bound", e.tail_bound}, {"admissibility", e.admissibility},
               {"tail_warning", e.tail_warning}};
        if (k > 0) {
            const auto d = paired_difference(study, k, 0);
            j["difference_vs_optimal"] = {{"mean", d.mean}, {"se", d.se}};
        }
        est.push_back(j);
    }
    json payoff{{"producer", prod.id},
                {"state", {{"c", prod.c}, {"x", cfg.x0}, {"xbar", cfg.xbar0}}},
                {"horizon", cfg.horizon},
                {"steps", cfg.steps()},
                {"max_scheme", to_string(cfg.scheme)},
                {"estimates", est}};
    try {
        payoff["value_w"] = sol.value_w({prod.c, cfg.x0, cfg.xbar0});
    } catch (const DomainError& e) {
        payoff["value_w"] = nullptr;
        payoff["value_w_note"] = e.what();
    }
    write_json(ctx.out / "payoff.json", payoff);

    // Exported trajectories with the realised strategy and the clearing price.
    const std::size_t n_export = std::min(cfg.export_paths, cfg.paths);
    double worst_clearing = 0.0;
    if (n_export > 0) {
        CsvWriter csv((ctx.out / "paths.csv").string(),
                      {"path", "t", "X", "running_max", "Xtilde", "C", "P", "Pbar", "clearing_residual",
                       "peqn_residual"});
        const double dt = cfg.dt();
        SimulatedPath path;
        for (std::size_t i = 0; i < n_export; ++i) {
            PathStepper stepper(s.market, cfg, i);
            stepper.generate(path);
            const auto C = realize_strategy(path, cfg.xbar0, sol);
            const auto price = equilibrium_price_path(path, *eq, s.tolerances.peqn_rel);
            worst_clearing = std::max(worst_clearing, price.max_clearing);
            for (std::size_t j = 0; j < path.X.size(); ++j)
                csv.row({static_cast<double>(i), static_cast<double>(j) * dt, path.X[j], path.running_max[j],
                         path.Xtilde[j], C[j], price.P[j], price.Pbar[j], price.clearing_residual[j],
                         price.peqn_residual[j]});
        }
        csv.close();
        if (worst_clearing > s.tolerances.clearing_rel)
            throw NumericError("market clearing residual " + format_double(worst_clearing) + " exceeds tolerance");
    }
    finish(ctx, {{"exported_paths", n_export}});
    for (const auto& e : study.estimates)
        std::cout << e.strategy << ": " << format_double(e.mean) << " +- " << format_double(e.se)
                  << (e.tail_warning ? " (tail proxy above budget)" : "") << "\n";
    return kPass;
}

int cmd_verify(const CommonOptions& o, const std::string& suite) {
    auto ctx = prepare("verify", o);
    const auto results = run_suites(ctx.scenario, suite);
    auto report = report_json(results);
    report["suite"] = suite;
    report["scenario"] = ctx.scenario.id;
    write_json(ctx.out / "verify_report.json", report);
    finish(ctx, {{"suite", suite}});
    std::cout << summary_table(results);
    const bool ok = all_passed(results);
    std::cout << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? kPass : kCheckFailure;
}

int cmd_asymptotics(const CommonOptions& o, double zmin, double zmax) {
    auto ctx = prepare("asymptotics", o);
    const auto& s = ctx.scenario;
    const auto eq = build_equilibrium(s);
    const auto fit = fit_asymptotic_slopes(*eq, zmin, zmax);
    const auto lim = asymptotic_limits(alpha_bar(s.producers), s.market.beta, s.market.gamma);
    const double tol = s.tolerances.slope_rel;
    json slopes = json::object();
    bool ok = true;
    auto put = [&](const char* name, double got, double want) {
        const double rel = std::abs(got / want - 1.0);
        ok = ok && rel <= tol;
        slopes[name] = {{"fitted", got}, {"limit", want}, {"relative_error", rel}, {"pass", rel <= tol}};
        std::cout << name << ": " << format_double(got) << " vs " << format_double(want) << "\n";
    };
    put("psi", fit.psi, lim.psi);
    put("psi_derivative", fit.psi_derivative, lim.psi_derivative);
    put("phi", fit.phi, lim.phi);
    put("phi_derivative", fit.phi_derivative, lim.phi_derivative);
    put("xphi", fit.xphi, lim.xphi);
    put("xphi_derivative", fit.xphi_derivative, lim.xphi_derivative);
    write_json(ctx.out / "asymptotics.json",
               {{"zmin", zmin}, {"zmax", zmax}, {"alpha_bar", alpha_bar(s.producers)}, {"slopes", slopes}, {"pass", ok}});
    finish(ctx);
    return ok ? kPass : kCheckFailure;
}

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("config", o.config, "scenario JSON file")->required();
    sub->add_option("--out-dir", o.out_dir, "output directory (overrides CAPEQ_OUT_DIR and the config)");
    sub->add_option("--tolerances", o.tolerances, "JSON file overriding tolerance fields");
    sub->add_option("--seed", o.seed, "random seed")->each([&o](const std::string&) { o.seed_set = true; });
    sub->add_option("--threads", o.threads, "worker cap; 0 uses the OpenMP default");
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Competitive capacity-expansion equilibrium: compute, simulate, verify"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonOptions o;
    std::string producer;
    std::string suite = "all";
    double zmin = 1e3, zmax = 1e6;

    auto* validate = app.add_subcommand("validate", "check the standing assumptions");
    auto* equilibrium = app.add_subcommand("equilibrium", "tabulate the equilibrium price functionals");
    auto* boundaries = app.add_subcommand("boundaries", "emit free-boundary surfaces of one producer");
    auto* simulate = app.add_subcommand("simulate", "simulate paths and estimate payoffs");
    auto* verify = app.add_subcommand("verify", "run verification suites");
    auto* asymptotics = app.add_subcommand("asymptotics", "fit large-argument slopes");
    for (auto* sub : {validate, equilibrium, boundaries, simulate, verify, asymptotics}) add_common(sub, o);
    boundaries->add_option("--producer", producer, "producer id")->required();
    verify->add_option("--suite", suite, "all, identity, equilibrium, hjb or mc");
    asymptotics->add_option("--zmin", zmin, "lower end of the fit range");
    asymptotics->add_option("--zmax", zmax, "upper end of the fit range");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsageError;
    }

    try {
        if (*validate) return cmd_validate(o);
        if (*equilibrium) return cmd_equilibrium(o);
        if (*boundaries) return cmd_boundaries(o, producer);
        if (*simulate) return cmd_simulate(o);
        if (*verify) return cmd_verify(o, suite);
        if (*asymptotics) return cmd_asymptotics(o, zmin, zmax);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCheckFailure;
    }
    return kUsageError;
}

}  // namespace capeq::cli
