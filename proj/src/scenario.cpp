// SPDX-License-Identifier: MIT
#include "capeq/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "capeq/errors.hpp"

namespace capeq {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError(path + "." + key + ": unknown field");
}

double number(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw ConfigError(path + "." + key + ": missing required field");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path + "." + key + ": must be finite");
    return d;
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
    return obj.contains(key) ? number(obj, path, key) : fallback;
}

std::size_t count_or(const json& obj, const std::string& path, const char* key, std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(path + "." + key + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

void positive(double v, const std::string& field) {
    if (!(v > 0.0)) throw ConfigError(field + ": must be > 0");
}

DerivedMarket parse_market(const json& m) {
    const std::string path = "market";
    if (!m.is_object()) throw ConfigError("market: expected an object");
    const bool gbm_form = m.contains("gamma") || m.contains("mu") || m.contains("sigma") || m.contains("X0");
    try {
        if (gbm_form) {
            check_keys(m, path, {"beta", "gamma", "mu", "sigma", "X0"});
            return market_from_gbm(number(m, path, "beta"), number(m, path, "gamma"), number(m, path, "mu"),
                                   number(m, path, "sigma"), number_or(m, path, "X0", 1.0));
        }
        check_keys(m, path, {"beta", "delta", "mu_tilde", "sigma_tilde", "D0"});
        MarketParams p;
        p.beta = number(m, path, "beta");
        p.delta = number(m, path, "delta");
        p.mu_tilde = number(m, path, "mu_tilde");
        p.sigma_tilde = number(m, path, "sigma_tilde");
        p.D0 = number_or(m, path, "D0", 1.0);
        return derive_market(p);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

ProducerType parse_producer(const json& p, std::size_t i) {
    const std::string path = "producers[" + std::to_string(i) + "]";
    check_keys(p, path, {"id", "c", "alpha", "lambda", "k", "r", "weight"});
    ProducerType t;
    if (p.contains("id")) {
        if (!p.at("id").is_string()) throw ConfigError(path + ".id: expected a string");
        t.id = p.at("id").get<std::string>();
    } else {
        t.id = "p" + std::to_string(i);
    }
    t.c = number(p, path, "c");
    t.alpha = number(p, path, "alpha");
    t.lambda = number(p, path, "lambda");
    t.k = number(p, path, "k");
    t.r = number(p, path, "r");
    t.weight = number_or(p, path, "weight", 1.0);
    positive(t.c, path + ".c");
    positive(t.lambda, path + ".lambda");
    positive(t.k, path + ".k");
    positive(t.r, path + ".r");
    positive(t.weight, path + ".weight");
    if (!(t.alpha > 0.0 && t.alpha < 1.0)) throw ConfigError(path + ".alpha: must lie in (0,1)");
    return t;
}

}  // namespace

json Tolerances::to_json() const {
    return json{{"identity_rel", identity_rel},
                {"roundtrip_rel", roundtrip_rel},
                {"fixed_point_rel", fixed_point_rel},
                {"left_limit_rel", left_limit_rel},
                {"slope_rel", slope_rel},
                {"hjb_pde_rel", hjb_pde_rel},
                {"wc_c1_rel", wc_c1_rel},
                {"continuity_rel", continuity_rel},
                {"smooth_pasting_rel", smooth_pasting_rel},
                {"smooth_pasting_cross", smooth_pasting_cross},
                {"fb12_abs", fb12_abs},
                {"fb3_rel", fb3_rel},
                {"boundary_rel", boundary_rel},
                {"inverse_pair_rel", inverse_pair_rel},
                {"g_root_rel", g_root_rel},
                {"coefficient_agreement", coefficient_agreement},
                {"fd_relative_step", fd_relative_step},
                {"mc_z", mc_z},
                {"mc_suboptimal_z", mc_suboptimal_z},
                {"clearing_rel", clearing_rel},
                {"peqn_rel", peqn_rel},
                {"dynamics_ratio_lo", dynamics_ratio_lo},
                {"dynamics_ratio_hi", dynamics_ratio_hi}};
}

void Tolerances::merge(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    json current = to_json();
    for (const auto& [key, value] : j.items()) {
        if (!current.contains(key)) throw ConfigError(where + "." + key + ": unknown tolerance");
        if (!value.is_number() || !(value.get<double>() > 0.0))
            throw ConfigError(where + "." + key + ": expected a positive number");
        current[key] = value.get<double>();
    }
    identity_rel = current["identity_rel"];
    roundtrip_rel = current["roundtrip_rel"];
    fixed_point_rel = current["fixed_point_rel"];
    left_limit_rel = current["left_limit_rel"];
    slope_rel = current["slope_rel"];
    hjb_pde_rel = current["hjb_pde_rel"];
    wc_c1_rel = current["wc_c1_rel"];
    continuity_rel = current["continuity_rel"];
    smooth_pasting_rel = current["smooth_pasting_rel"];
    smooth_pasting_cross = current["smooth_pasting_cross"];
    fb12_abs = current["fb12_abs"];
    fb3_rel = current["fb3_rel"];
    boundary_rel = current["boundary_rel"];
    inverse_pair_rel = current["inverse_pair_rel"];
    g_root_rel = current["g_root_rel"];
    coefficient_agreement = current["coefficient_agreement"];
    fd_relative_step = current["fd_relative_step"];
    mc_z = current["mc_z"];
    mc_suboptimal_z = current["mc_suboptimal_z"];
    clearing_rel = current["clearing_rel"];
    peqn_rel = current["peqn_rel"];
    dynamics_ratio_lo = current["dynamics_ratio_lo"];
    dynamics_ratio_hi = current["dynamics_ratio_hi"];
}

std::size_t Scenario::producer_index(const std::string& pid) const {
    for (std::size_t i = 0; i < producers.size(); ++i)
        if (producers[i].id == pid) return i;
    throw ConfigError("unknown producer id '" + pid + "'");
}

Scenario parse_scenario(const json& doc, const std::string& fallback_id) {
    check_keys(doc, "config",
               {"id", "description", "market", "producers", "grid", "simulation", "tolerances", "hjb", "mc",
                "output_dir"});
    Scenario s;
    s.id = doc.contains("id") && doc.at("id").is_string() ? doc.at("id").get<std::string>() : fallback_id;
    if (!doc.contains("market")) throw ConfigError("market: missing required block");
    s.market = parse_market(doc.at("market"));

    if (!doc.contains("producers") || !doc.at("producers").is_array() || doc.at("producers").empty())
        throw ConfigError("producers: expected a non-empty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc.at("producers").size(); ++i) {
        auto p = parse_producer(doc.at("producers").at(i), i);
        if (!ids.insert(p.id).second) throw ConfigError("producers[" + std::to_string(i) + "].id: duplicate id");
        s.producers.push_back(std::move(p));
    }

    if (doc.contains("grid")) {
        const auto& g = doc.at("grid");
        check_keys(g, "grid", {"pbar_min", "pbar_max", "nodes"});
        s.grid.pbar_min = number_or(g, "grid", "pbar_min", s.grid.pbar_min);
        s.grid.pbar_max = number_or(g, "grid", "pbar_max", s.grid.pbar_max);
        s.grid.nodes = count_or(g, "grid", "nodes", s.grid.nodes);
        positive(s.grid.pbar_min, "grid.pbar_min");
        if (!(s.grid.pbar_max > s.grid.pbar_min)) throw ConfigError("grid.pbar_max: must exceed grid.pbar_min");
        if (s.grid.nodes < 2) throw ConfigError("grid.nodes: must be >= 2");
    }

    s.simulation.x0 = s.market.X0;
    s.simulation.xbar0 = s.market.X0;
    if (doc.contains("simulation")) {
        const auto& m = doc.at("simulation");
        const std::string path = "simulation";
        check_keys(m, path,
                   {"horizon", "steps_per_unit", "paths", "seed", "max_scheme", "x0", "xbar0", "export_paths",
                    "tail_budget"});
        auto& c = s.simulation;
        c.horizon = number_or(m, path, "horizon", c.horizon);
        c.steps_per_unit = count_or(m, path, "steps_per_unit", c.steps_per_unit);
        c.paths = count_or(m, path, "paths", c.paths);
        if (m.contains("seed")) {
            if (!m.at("seed").is_number_unsigned() && !m.at("seed").is_number_integer())
                throw ConfigError("simulation.seed: expected an integer");
            c.seed = m.at("seed").get<std::uint64_t>();
        }
        if (m.contains("max_scheme")) {
            if (!m.at("max_scheme").is_string()) throw ConfigError("simulation.max_scheme: expected a string");
            try {
                c.scheme = parse_max_scheme(m.at("max_scheme").get<std::string>());
            } catch (const ConfigError& e) {
                throw ConfigError(std::string("simulation.max_scheme: ") + e.what());
            }
        }
        c.x0 = number_or(m, path, "x0", c.x0);
        c.xbar0 = number_or(m, path, "xbar0", m.contains("x0") ? c.x0 : c.xbar0);
        c.export_paths = count_or(m, path, "export_paths", c.export_paths);
        c.tail_budget = number_or(m, path, "tail_budget", c.tail_budget);
    }
    s.simulation.validate();

    if (doc.contains("tolerances")) s.tolerances.merge(doc.at("tolerances"));

    if (doc.contains("hjb")) {
        const auto& h = doc.at("hjb");
        check_keys(h, "hjb", {"nc", "nx", "nxbar", "xbar_min", "xbar_max", "c_min", "c_max", "x_min"});
        auto& g = s.hjb;
        g.nc = count_or(h, "hjb", "nc", g.nc);
        g.nx = count_or(h, "hjb", "nx", g.nx);
        g.nxbar = count_or(h, "hjb", "nxbar", g.nxbar);
        g.xbar_min = number_or(h, "hjb", "xbar_min", g.xbar_min);
        g.xbar_max = number_or(h, "hjb", "xbar_max", g.xbar_max);
        g.c_min = number_or(h, "hjb", "c_min", g.c_min);
        g.c_max = number_or(h, "hjb", "c_max", g.c_max);
        g.x_min = number_or(h, "hjb", "x_min", g.x_min);
        if (g.nc < 2 || g.nx < 2 || g.nxbar < 2) throw ConfigError("hjb: grid sizes must be >= 2");
        positive(g.xbar_min, "hjb.xbar_min");
        positive(g.c_min, "hjb.c_min");
        positive(g.x_min, "hjb.x_min");
        if (!(g.xbar_max > g.xbar_min)) throw ConfigError("hjb.xbar_max: must exceed hjb.xbar_min");
        if (!(g.c_max > g.c_min)) throw ConfigError("hjb.c_max: must exceed hjb.c_min");
        if (!(g.x_min < 1.0)) throw ConfigError("hjb.x_min: must be < 1");
    }

    if (doc.contains("mc")) {
        const auto& m = doc.at("mc");
        check_keys(m, "mc", {"producer", "constant_phi", "price_paths", "dynamics_x0"});
        if (m.contains("producer")) {
            if (!m.at("producer").is_string()) throw ConfigError("mc.producer: expected a string");
            s.mc.producer = m.at("producer").get<std::string>();
            s.producer_index(s.mc.producer);
        }
        s.mc.constant_phi = number_or(m, "mc", "constant_phi", s.mc.constant_phi);
        positive(s.mc.constant_phi, "mc.constant_phi");
        s.mc.price_paths = count_or(m, "mc", "price_paths", s.mc.price_paths);
        s.mc.dynamics_x0 = number_or(m, "mc", "dynamics_x0", s.mc.dynamics_x0);
    }

    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
        s.output_dir = doc.at("output_dir").get<std::string>();
    }
    return s;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

Scenario load_scenario(const std::string& path) {
    auto doc = read_json_file(path);
    std::string stem = path;
    const auto slash = stem.find_last_of('/');
    if (slash != std::string::npos) stem = stem.substr(slash + 1);
    const auto dot = stem.find_last_of('.');
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    return parse_scenario(doc, stem);
}

}  // namespace capeq
