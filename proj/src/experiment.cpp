#include "meandim/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/version.hpp>

#include "meandim/carpet.hpp"
#include "meandim/entropy.hpp"
#include "meandim/fractal.hpp"
#include "meandim/subshift.hpp"

namespace meandim {

using nlohmann::json;

namespace {

const char* kVersion = "0.1.0";

json pv(double value, const std::string& provenance) { return {{"value", value}, {"provenance", provenance}}; }

json pv_ld(long double value, const std::string& provenance) {
    if (!std::isfinite(value)) return {{"value", nullptr}, {"provenance", provenance}};
    return pv(static_cast<double>(value), provenance);
}

std::string fmt(long double x) {
    std::ostringstream os;
    os.precision(17);
    os << static_cast<double>(x);
    return os.str();
}

void require_kind(const json& spec, std::initializer_list<const char*> kinds, const std::string& command) {
    const auto k = spec_kind(spec);
    for (const char* want : kinds)
        if (k == want) return;
    throw ConfigError("command '" + command + "' does not accept a '" + k + "' spec");
}

FolnerDescriptor windows_for(const ExperimentConfig& c, FolnerFamily default_family, std::int64_t first,
                             std::int64_t last) {
    const FolnerFamily fam = c.folner.value_or(default_family);
    if (!c.windows.empty()) return FolnerDescriptor{fam, c.windows};
    return FolnerDescriptor::range(fam, first, last);
}

json entropy_row_json(const EntropyRow& r) {
    return {{"m", r.index},
            {"window_size", r.window_size},
            {"count", to_string(r.count)},
            {"log_count", static_cast<double>(r.log_count)},
            {"per_site", static_cast<double>(r.per_site)},
            {"provenance", "exact"}};
}

json weighted_row_json(const WeightedRow& r, long double w) {
    return {{"m", r.index},
            {"window_size", r.window_size},
            {"w", static_cast<double>(w)},
            {"log_z", static_cast<double>(r.log_z)},
            {"per_site", static_cast<double>(r.per_site)},
            {"total", to_string(r.total)},
            {"projected", r.projected},
            {"log_total", static_cast<double>(r.log_total)},
            {"log_projected", static_cast<double>(r.log_projected)},
            {"provenance", "exact"}};
}

SubshiftSpec subshift_of(const json& spec) {
    if (spec_kind(spec) == "carpet") return parse_carpet(spec).omega;
    return parse_subshift(spec);
}

void run_validate(const json& spec, RunReport& rep) {
    const auto diags = validate_spec(spec);
    rep.results["kind"] = spec_kind(spec);
    rep.results["diagnostics"] = diags;
    rep.check("spec valid", diags.empty(), diags.empty() ? "" : diags.front());
}

void run_entropy(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"subshift", "carpet"}, c.command);
    const auto omega = subshift_of(spec);
    const auto series = entropy_series(omega, windows_for(c, FolnerFamily::boxes, 1, c.m_max), c.caps);
    rep.results["family"] = to_string(series.family);
    rep.results["semantics"] = series.semantics;
    rep.results["submultiplicative"] = series.submultiplicative;
    rep.results["empty_system"] = series.empty_system;
    const auto est = entropy_estimate(series);
    rep.results["estimate"] = pv_ld(est.value, est.provenance);
    if (est.certified_upper) rep.results["certified_upper"] = pv_ld(*est.certified_upper, "certified-bound");
    for (const auto& r : series.rows) rep.series.push_back(entropy_row_json(r));
    rep.csv_columns = {"m", "window_size", "log_count", "per_site"};
    if (omega.rank == 1 && omega.forbidden.empty() && !series.empty_system) {
        const long double h = spectral_entropy(omega);
        rep.results["spectral"] = pv_ld(h, "exact");
        if (est.certified_upper)
            rep.check("certified upper >= spectral entropy", *est.certified_upper >= h - 1e-12L,
                      fmt(*est.certified_upper) + " < " + fmt(h));
    }
}

void run_weighted(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"carpet", "subshift"}, c.command);
    SubshiftSpec omega;
    long double w = 0;
    if (spec_kind(spec) == "carpet") {
        const auto cs = parse_carpet(spec);
        omega = cs.omega;
        w = c.w.value_or(cs.w());
    } else {
        omega = parse_subshift(spec);
        if (!c.w) throw ConfigError("weighted-entropy on a subshift spec needs --w <value>");
        w = *c.w;
    }
    if (!omega.alphabet.is_paired()) throw ConfigError("weighted entropy needs a paired alphabet");
    const auto series = weighted_entropy_series(omega, windows_for(c, FolnerFamily::balls, 1, c.m_max), w, c.caps);
    rep.results["w"] = pv_ld(w, "exact");
    rep.results["family"] = to_string(series.family);
    for (const auto& r : series.rows) {
        rep.series.push_back(weighted_row_json(r, w));
        rep.check("weighted bracket m=" + std::to_string(r.index), weighted_bracket_holds(r, w),
                  "log_z=" + fmt(r.log_z));
    }
    if (!series.rows.empty()) rep.results["hw"] = pv_ld(series.rows.back().per_site, "estimate");
    rep.csv_columns = {"m", "window_size", "log_z", "per_site"};
}

void run_carpet_dims(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"carpet"}, c.command);
    const auto cs = parse_carpet(spec);
    const auto folner = windows_for(c, FolnerFamily::balls, 1, c.m_max);
    const auto d = carpet_dimensions(cs, folner, c.caps);
    rep.results["w"] = pv_ld(d.w, "exact");
    const std::string h_prov = d.h_source.find("certified") != std::string::npos ? "certified-bound" : "estimate";
    rep.results["h"] = pv_ld(d.h, h_prov);
    rep.results["h_prime"] = pv_ld(d.h_prime, h_prov);
    rep.results["h_source"] = d.h_source;
    rep.results["mdim_M"] = pv_ld(d.mdim_M, "estimate");
    rep.results["mdim_M_closed_form"] = pv_ld(mdim_M_carpet(d.h, d.h_prime, cs.a, cs.b), "estimate");
    json hw_series = json::array();
    long double mdim_H = d.mdim_H;
    if (c.w && std::fabs(*c.w - d.w) > 0) {
        const auto ws = weighted_entropy_series(cs.omega, folner, *c.w, c.caps);
        for (const auto& r : ws.rows) hw_series.push_back(weighted_row_json(r, *c.w));
        rep.results["w_override"] = pv_ld(*c.w, "exact");
        rep.results["hw"] = pv_ld(ws.rows.back().per_site, "estimate");
        mdim_H = mdim_H_carpet(ws.rows.back().per_site, cs.b);
    } else {
        for (const auto& r : d.weighted.rows) hw_series.push_back(weighted_row_json(r, d.w));
        rep.results["hw"] = pv_ld(d.hw, "estimate");
    }
    rep.results["hw_series"] = hw_series;
    rep.results["mdim_H"] = pv_ld(mdim_H, "estimate");
    for (std::size_t i = 0; i < d.weighted.rows.size(); ++i) {
        const auto& r = d.weighted.rows[i];
        rep.series.push_back({{"m", r.index},
                              {"window_size", r.window_size},
                              {"h", static_cast<double>(r.log_total / static_cast<long double>(r.window_size))},
                              {"h_prime", static_cast<double>(r.log_projected / static_cast<long double>(r.window_size))},
                              {"hw", static_cast<double>(r.per_site)},
                              {"mdim_M", static_cast<double>(d.mdim_M_rows[i])},
                              {"mdim_H", static_cast<double>(d.mdim_H_rows[i])},
                              {"provenance", "exact"}});
        rep.check("weighted bracket m=" + std::to_string(r.index), weighted_bracket_holds(r, d.w),
                  "log_z=" + fmt(r.log_z));
    }
    rep.csv_columns = {"m", "window_size", "h", "h_prime", "hw", "mdim_M", "mdim_H"};
    rep.check("mdim_H <= mdim_M + 0.02", mdim_H <= d.mdim_M + 0.02L, fmt(mdim_H) + " > " + fmt(d.mdim_M) + " + 0.02");

    json sandwich = json::array();
    const std::int64_t m_top = std::min<std::int64_t>(1, c.m_max);
    for (std::int64_t m = 0; m <= m_top; ++m) {
        const CarpetWindow cw(cs, m, c.caps);
        for (std::int64_t l = 1; l <= c.l_max; ++l) {
            const auto s = sandwich_check(cw, l, c.caps);
            json j = to_json(s);
            j["provenance"] = "exact";
            sandwich.push_back(j);
            const std::string tag = " m=" + std::to_string(m) + " l=" + std::to_string(l);
            rep.check("sandwich lower" + tag, s.lower_ok,
                      "separated " + to_string(s.separated) + " < product " + to_string(s.product));
            rep.check("sandwich upper" + tag, s.upper_ok,
                      "cover " + to_string(s.cover) + " > product " + to_string(s.product));
        }
    }
    rep.results["sandwich"] = sandwich;
}

std::vector<double> eps_or(const ExperimentConfig& c, std::vector<double> fallback) {
    return c.eps_grid.empty() ? fallback : c.eps_grid;
}

void run_selfsimilar_bound(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"selfsimilar"}, c.command);
    const auto s = parse_selfsimilar(spec);
    const auto b = selfsimilar_upper_bound(s, c.caps);
    rep.results["bound"] = to_json(b);
    rep.results["diameter_bound"] = pv_ld(s.diameter_bound(), "certified-bound");
    rep.series.push_back(to_json(b));
    rep.csv_columns = {"entropy", "log_inv_c", "bound"};
}

void run_selfsimilar_probe(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"selfsimilar"}, c.command);
    const auto s = parse_selfsimilar(spec);
    FolnerDescriptor wins = windows_for(c, FolnerFamily::boxes, 1, c.m_max);
    const auto eps = eps_or(c, {0.25, 0.0625, 0.015625});
    const auto p = selfsimilar_cover_probe(s, eps, wins, c.caps);
    rep.results["bound"] = to_json(p.bound);
    rep.results["slack"] = pv_ld(p.slack, "exact");
    rep.results["finest_slope"] = pv_ld(p.finest_slope, "certified-bound");
    rep.results["gap"] = pv_ld(p.bound.bound - p.finest_slope, "estimate");
    for (const auto& r : p.rows) rep.series.push_back(to_json(r));
    rep.csv_columns = {"index", "window_size", "eps", "depth", "cylinder_depth", "lower", "upper", "slope_upper"};
    rep.check("probe slope <= bound + slack", p.within_bound,
              fmt(p.finest_slope) + " > " + fmt(p.bound.bound) + " + " + fmt(p.slack));
}

void run_homog_entropy(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"homogeneous"}, c.command);
    const auto s = parse_homogeneous(spec);
    const auto h = homogeneous_gxn_entropy(s, c.m_max, c.N_max, c.caps);
    rep.results["entropy"] = pv_ld(h.entropy, h.provenance);
    rep.results["prediction"] = pv_ld(h.prediction, h.provenance);
    rep.results["semantics"] = h.series.semantics;
    for (const auto& r : h.series.rows) {
        json j = entropy_row_json(r);
        j["N"] = r.depth;
        rep.series.push_back(j);
    }
    rep.csv_columns = {"m", "N", "window_size", "log_count", "per_site"};
    rep.check("prediction <= 1", h.prediction <= 1 + 1e-9L, fmt(h.prediction));
}

void run_homog_probe(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"homogeneous"}, c.command);
    const auto s = parse_homogeneous(spec);
    FolnerDescriptor wins = c.windows.empty() ? FolnerDescriptor{c.folner.value_or(FolnerFamily::boxes), {1}}
                                              : windows_for(c, FolnerFamily::boxes, 1, 1);
    const auto p = homogeneous_covering_probe(s, eps_or(c, {0.25, 0.125}), wins, c.s_radius, c.caps);
    rep.results["all_ok"] = p.all_ok;
    for (const auto& r : p.rows) {
        rep.series.push_back(to_json(r));
        const std::string tag = " F=" + std::to_string(r.index) + " eps=" + fmt(r.eps);
        rep.check("transfer" + tag, r.transfer_ok, "right-cover set of left diameter " + fmt(r.max_left_diameter));
        rep.check("left_lower <= right_upper" + tag, r.inequality_ok,
                  to_string(r.left_lower) + " > " + to_string(r.right_upper));
    }
    rep.csv_columns = {"index", "window_size", "eps", "N", "left_lower", "left_upper", "right_lower", "right_upper",
                       "slope"};
}

KSpaceSpec kspace_with_overrides(const ExperimentConfig& c, const json& spec) {
    auto s = parse_kspace(spec);
    if (!c.eps_grid.empty()) s.eps = c.eps_grid;
    if (!c.windows.empty()) s.windows = FolnerDescriptor{c.folner.value_or(s.windows.family), c.windows};
    else if (c.folner) s.windows.family = *c.folner;
    s.validate();
    return s;
}

void run_kg_experiment(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"kspace"}, c.command);
    const auto s = kspace_with_overrides(c, spec);
    const auto e = kg_covering_experiment(s, c.caps);
    rep.results["coordinate"] = s.coordinate == KCoordinate::cube ? "cube" : "kspace";
    rep.results["all_ok"] = e.all_ok;
    for (const auto& r : e.rows) {
        rep.series.push_back(to_json(r));
        rep.check("count chain F=" + std::to_string(r.index) + " eps=" + fmt(r.eps), r.chain_ok,
                  "lower " + to_string(r.lower) + ", upper " + to_string(r.upper_full));
    }
    rep.csv_columns = {"index", "window_size", "sf_size", "eps", "lower", "upper_sub", "upper_full",
                       "lower_formula", "upper_formula", "slope_lower", "slope_upper"};
}

void run_kg_mass_demo(const ExperimentConfig& c, const json& spec, RunReport& rep) {
    require_kind(spec, {"kspace"}, c.command);
    const auto s = kspace_with_overrides(c, spec);
    const std::vector<int> ks = c.k_values.empty() ? std::vector<int>{2, 4, 6} : c.k_values;
    const double eps = c.eps_grid.empty() ? 1e-2 : c.eps_grid.front();
    const GroupSpec g(s.rank);
    for (std::size_t i = 0; i < s.windows.indices.size(); ++i) {
        const auto F = s.windows.window(i, g, c.caps.cells);
        long double prev = 0;
        for (std::size_t j = 0; j < ks.size(); ++j) {
            const auto r = kg_mass_distribution_demo(s, ks[j], F, eps, c.samples, *c.seed, c.s_radius);
            json row = to_json(r);
            row["index"] = s.windows.indices[i];
            rep.series.push_back(row);
            const std::string tag = " F=" + std::to_string(s.windows.indices[i]) + " k=" + std::to_string(ks[j]);
            rep.check("mass hypothesis" + tag, r.hypothesis_ok, r.witness);
            if (j > 0 && ks[j] > ks[j - 1])
                rep.check("bound monotone in k" + tag, r.bound < prev, fmt(r.bound) + " >= " + fmt(prev));
            prev = r.bound;
        }
    }
    const auto nu = nu_normalization();
    rep.results["nu_normalization"] = {{"terms", nu.terms},
                                       {"provenance", "exact"},
                                       {"partial", pv_ld(nu.partial, "exact")},
                                       {"tail_lo", pv_ld(nu.tail_lo, "certified-bound")},
                                       {"tail_hi", pv_ld(nu.tail_hi, "certified-bound")}};
    rep.check("nu is a probability measure", nu.ok, fmt(nu.partial));
    rep.results["eps"] = pv(eps, "exact");
    rep.csv_columns = {"index", "k", "window_size", "sf_size", "samples", "s_star", "bound", "per_site"};
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_object() && v.contains("value")) return csv_cell(v["value"]);
    return v.dump();
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

const std::vector<std::string>& experiment_commands() {
    static const std::vector<std::string> cmds{"validate",        "entropy",          "weighted-entropy",
                                               "carpet-dims",     "selfsimilar-bound", "selfsimilar-probe",
                                               "homog-entropy",   "homog-probe",       "kg-experiment",
                                               "kg-mass-demo"};
    return cmds;
}

bool command_samples(const std::string& command) { return command == "kg-mass-demo"; }

void ExperimentConfig::validate() const {
    const auto& cmds = experiment_commands();
    if (std::find(cmds.begin(), cmds.end(), command) == cmds.end()) throw ConfigError("unknown command '" + command + "'");
    if (m_max < 1 || l_max < 1 || N_max < 1) throw ConfigError("m_max, l_max and N_max must be >= 1");
    if (caps.cells == 0 || caps.patterns == 0 || caps.cloud == 0 || caps.exact_cover == 0)
        throw ConfigError("caps must be positive");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0 && eps_grid[i] < 1)) throw ConfigError("eps grid values must lie in (0,1)");
        if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) throw ConfigError("eps grid must be strictly decreasing");
    }
    if (!windows.empty() && !FolnerDescriptor{FolnerFamily::boxes, windows}.valid())
        throw ConfigError("Folner indices must be strictly increasing");
    if (w && !(*w >= 0 && *w <= 1)) throw ConfigError("w must lie in [0,1]");
    if (s_radius < 0) throw ConfigError("s_radius must be >= 0");
    for (int k : k_values)
        if (k < 1) throw ConfigError("k values must be >= 1");
    if (command_samples(command)) {
        if (!seed) throw ConfigError("command '" + command + "' samples and needs --seed");
        if (samples == 0) throw ConfigError("samples must be positive");
    }
}

json ExperimentConfig::to_json() const {
    json j{{"command", command},
           {"spec_path", spec_path},
           {"m_max", m_max},
           {"l_max", l_max},
           {"N_max", N_max},
           {"eps_grid", eps_grid},
           {"folner", folner ? json(to_string(*folner)) : json(nullptr)},
           {"windows", windows},
           {"w", w ? json(static_cast<double>(*w)) : json(nullptr)},
           {"s_radius", s_radius},
           {"k_values", k_values},
           {"samples", samples},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"caps",
            {{"cells", caps.cells}, {"patterns", caps.patterns}, {"cloud", caps.cloud}, {"exact_cover", caps.exact_cover}}}};
    return j;
}

Caps parse_caps(const std::string& text, Caps base) {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("cap entry '" + item + "' must be name=value");
        const auto name = item.substr(0, eq);
        std::size_t value = 0;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1 || v <= 0) throw std::invalid_argument("cap");
            value = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("cap '" + name + "' needs a positive integer");
        }
        if (name == "cells") base.cells = value;
        else if (name == "patterns") base.patterns = value;
        else if (name == "cloud") base.cloud = value;
        else if (name == "exact_cover") base.exact_cover = value;
        else throw ConfigError("unknown cap '" + name + "'");
    }
    return base;
}

std::vector<double> parse_eps_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("eps");
        } catch (const std::exception&) {
            throw ConfigError("eps grid entry '" + item + "' is not a number");
        }
    }
    return out;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read spec file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " +
                          e.what());
    }
}

std::string spec_kind(const json& doc) {
    if (!doc.is_object()) return "subshift";
    if (doc.contains("kind") && doc["kind"].is_string()) return doc["kind"].get<std::string>();
    if (doc.contains("omega") && doc.contains("a") && doc.contains("b")) return "carpet";
    return "subshift";
}

std::vector<std::string> validate_spec(const json& doc) {
    std::vector<std::string> diags;
    auto attempt = [&](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            diags.emplace_back(e.what());
        }
    };
    if (!doc.is_object()) return {"spec must be a JSON object"};
    const auto kind = spec_kind(doc);
    auto rho_check = [&] {
        if (!doc.contains("rho")) return;
        const auto& r = doc["rho"];
        const double v = r.is_array() && r.size() == 2 ? r[0].get<double>() / r[1].get<double>() : r.get<double>();
        if (!(v > 0 && v < 1)) diags.emplace_back("weights not summable: rho must lie in (0,1)");
    };
    if (kind == "subshift") {
        attempt([&] { parse_subshift(doc); });
    } else if (kind == "carpet") {
        attempt([&] {
            const int a = doc.at("a").get<int>(), b = doc.at("b").get<int>();
            if (!(b >= 2 && a >= b))
                diags.emplace_back("carpet needs a >= b >= 2 (got a=" + std::to_string(a) + ", b=" + std::to_string(b) +
                                   ")");
        });
        attempt([&] {
            if (!doc.contains("omega")) throw SpecError("missing 'omega'");
            json omega = doc["omega"];
            if (!omega.contains("alphabet") && doc.contains("a") && doc.contains("b"))
                omega["alphabet"] = {{"a", doc["a"]}, {"b", doc["b"]}};
            const auto o = parse_subshift(omega);
            if (!o.alphabet.is_paired()) throw SpecError("carpet subshift must use the paired alphabet A x B");
            if (doc.contains("a") && doc.contains("b") &&
                (o.alphabet.a != doc["a"].get<int>() || o.alphabet.b != doc["b"].get<int>()))
                throw SpecError("carpet subshift alphabet does not match a and b");
        });
    } else if (kind == "selfsimilar") {
        attempt([&] {
            if (!doc.contains("c")) throw SpecError("missing 'c'");
            const auto& cj = doc["c"];
            const double c = cj.is_array() && cj.size() == 2 ? cj[0].get<double>() / cj[1].get<double>() : cj.get<double>();
            if (!(c > 0 && c < 1)) diags.emplace_back("contraction ratio c must lie in (0,1) (got " + fmt(c) + ")");
        });
        attempt(rho_check);
        attempt([&] {
            if (!doc.contains("omega")) throw SpecError("missing 'omega'");
            parse_subshift(doc["omega"]);
        });
        if (diags.empty()) attempt([&] { parse_selfsimilar(doc); });
    } else if (kind == "homogeneous") {
        attempt([&] {
            if (doc.value("b", 2) < 2) diags.emplace_back("base b must be >= 2");
        });
        attempt(rho_check);
        if (diags.empty()) attempt([&] { parse_homogeneous(doc); });
    } else if (kind == "kspace") {
        attempt(rho_check);
        if (diags.empty()) attempt([&] { parse_kspace(doc); });
    } else {
        diags.push_back("unknown spec kind '" + kind + "'");
    }
    return diags;
}

bool RunReport::passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

void RunReport::check(const std::string& name, bool pass, const std::string& witness) {
    assertions.push_back({name, pass, pass ? std::string() : witness});
}

json RunReport::to_json(bool timing) const {
    json as = json::array();
    for (const auto& a : assertions) {
        json j{{"name", a.name}, {"outcome", a.pass ? "pass" : "fail"}};
        if (!a.pass) j["witness"] = a.witness;
        as.push_back(j);
    }
    json j{{"config", config}, {"results", results}, {"series", series}, {"assertions", as},
           {"passed", passed()},  {"versions", versions()}};
    if (timing) j["wall_seconds"] = wall_seconds;
    return j;
}

std::string RunReport::jsonl() const {
    std::string out;
    for (const auto& r : series) out += r.dump() + "\n";
    return out;
}

std::string RunReport::csv() const {
    std::string out;
    for (std::size_t i = 0; i < csv_columns.size(); ++i) out += (i ? "," : "") + csv_columns[i];
    out += "\n";
    for (const auto& r : series) {
        for (std::size_t i = 0; i < csv_columns.size(); ++i) {
            if (i) out += ",";
            if (r.contains(csv_columns[i])) out += csv_cell(r[csv_columns[i]]);
        }
        out += "\n";
    }
    return out;
}

json versions() {
    return {{"meandim", kVersion},
            {"compiler", __VERSION__},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

RunReport run(const ExperimentConfig& config) {
    config.validate();
    return run(config, load_json_file(config.spec_path));
}

RunReport run(const ExperimentConfig& config, const json& spec) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.config = config.to_json();
    rep.config["spec"] = spec;
    const auto& cmd = config.command;
    if (cmd == "validate") {
        run_validate(spec, rep);
    } else {
        const auto diags = validate_spec(spec);
        if (!diags.empty()) throw SpecError(diags.front());
        if (cmd == "entropy") run_entropy(config, spec, rep);
        else if (cmd == "weighted-entropy") run_weighted(config, spec, rep);
        else if (cmd == "carpet-dims") run_carpet_dims(config, spec, rep);
        else if (cmd == "selfsimilar-bound") run_selfsimilar_bound(config, spec, rep);
        else if (cmd == "selfsimilar-probe") run_selfsimilar_probe(config, spec, rep);
        else if (cmd == "homog-entropy") run_homog_entropy(config, spec, rep);
        else if (cmd == "homog-probe") run_homog_probe(config, spec, rep);
        else if (cmd == "kg-experiment") run_kg_experiment(config, spec, rep);
        else if (cmd == "kg-mass-demo") run_kg_mass_demo(config, spec, rep);
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_outputs(const RunReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    write_file_atomic((d / "series.jsonl").string(), report.jsonl());
    write_file_atomic((d / "summary.csv").string(), report.csv());
    write_file_atomic((d / "report.json").string(), report.to_json().dump(2) + "\n");
}

}  // namespace meandim
