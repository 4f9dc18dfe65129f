#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "meandim/caps.hpp"
#include "meandim/experiment.hpp"
#include "meandim/parallel.hpp"
#include "meandim/subshift.hpp"

using namespace meandim;

namespace {

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument("int");
        } catch (const std::exception&) {
            throw ConfigError("'" + item + "' is not an integer");
        }
    }
    return out;
}

int fail(int code, const std::string& kind, const std::string& message) {
    nlohmann::json err{{"error", kind}, {"message", message}};
    std::cerr << err.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_limit();
    CLI::App app{"meandim: entropy and dimension experiments on symbolic systems"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string eps_text, folner_text, windows_text, w_text, k_text, caps_text;
    std::uint64_t seed = 0;
    bool quiet = false;

    for (const auto& name : experiment_commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--spec", cfg.spec_path, "JSON spec file")->required();
        sub->add_option("--m-max", cfg.m_max, "largest Folner index");
        sub->add_option("--l-max", cfg.l_max, "largest carpet depth");
        sub->add_option("--n-max", cfg.N_max, "largest digit depth");
        sub->add_option("--eps-grid", eps_text, "strictly decreasing scales in (0,1)");
        sub->add_option("--folner", folner_text, "balls|boxes");
        sub->add_option("--windows", windows_text, "explicit Folner indices a,b,c");
        sub->add_option("--w", w_text, "auto|<value>");
        sub->add_option("--s-radius", cfg.s_radius, "radius of the tail window S");
        sub->add_option("--k", k_text, "sharpness values k1,k2,...");
        sub->add_option("--samples", cfg.samples, "sample count");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--caps", caps_text, "cells=..,patterns=..,cloud=..,exact_cover=..");
        sub->add_flag("--quiet", quiet, "do not print the report");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        cfg.command = app.get_subcommands().front()->get_name();
        auto* sub = app.get_subcommands().front();
        if (!eps_text.empty()) cfg.eps_grid = parse_eps_grid(eps_text);
        if (!folner_text.empty()) {
            try {
                cfg.folner = folner_family_from_string(folner_text);
            } catch (const std::exception&) {
                throw ConfigError("--folner must be balls or boxes");
            }
        }
        if (!windows_text.empty()) cfg.windows = parse_int_list(windows_text);
        if (!w_text.empty() && w_text != "auto") {
            try {
                cfg.w = std::stold(w_text);
            } catch (const std::exception&) {
                throw ConfigError("--w must be auto or a number");
            }
        }
        if (!k_text.empty())
            for (auto k : parse_int_list(k_text)) cfg.k_values.push_back(static_cast<int>(k));
        if (sub->count("--seed")) cfg.seed = seed;
        cfg.caps = parse_caps(caps_text);
        cfg.validate();
    } catch (const std::exception& e) {
        return fail(2, "config", e.what());
    }

    nlohmann::json spec;
    try {
        spec = load_json_file(cfg.spec_path);
    } catch (const std::exception& e) {
        return fail(2, "parse", e.what());
    }

    RunReport report;
    try {
        report = run(cfg, spec);
    } catch (const ConfigError& e) {
        return fail(2, "config", e.what());
    } catch (const SpecError& e) {
        return fail(2, "spec", e.what());
    } catch (const CapExceeded& e) {
        return fail(1, "cap", e.what());
    } catch (const std::exception& e) {
        return fail(1, "runtime", e.what());
    }

    try {
        if (!cfg.out_dir.empty()) write_outputs(report, cfg.out_dir);
    } catch (const std::exception& e) {
        return fail(1, "output", e.what());
    }
    if (!quiet) std::cout << report.to_json().dump(2) << "\n";
    if (cfg.command == "validate") return report.passed() ? 0 : 2;
    return report.passed() ? 0 : 1;
}
