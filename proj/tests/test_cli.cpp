#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "meandim/experiment.hpp"
#include "meandim/subshift.hpp"

using namespace meandim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string spec_path(const std::string& name) { return std::string(MEANDIM_SPEC_DIR) + "/" + name + ".json"; }

ExperimentConfig config(const std::string& command, const std::string& spec) {
    ExperimentConfig c;
    c.command = command;
    c.spec_path = spec_path(spec);
    return c;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("meandim_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MEANDIM_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// every numeric leaf sits under an object carrying "provenance"
bool numerics_have_provenance(const json& j, bool covered, std::string& where) {
    if (j.is_number()) {
        if (!covered) where = j.dump();
        return covered;
    }
    if (j.is_object()) {
        const bool here = covered || j.contains("provenance");
        for (const auto& [k, v] : j.items())
            if (!numerics_have_provenance(v, here, where)) {
                where = k + ": " + where;
                return false;
            }
    }
    if (j.is_array())
        for (const auto& v : j)
            if (!numerics_have_provenance(v, covered, where)) return false;
    return true;
}

long double fib(int n) {
    long double a = 0, b = 1;
    for (int i = 0; i < n; ++i) {
        const long double t = a + b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace

TEST_CASE("config parsing and invariants") {
    const Caps c = parse_caps("cells=100,cloud=7");
    CHECK(c.cells == 100);
    CHECK(c.cloud == 7);
    CHECK(c.patterns == Caps{}.patterns);
    CHECK_THROWS_AS(parse_caps("cells=0"), ConfigError);
    CHECK_THROWS_AS(parse_caps("bogus=3"), ConfigError);
    CHECK(parse_eps_grid("0.5,0.25") == std::vector<double>{0.5, 0.25});
    CHECK_THROWS_AS(parse_eps_grid("0.5,x"), ConfigError);

    auto cfg = config("entropy", "golden_mean");
    CHECK_NOTHROW(cfg.validate());
    cfg.eps_grid = {0.1, 0.2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.eps_grid = {1.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.eps_grid = {};
    cfg.command = "nope";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    auto mass = config("kg-mass-demo", "kspace");
    CHECK_THROWS_AS(mass.validate(), ConfigError);
    mass.seed = 1;
    CHECK_NOTHROW(mass.validate());
}

TEST_CASE("validate diagnostics") {
    for (const auto& entry : fs::directory_iterator(MEANDIM_SPEC_DIR)) {
        CAPTURE(entry.path().string());
        CHECK(validate_spec(load_json_file(entry.path().string())).empty());
    }
    const auto bad_carpet = validate_spec(json::parse(R"({"kind":"carpet","a":2,"b":3,"omega":{"rule":{"type":"full"}}})"));
    REQUIRE(bad_carpet.size() == 1);
    CHECK(bad_carpet[0].find("a >= b >= 2") != std::string::npos);
    const auto bad_ss = validate_spec(
        json::parse(R"({"kind":"selfsimilar","c":1,"omega":{"alphabet":{"k":2},"rule":{"type":"full"}}})"));
    REQUIRE(bad_ss.size() == 1);
    CHECK(bad_ss[0].find("c must lie in (0,1)") != std::string::npos);
    // several problems are reported together
    const auto many = validate_spec(
        json::parse(R"({"kind":"selfsimilar","c":[3,2],"rho":2,"omega":{"alphabet":{"k":2},"rule":{"type":"magic"}}})"));
    CHECK(many.size() == 3);
    CHECK(validate_spec(json::parse(R"({"kind":"torus"})")).size() == 1);
}

TEST_CASE("parse errors carry line and column") {
    const auto dir = scratch("parse");
    write_text(dir / "bad.json", "{\n  \"a\": 1,\n  \"b\": ]\n}");
    try {
        load_json_file((dir / "bad.json").string());
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.json:3:8") != std::string::npos);
    }
}

TEST_CASE("carpet-dims on the full 3x2 carpet") {
    auto cfg = config("carpet-dims", "carpet_full_3x2");
    cfg.m_max = 2;
    cfg.l_max = 2;
    const auto rep = run(cfg);
    CHECK(rep.passed());
    // h = log 6, h' = log 2, h^w = log 2 + w log 3 with w = log 2 / log 3
    const double mdim_M = std::log(2.0) / std::log(2.0) + (std::log(6.0) - std::log(2.0)) / std::log(3.0);
    const double mdim_H = (std::log(2.0) + std::log(2.0)) / std::log(2.0);
    CHECK(std::fabs(rep.results["mdim_M"]["value"].get<double>() - mdim_M) <= 1e-9);
    CHECK(std::fabs(rep.results["mdim_H"]["value"].get<double>() - mdim_H) <= 1e-9);
    CHECK(std::fabs(mdim_M - 2) <= 1e-12);
    CHECK(rep.results["sandwich"].size() == 4);
    CHECK(rep.results.contains("hw_series"));
}

TEST_CASE("entropy on the golden mean") {
    auto cfg = config("entropy", "golden_mean");
    cfg.m_max = 16;
    const auto rep = run(cfg);
    CHECK(rep.passed());
    REQUIRE(rep.series.size() == 16);
    const double last = rep.series.back()["per_site"].get<double>();
    CHECK(std::fabs(last - static_cast<double>(std::log(fib(18)) / 16)) <= 1e-12);
    CHECK(std::fabs(last - 0.4909) <= 5e-4);
    CHECK(rep.csv().rfind("m,window_size,log_count,per_site\n", 0) == 0);
}

TEST_CASE("every numeric in a report carries provenance") {
    std::vector<ExperimentConfig> cfgs{config("entropy", "hard_square"),
                                       config("weighted-entropy", "carpet_mcmullen"),
                                       config("carpet-dims", "carpet_golden_b"),
                                       config("selfsimilar-bound", "selfsimilar_golden_c1_2"),
                                       config("selfsimilar-probe", "selfsimilar_full_c1_3"),
                                       config("homog-entropy", "homogeneous_vertical_golden"),
                                       config("homog-probe", "homogeneous_full_b2"),
                                       config("kg-experiment", "cube"),
                                       config("kg-mass-demo", "kspace"),
                                       config("validate", "kspace")};
    for (auto& c : cfgs) {
        CAPTURE(c.command);
        c.m_max = 2;
        c.l_max = 2;
        c.N_max = 3;
        c.seed = 3;
        c.samples = 16;
        const auto rep = run(c);
        CHECK(rep.passed());
        std::string where;
        CHECK_MESSAGE(numerics_have_provenance(rep.results, false, where), where);
        for (const auto& row : rep.series) CHECK(row.contains("provenance"));
    }
}

TEST_CASE("reports are deterministic") {
    auto cfg = config("kg-mass-demo", "kspace");
    cfg.seed = 11;
    cfg.samples = 32;
    const auto a = run(cfg).to_json(false).dump();
    const auto b = run(cfg).to_json(false).dump();
    CHECK(a == b);
    cfg.seed = 12;
    CHECK(run(cfg).to_json(false).dump() != a);
    auto e = config("entropy", "golden_mean");
    CHECK(run(e).to_json(false).dump() == run(e).to_json(false).dump());
}

TEST_CASE("command and spec kind must match") {
    CHECK_THROWS_AS(run(config("carpet-dims", "golden_mean")), ConfigError);
    CHECK_THROWS_AS(run(config("kg-experiment", "carpet_mcmullen")), ConfigError);
}

TEST_CASE("binary exit codes and outputs") {
    const auto dir = scratch("bin");
    write_text(dir / "bad.json", "{\"kind\": \"carpet\", \"a\": 4,, }");
    CHECK(run_cli("entropy --spec " + (dir / "bad.json").string() + " --out " + (dir / "out_bad").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "out_bad"));

    write_text(dir / "c23.json", R"({"kind":"carpet","a":2,"b":3,"omega":{"rule":{"type":"full"}}})");
    CHECK(run_cli("validate --spec " + (dir / "c23.json").string()) == 2);
    CHECK(run_cli("validate --spec " + spec_path("carpet_mcmullen")) == 0);
    CHECK(run_cli("kg-mass-demo --spec " + spec_path("kspace")) == 2);
    CHECK(run_cli("entropy --spec " + spec_path("golden_mean") + " --folner cubes") == 2);
    CHECK(run_cli("entropy --spec " + spec_path("hard_square") + " --m-max 30 --caps cells=100") == 1);

    const auto out = dir / "out";
    CHECK(run_cli("entropy --spec " + spec_path("golden_mean") + " --m-max 8 --quiet --out " + out.string()) == 0);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "series.jsonl"));
    CHECK(fs::exists(out / "summary.csv"));
    CHECK_FALSE(fs::exists(out / "report.json.tmp"));
    std::ifstream in(out / "report.json");
    const auto report = json::parse(in);
    CHECK(report["passed"].get<bool>());
    CHECK(report["config"]["spec"]["name"] == "golden_mean");
    CHECK(report.contains("wall_seconds"));
    CHECK(report["versions"].contains("meandim"));
}
