#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meandim/caps.hpp"
#include "meandim/group.hpp"

namespace meandim {

// bad flags, bad spec kind for a command, malformed JSON: exit code 2
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string command;
    std::string spec_path;
    std::int64_t m_max = 4;
    std::int64_t l_max = 3;
    std::int64_t N_max = 4;
    std::vector<double> eps_grid;  // empty: command default
    std::optional<FolnerFamily> folner;
    std::vector<std::int64_t> windows;  // explicit Folner indices
    std::optional<long double> w;       // carpet w override
    std::int64_t s_radius = 0;
    std::vector<int> k_values;  // kg-mass-demo
    std::size_t samples = 256;
    std::optional<std::uint64_t> seed;
    Caps caps;
    std::string out_dir;

    void validate() const;
    nlohmann::json to_json() const;
};

const std::vector<std::string>& experiment_commands();
bool command_samples(const std::string& command);

Caps parse_caps(const std::string& text, Caps base = {});
std::vector<double> parse_eps_grid(const std::string& text);

// parse errors carry path:line:column
nlohmann::json load_json_file(const std::string& path);
// "subshift", "carpet", "selfsimilar", "homogeneous" or "kspace"
std::string spec_kind(const nlohmann::json& doc);
// schema and invariant checks only; empty when the input is valid
std::vector<std::string> validate_spec(const nlohmann::json& doc);

struct Assertion {
    std::string name;
    bool pass = false;
    std::string witness;  // set on failure
};

struct RunReport {
    nlohmann::json config;
    nlohmann::json results = nlohmann::json::object();
    std::vector<nlohmann::json> series;  // one JSON line each
    std::vector<std::string> csv_columns;
    std::vector<Assertion> assertions;
    double wall_seconds = 0;

    bool passed() const;
    void check(const std::string& name, bool pass, const std::string& witness = {});
    nlohmann::json to_json(bool timing = true) const;
    std::string jsonl() const;
    std::string csv() const;
};

nlohmann::json versions();
RunReport run(const ExperimentConfig& config);
RunReport run(const ExperimentConfig& config, const nlohmann::json& spec);

// report.json, series.jsonl, summary.csv; each written to a temporary and renamed
void write_outputs(const RunReport& report, const std::string& dir);
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace meandim
