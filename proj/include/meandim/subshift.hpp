#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meandim/bigint.hpp"
#include "meandim/caps.hpp"
#include "meandim/group.hpp"

namespace meandim {

using Symbol = std::uint8_t;

class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Alphabet {
    int k = 2;
    int a = 0;  // a, b > 0 iff paired; symbol = u*b + v
    int b = 0;

    static Alphabet plain(int k);
    static Alphabet paired(int a, int b);
    bool is_paired() const { return a > 0; }
    int size() const { return k; }
    int a_part(int s) const { return s / b; }
    int b_part(int s) const { return s % b; }
    int compose(int u, int v) const { return u * b + v; }
    bool operator==(const Alphabet&) const = default;
};

// symbol s at g may be followed by t at g + e_axis iff allowed[s*k + t]
struct AdjacencyRule {
    int axis = 0;
    int k = 0;
    std::vector<std::uint8_t> allowed;

    bool ok(int s, int t) const { return allowed[static_cast<std::size_t>(s * k + t)] != 0; }
    bool trivial() const;
};

struct ForbiddenPattern {
    std::vector<GroupElement> offsets;
    std::vector<Symbol> symbols;
};

enum class RuleClass { full, cellwise, nearest_neighbor, forbidden, composite };
std::string to_string(RuleClass c);

struct SubshiftSpec {
    std::string name;
    int rank = 1;
    Alphabet alphabet;
    RuleClass rule_class = RuleClass::full;
    std::vector<std::uint8_t> allowed;  // per symbol; empty means every symbol
    std::vector<AdjacencyRule> adjacency;
    std::vector<ForbiddenPattern> forbidden;

    bool symbol_allowed(int s) const { return allowed.empty() || allowed[static_cast<std::size_t>(s)] != 0; }
    std::vector<Symbol> allowed_symbols() const;
    std::int64_t declared_radius() const;
    bool nearest_neighbor_only() const { return forbidden.empty(); }
    // free-boundary counting annotation for reports
    std::string semantics() const;
};

SubshiftSpec full_shift(Alphabet alphabet, int rank = 1);
SubshiftSpec cellwise_shift(Alphabet alphabet, const std::vector<int>& allowed, int rank = 1);
// forbid (1,1) along every axis; golden mean for rank 1, hard square for rank 2
SubshiftSpec hard_square(int rank = 1);
void add_forbidden_pairs(SubshiftSpec& spec, int axis, const std::vector<std::pair<int, int>>& pairs);

SubshiftSpec parse_subshift(const nlohmann::json& doc);
// rule object {type, data} against a known alphabet and rank
void apply_rule(SubshiftSpec& spec, const nlohmann::json& rule);
nlohmann::json subshift_to_json(const SubshiftSpec& spec);

// Rules compiled to constraint instances on one window (indices into the window).
class CompiledRules {
public:
    struct Instance {
        std::vector<std::uint32_t> cells;
        std::int32_t adjacency = -1;  // rule index, or -1 for a forbidden pattern
        std::int32_t pattern = -1;
    };

    CompiledRules(const SubshiftSpec& spec, const GroupWindow& window);

    const SubshiftSpec& spec() const { return *spec_; }
    const GroupWindow& window() const { return *window_; }
    const std::vector<Instance>& instances() const { return instances_; }
    // lookup(cell) -> symbol
    template <class Lookup>
    bool satisfied(const Instance& inst, Lookup&& lookup) const {
        if (inst.adjacency >= 0) {
            return spec_->adjacency[static_cast<std::size_t>(inst.adjacency)].ok(lookup(inst.cells[0]),
                                                                                 lookup(inst.cells[1]));
        }
        const auto& p = spec_->forbidden[static_cast<std::size_t>(inst.pattern)];
        for (std::size_t j = 0; j < inst.cells.size(); ++j) {
            if (lookup(inst.cells[j]) != p.symbols[j]) return true;
        }
        return false;
    }
    bool legal(std::span<const Symbol> pattern) const;

private:
    const SubshiftSpec* spec_;
    const GroupWindow* window_;
    std::vector<Instance> instances_;
};

struct PatternSet {
    GroupWindow window;
    Alphabet alphabet;
    std::vector<Symbol> data;  // one byte per cell, window order
    BigInt count = 0;

    std::size_t size() const { return window.empty() ? 0 : data.size() / window.size(); }
    std::span<const Symbol> pattern(std::size_t i) const {
        return {data.data() + i * window.size(), window.size()};
    }
};

struct FiberEntry {
    std::vector<Symbol> v;  // B-pattern, window order
    BigInt t;
};

struct FiberTable {
    GroupWindow window;
    int a = 0;
    int b = 0;
    std::vector<FiberEntry> entries;  // sorted by v

    std::size_t size() const { return entries.size(); }
    BigInt total() const;
    long double max_log_fiber() const;
    std::optional<std::size_t> find(std::span<const Symbol> v) const;
};

bool is_legal(const SubshiftSpec& spec, const GroupWindow& window, std::span<const Symbol> pattern);

PatternSet enumerate_patterns(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps = {});
BigInt count_patterns(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps = {});
PatternSet project(const PatternSet& ps);
FiberTable fiber_counts(const PatternSet& ps);
// fiber table without materializing the patterns
FiberTable fiber_table(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps = {});

// rank-1 nearest-neighbour transfer matrix
bool transfer_matrix_applicable(const SubshiftSpec& spec, const GroupWindow& w);
BigInt count_by_transfer_matrix(const SubshiftSpec& spec, std::int64_t length);
BigInt count_by_sweep(const SubshiftSpec& spec, const GroupWindow& w);
// rank-1 nearest-neighbour: patterns extendable to a bi-infinite legal configuration
BigInt count_globally_legal(const SubshiftSpec& spec, std::int64_t length);

namespace reference {
PatternSet enumerate_patterns(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps = {});
BigInt count_by_backtracking(const SubshiftSpec& spec, const GroupWindow& w);
// fiber counts of the serial enumeration
FiberTable fiber_table(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps = {});
}  // namespace reference

}  // namespace meandim
