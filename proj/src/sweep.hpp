#pragma once

// Frontier dynamic program over a window swept in coordinate-lexicographic order.

#include <string>
#include <unordered_map>
#include <vector>

#include "meandim/subshift.hpp"

namespace meandim::detail {

using StateMap = std::unordered_map<std::string, BigInt>;

struct SweepPlan {
    struct Check {
        std::int32_t adjacency = -1;
        std::int32_t pattern = -1;
        std::vector<std::uint32_t> slots;  // positions in the extended key
    };
    struct Step {
        std::uint32_t cell = 0;
        std::vector<std::uint32_t> keep;  // extended-key positions forming the next key
        std::vector<Check> checks;
    };

    const SubshiftSpec* spec = nullptr;
    std::vector<Step> steps;

    explicit SweepPlan(const CompiledRules& rules);

    // extend every state by one cell, trying the given symbols
    StateMap advance(std::size_t p, const StateMap& in, const std::vector<Symbol>& symbols) const;
    std::size_t max_frontier() const { return max_frontier_; }

private:
    std::size_t max_frontier_ = 0;
};

}  // namespace meandim::detail
