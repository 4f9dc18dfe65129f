#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meandim/bigint.hpp"
#include "meandim/caps.hpp"
#include "meandim/group.hpp"
#include "meandim/subshift.hpp"

namespace meandim {

struct EntropyRow {
    std::int64_t index = 0;
    std::int64_t depth = 0;  // product windows only
    std::size_t window_size = 0;
    BigInt count = 0;
    long double log_count = 0;
    long double per_site = 0;
};

struct EntropySeries {
    FolnerFamily family = FolnerFamily::boxes;
    std::string semantics;
    bool submultiplicative = false;  // min over rows bounds the limit from above
    bool empty_system = false;
    std::vector<EntropyRow> rows;
};

struct EntropyEstimate {
    long double value = 0;
    std::optional<long double> certified_upper;
    std::string provenance;
};

EntropySeries entropy_series(const SubshiftSpec& spec, const FolnerDescriptor& folner, const Caps& caps = {});
// indices 1..m_max
EntropySeries entropy_series(const SubshiftSpec& spec, FolnerFamily family, std::int64_t m_max, const Caps& caps = {});
EntropyEstimate entropy_estimate(const EntropySeries& series);

// log of the Perron root of the rank-1 transfer matrix
long double spectral_entropy(const SubshiftSpec& spec);

struct WeightedRow {
    std::int64_t index = 0;
    std::size_t window_size = 0;
    long double log_z = 0;
    long double per_site = 0;
    BigInt total = 0;          // |Omega|_w|
    std::size_t projected = 0;  // |Omega'|_w|
    long double log_total = 0;
    long double log_projected = 0;
    long double max_log_fiber = 0;
};

struct WeightedEntropySeries {
    long double w = 1;
    FolnerFamily family = FolnerFamily::balls;
    std::vector<WeightedRow> rows;
};

long double log_partition(const FiberTable& table, long double w);
WeightedRow weighted_row(const FiberTable& table, long double w, std::int64_t index);
// log Z_m(w) against the w=0 / w=1 values and the fiber bracket
bool weighted_bracket_holds(const WeightedRow& row, long double w);
WeightedEntropySeries weighted_entropy_series(const SubshiftSpec& spec, const FolnerDescriptor& folner, long double w,
                                              const Caps& caps = {});

// digit rules on Z^d x N cells (last axis = depth); rows for every (n, N)
EntropySeries gxn_entropy_series(const SubshiftSpec& digit_spec, const FolnerDescriptor& base, std::int64_t depth_max,
                                 const Caps& caps = {});

}  // namespace meandim
