#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "meandim/bigint.hpp"
#include "meandim/caps.hpp"
#include "meandim/entropy.hpp"
#include "meandim/group.hpp"
#include "meandim/metrics.hpp"
#include "meandim/subshift.hpp"

namespace meandim {

// ---- self-similar systems: S_w(x) = c x + H(w) over a driving subshift on Z ----

struct SelfSimilarSpec {
    std::string name;
    SubshiftSpec omega;  // rank 1, plain alphabet
    long double c = 0.5L;
    long double rho = 0.25L;
    std::vector<double> values;  // H(w)_g = values[w_g]
    long double d_override = 0;

    void validate() const;
    WeightScheme scheme() const { return WeightScheme(1, rho); }
    long double value_spread() const;
    // coordinate spread of the attractor, spread / (1 - c)
    long double coordinate_spread() const;
    // max(d_override, coordinate_spread * total weight)
    long double diameter_bound() const;
};

// symbol s sits at s (1 - c) / (k - 1), so the attractor lies in [0,1]^Z
SelfSimilarSpec make_selfsimilar(SubshiftSpec omega, long double c, long double rho = 0.25L);
SelfSimilarSpec parse_selfsimilar(const nlohmann::json& doc);
nlohmann::json selfsimilar_to_json(const SelfSimilarSpec& spec);

struct SelfSimilarBound {
    long double entropy = 0;
    long double log_inv_c = 0;
    long double bound = 0;
    std::string provenance;
};

nlohmann::json to_json(const SelfSimilarBound& b);
SelfSimilarBound selfsimilar_upper_bound(const SelfSimilarSpec& spec, const Caps& caps = {});

// smallest m >= 1 with D c^m < eps / 6
std::int64_t selfsimilar_depth(const SelfSimilarSpec& spec, double eps);

// S_{w_1} o ... o S_{w_m}(p) over all m-tuples of net patterns, first word outermost
PointCloud selfsimilar_spanning_cloud(const SelfSimilarSpec& spec, std::int64_t m, const PatternSet& net,
                                      std::span<const double> p, const Caps& caps = {});

namespace reference {
PointCloud selfsimilar_spanning_cloud(const SelfSimilarSpec& spec, std::int64_t m, const PatternSet& net,
                                      std::span<const double> p, const Caps& caps = {});
}  // namespace reference

// max over g in F of the sum over u in F of alpha_{u-g}
long double window_weight(const WeightScheme& scheme, const GroupWindow& F);

struct SelfSimilarProbeRow {
    std::int64_t index = 0;
    std::size_t window_size = 0;
    double eps = 0;
    std::int64_t depth = 0;           // m
    std::int64_t cylinder_depth = 0;  // j
    std::size_t net_size = 0;
    std::size_t cloud_size = 0;  // 0 when the cloud was not materialized
    BigInt lower = 0;            // 0 when not materialized
    BigInt upper = 0;
    long double slope_lower = 0;
    long double slope_upper = 0;
};

struct SelfSimilarProbe {
    SelfSimilarBound bound;
    long double slack = 0.05L;
    std::vector<SelfSimilarProbeRow> rows;
    long double finest_slope = 0;  // last row
    bool within_bound = false;
};

nlohmann::json to_json(const SelfSimilarProbeRow& r);
// distances are the in-window part of d_F on the projected cloud
SelfSimilarProbe selfsimilar_cover_probe(const SelfSimilarSpec& spec, const std::vector<double>& eps,
                                         const FolnerDescriptor& windows, const Caps& caps = {},
                                         std::size_t materialize_limit = 4096);

struct EmbeddingReport {
    std::int64_t k = 0;
    long double ratio = 0;  // c^k
    long double D = 0;
    bool address_found = false;
    std::vector<std::size_t> address;  // net indices, outermost first
    bool lower_ratio_ok = false;       // c^k > c eps / D
    bool in_ball = false;
    double max_error = 0;  // |d(phi x, phi y) - c^k d(x, y)|
    std::size_t pairs_checked = 0;
    bool ok = false;
    std::string reason;
};

nlohmann::json to_json(const EmbeddingReport& r);
// smallest k >= 1 with c^k D <= eps
std::int64_t embedding_depth(long double c, long double D, long double eps);
// q and the samples are configurations on net.window
EmbeddingReport contraction_embedding_check(const SelfSimilarSpec& spec, const PatternSet& net,
                                            std::span<const double> q, double eps,
                                            const std::vector<std::vector<double>>& samples, const GroupWindow& F);

// ---- homogeneous systems: digits on Z^d x N, x_g = sum_n digit(g, n) b^{-(n+1)} ----

struct HomogeneousSpec {
    std::string name;
    int b = 2;
    SubshiftSpec digits;  // rank d + 1, last axis is the depth
    long double rho = 0.25L;

    int rank() const { return digits.rank - 1; }
    long double lipschitz() const { return b; }
    void validate() const;
    WeightScheme scheme() const { return WeightScheme(rank(), rho); }
};

HomogeneousSpec make_homogeneous(int b, SubshiftSpec digits, long double rho = 0.25L);
HomogeneousSpec parse_homogeneous(const nlohmann::json& doc);
nlohmann::json homogeneous_to_json(const HomogeneousSpec& spec);
// digits free in every cell
SubshiftSpec full_digits(int b, int rank = 1);
// forbid digit pair (1,1) along the depth axis
SubshiftSpec vertical_golden_digits(int rank = 1);

struct HomogeneousEntropy {
    EntropySeries series;
    long double entropy = 0;
    long double prediction = 0;  // entropy / log b
    std::string provenance;
};

nlohmann::json to_json(const HomogeneousEntropy& h);
// boxes 1..n_max, depths 1..N_max; estimate is the depth increment on the largest box
HomogeneousEntropy homogeneous_gxn_entropy(const HomogeneousSpec& spec, std::int64_t n_max, std::int64_t N_max,
                                           const Caps& caps = {});

// smallest N with b^{-N} <= eps
std::int64_t homogeneous_depth(int b, double eps);

struct HomogeneousProbeRow {
    std::int64_t index = 0;
    std::size_t window_size = 0;  // |F|
    std::size_t cloud_cells = 0;  // |SF|
    double eps = 0;
    std::int64_t N = 0;
    double scale = 0;  // 1 / (2 c b)
    std::size_t cloud_size = 0;
    BigInt left_lower = 0, left_upper = 0;
    BigInt right_lower = 0, right_upper = 0;
    double max_left_diameter = 0;  // over right-cover sets
    bool transfer_ok = false;
    bool inequality_ok = false;
    long double slope = 0;
};

struct HomogeneousProbe {
    std::vector<HomogeneousProbeRow> rows;
    bool all_ok = true;
    std::string witness;
};

nlohmann::json to_json(const HomogeneousProbeRow& r);
HomogeneousProbe homogeneous_covering_probe(const HomogeneousSpec& spec, const std::vector<double>& eps,
                                            const FolnerDescriptor& windows, std::int64_t s_radius = 0,
                                            const Caps& caps = {});

// ---- K^G with K = {0} u {1/n}, and the cube [0,1]^G ----

enum class KCoordinate { kspace, cube };

struct KSpaceSpec {
    std::string name;
    int rank = 1;
    long double rho = 0.25L;
    KCoordinate coordinate = KCoordinate::kspace;
    FolnerDescriptor windows{FolnerFamily::boxes, {1, 2}};
    std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};

    void validate() const;
    WeightScheme scheme() const { return WeightScheme(rank, rho); }
};

KSpaceSpec parse_kspace(const nlohmann::json& doc);
nlohmann::json kspace_to_json(const KSpaceSpec& spec);

// exact one-dimensional quantities on K: fewest sets of diameter <= delta, largest eps-separated set
std::int64_t k_cover_count(double delta);
std::int64_t k_separated_count(double eps);
// the grid (i + 1/2) / M
std::int64_t grid_cover_count(std::int64_t M, double delta);
std::int64_t grid_separated_count(std::int64_t M, double eps);

// 1/(gamma+1) <= 2 sqrt(eps) < 1/gamma
std::int64_t kg_gamma(double eps);
// 1/(zeta(zeta+1)) <= eps/(4c) < 1/(zeta(zeta-1))
std::int64_t kg_zeta(double eps, long double c);

struct KgRow {
    std::int64_t index = 0;
    std::size_t window_size = 0;  // |F|
    std::size_t sf_size = 0;      // |SF|
    double eps = 0;
    std::int64_t grid = 0;  // cube only
    std::int64_t gamma = 0, zeta = 0;
    BigInt lower = 0;       // separated product on F
    BigInt upper_sub = 0;   // cover of the F-projection
    BigInt upper_full = 0;  // cover of the whole space through S F
    BigInt lower_formula = 0;  // (gamma+1)^|F|
    BigInt upper_formula = 0;  // (2 zeta)^|SF|, or (1 + floor(6c/eps))^|SF| for the cube
    long double slope_lower = 0, slope_upper = 0;
    bool chain_ok = false;
};

struct KgExperiment {
    KCoordinate coordinate = KCoordinate::kspace;
    std::vector<KgRow> rows;
    bool all_ok = true;
    std::string witness;
};

nlohmann::json to_json(const KgRow& r);
KgExperiment kg_covering_experiment(const KSpaceSpec& spec, const Caps& caps = {});

// a point of K: 0, or 1/n stored as log n
struct KPoint {
    bool zero = true;
    long double log_n = 0;
};

struct MassDemoReport {
    int k = 0;
    double eps = 0;
    long double c = 0;
    long double log_delta = 0;
    std::size_t window_size = 0;  // |F|
    std::size_t sf_size = 0;      // |SF|
    std::size_t samples = 0;
    bool hypothesis_ok = true;
    std::string witness;
    long double s_star = 0;
    long double measured_bound = 0;  // 2 s*
    long double bound = 0;           // (12/k) |SF|
    long double per_site = 0;        // bound / |F|
    long double log_tail = 0;        // log of the weight outside S
    bool tail_condition = false;     // log_tail < k^k log delta
};

nlohmann::json to_json(const MassDemoReport& r);
// the nu-mass of the box [x - r, x] through the better of its point masses
long double kg_log_box_mass_lower(const KPoint& x, long double log_r);
MassDemoReport kg_mass_distribution_demo(const KSpaceSpec& spec, int k, const GroupWindow& F, double eps,
                                         std::size_t samples, std::uint64_t seed, std::int64_t s_radius = 0);

struct NuNormalization {
    std::size_t terms = 0;
    long double partial = 0;  // 1/2 + a sum_{n <= terms} 1/n^2
    long double tail_lo = 0, tail_hi = 0;
    bool ok = false;  // [partial + tail_lo, partial + tail_hi] within 1e-9 of 1
};

long double nu_a();  // 3 / pi^2
NuNormalization nu_normalization(std::size_t terms = 1'000'000);

}  // namespace meandim
