#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meandim/bigint.hpp"
#include "meandim/caps.hpp"
#include "meandim/group.hpp"

namespace meandim {

// a set qualifies for "diam < eps" when diam <= eps - kStrictTol
inline constexpr double kStrictTol = 1e-12;

// alpha_g = rho^{|g|}, so alpha at the identity is 1
class WeightScheme {
public:
    WeightScheme(int rank, long double rho);

    int rank() const { return rank_; }
    long double rho() const { return rho_; }
    long double alpha(const GroupElement& g) const;
    long double alpha_length(std::int64_t n) const;
    // sum over all of Z^d
    long double total() const;
    // sum over g with |g| > r
    long double tail(std::int64_t r) const;
    // sum over the complement of w
    long double complement_weight(const GroupWindow& w) const;
    long double weight_sum(const GroupWindow& w) const;
    // smallest r with tail(r) < eps / 2
    std::int64_t tail_radius(long double eps) const;

private:
    int rank_;
    long double rho_;
};

GroupWindow tail_support(const WeightScheme& scheme, long double eps, std::size_t cap = Caps{}.cells);

enum class CoordKind { interval, torus, kspace, pair };
std::string to_string(CoordKind k);
CoordKind coord_kind_from_string(const std::string& s);

// kspace coordinates store the integer n of 1/n, with 0 standing for the point 0
double coordinate_value(CoordKind kind, double stored);
double coordinate_distance(CoordKind kind, const double* x, const double* y);
double coordinate_diameter(CoordKind kind);
inline int coordinate_width(CoordKind kind) { return kind == CoordKind::pair ? 2 : 1; }

struct PointCloud {
    GroupWindow window;
    CoordKind kind = CoordKind::interval;
    std::vector<double> data;  // point-major, window order

    PointCloud(GroupWindow w, CoordKind k) : window(std::move(w)), kind(k) {}
    std::size_t width() const { return window.size() * static_cast<std::size_t>(coordinate_width(kind)); }
    std::size_t size() const { return width() == 0 ? 0 : data.size() / width(); }
    std::span<const double> point(std::size_t i) const { return {data.data() + i * width(), width()}; }
    void push(std::span<const double> p);
};

struct Interval {
    double lo = 0;
    double hi = 0;
};

Interval product_distance(std::span<const double> x, std::span<const double> y, const WeightScheme& scheme,
                          const GroupWindow& w, CoordKind kind);

// d_F(x, y) = max over g in F of d(gx, gy), with (gx)_u = x_{u+g}
class DynamicalMetric {
public:
    DynamicalMetric(const PointCloud& cloud, const WeightScheme& scheme, const GroupWindow& F);

    Interval operator()(std::size_t i, std::size_t j) const;
    Interval between(std::span<const double> x, std::span<const double> y) const;
    const PointCloud& cloud() const { return *cloud_; }
    std::size_t window_size() const { return weights_.size(); }

private:
    const PointCloud* cloud_;
    std::vector<std::vector<double>> weights_;  // per g, per stored cell
    std::vector<double> tails_;
};

using DistanceOracle = std::function<Interval(std::size_t, std::size_t)>;

struct CoverSet {
    std::vector<std::size_t> members;
    double diameter = 0;  // upper bound
};

enum class CoverMode { exact, bounds };

struct CoverReport {
    double eps = 0;
    BigInt lower = 0;
    BigInt upper = 0;
    bool exact = false;
    std::size_t window_size = 0;
    double seconds = 0;
    std::vector<std::size_t> separated;
    std::vector<CoverSet> cover;
};

nlohmann::json to_json(const CoverReport& r);

// greedy in index order; pairwise lower distances >= eps
std::vector<std::size_t> separated_set(std::size_t n, const DistanceOracle& d, double eps);
// greedy clique cover; every set has diameter <= eps - kStrictTol
std::vector<CoverSet> greedy_cover(std::size_t n, const DistanceOracle& d, double eps);
// minimum cover by arbitrary subsets of the cloud
std::vector<CoverSet> minimum_cover(std::size_t n, const DistanceOracle& d, double eps, std::size_t limit);

CoverReport covering_number(std::size_t n, const DistanceOracle& d, double eps, CoverMode mode,
                            const Caps& caps = {});
CoverReport covering_number(const DynamicalMetric& metric, double eps, CoverMode mode, const Caps& caps = {});
// independent eps values, merged in input order
std::vector<CoverReport> covering_sweep(std::size_t n, const DistanceOracle& d, const std::vector<double>& eps,
                                        CoverMode mode, const Caps& caps = {});

struct CoverSummary {
    double diameter = 0;
    BigInt multiplicity = 1;
};

long double hausdorff_sum(const std::vector<CoverSummary>& cover, long double s, double eps);
long double hausdorff_sum(const std::vector<CoverSet>& cover, long double s, double eps);
std::vector<CoverSummary> summarize(const std::vector<CoverSet>& cover);

struct HausdorffOptions {
    long double cap = 1000;
    long double tol = 1e-6;
};

// sup{s : min over covers of the s-sum >= 1}, an upper bound at this scale
long double hausdorff_dim_upper(const std::vector<std::vector<CoverSummary>>& covers, HausdorffOptions opt = {});

struct MassSet {
    std::vector<std::size_t> points;
    long double log_mass = 0;
    long double log_diameter = 0;
};

struct MassDistributionInput {
    std::size_t support = 0;
    std::vector<long double> log_point_mass;  // optional; checked to sum to 1
    std::vector<MassSet> family;
};

struct MassBound {
    bool ok = false;
    long double s = 0;
    long double bound = 0;  // 2s
    std::string reason;
};

MassBound mass_distribution_bound(const MassDistributionInput& in, long double eps);

namespace reference {
std::vector<std::size_t> separated_set(std::size_t n, const DistanceOracle& d, double eps);
std::vector<CoverSet> greedy_cover(std::size_t n, const DistanceOracle& d, double eps);
}  // namespace reference

}  // namespace meandim
