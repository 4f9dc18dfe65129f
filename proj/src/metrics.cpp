#include "meandim/metrics.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace meandim {

namespace {

constexpr long double kInf = std::numeric_limits<long double>::infinity();

long double log_sum_exp(const std::vector<long double>& xs) {
    long double m = -kInf;
    for (auto x : xs) m = std::max(m, x);
    if (std::isinf(m)) return m;
    long double acc = 0;
    for (auto x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

std::int64_t sphere_size(int rank, std::int64_t k) {
    if (k == 0) return 1;
    return static_cast<std::int64_t>(ball_size(rank, k) - ball_size(rank, k - 1));
}

}  // namespace

WeightScheme::WeightScheme(int rank, long double rho) : rank_(rank), rho_(rho) {
    if (rank < 1) throw std::invalid_argument("weight scheme rank must be >= 1");
    if (!(rho > 0 && rho < 1)) throw std::invalid_argument("weight decay rho must lie in (0,1)");
}

long double WeightScheme::alpha_length(std::int64_t n) const { return std::pow(rho_, static_cast<long double>(n)); }

long double WeightScheme::alpha(const GroupElement& g) const { return alpha_length(word_length(g)); }

long double WeightScheme::total() const { return std::pow((1 + rho_) / (1 - rho_), static_cast<long double>(rank_)); }

long double WeightScheme::tail(std::int64_t r) const {
    if (r < 0) return total();
    if (rank_ == 1) return 2 * std::pow(rho_, static_cast<long double>(r + 1)) / (1 - rho_);
    // sphere sizes grow polynomially; sum until the ratio bound makes the rest negligible
    long double sum = 0;
    for (std::int64_t k = r + 1;; ++k) {
        const long double term = static_cast<long double>(sphere_size(rank_, k)) * alpha_length(k);
        sum += term;
        const long double q =
            rho_ * static_cast<long double>(sphere_size(rank_, k + 1)) / static_cast<long double>(sphere_size(rank_, k));
        if (q < 1 && term * q / (1 - q) < sum * 1e-21L) return sum + term * q / (1 - q);
    }
}

long double WeightScheme::weight_sum(const GroupWindow& w) const {
    long double s = 0;
    for (const auto& g : w.elements()) s += alpha(g);
    return s;
}

long double WeightScheme::complement_weight(const GroupWindow& w) const {
    if (w.kind() == WindowKind::ball) return tail(w.parameter());
    return std::max(0.0L, total() - weight_sum(w));
}

std::int64_t WeightScheme::tail_radius(long double eps) const {
    if (!(eps > 0)) throw std::invalid_argument("tail_support needs eps > 0");
    std::int64_t r = 0;
    while (!(tail(r) < eps / 2)) ++r;
    return r;
}

GroupWindow tail_support(const WeightScheme& scheme, long double eps, std::size_t cap) {
    return GroupWindow::ball(scheme.tail_radius(eps), GroupSpec(scheme.rank()), cap);
}

std::string to_string(CoordKind k) {
    switch (k) {
        case CoordKind::interval: return "interval";
        case CoordKind::torus: return "torus";
        case CoordKind::kspace: return "kspace";
        case CoordKind::pair: return "pair";
    }
    return "?";
}

CoordKind coord_kind_from_string(const std::string& s) {
    if (s == "interval") return CoordKind::interval;
    if (s == "torus") return CoordKind::torus;
    if (s == "kspace") return CoordKind::kspace;
    if (s == "pair") return CoordKind::pair;
    throw std::invalid_argument("unknown coordinate kind '" + s + "'");
}

double coordinate_value(CoordKind kind, double stored) {
    if (kind == CoordKind::kspace) return stored == 0 ? 0.0 : 1.0 / stored;
    return stored;
}

double coordinate_distance(CoordKind kind, const double* x, const double* y) {
    switch (kind) {
        case CoordKind::interval: return std::fabs(x[0] - y[0]);
        case CoordKind::torus: {
            double t = std::fabs(x[0] - y[0]);
            t -= std::floor(t);
            return std::min(t, 1.0 - t);
        }
        case CoordKind::kspace:
            return std::fabs(coordinate_value(kind, x[0]) - coordinate_value(kind, y[0]));
        case CoordKind::pair: return std::max(std::fabs(x[0] - y[0]), std::fabs(x[1] - y[1]));
    }
    return 0;
}

double coordinate_diameter(CoordKind kind) { return kind == CoordKind::torus ? 0.5 : 1.0; }

void PointCloud::push(std::span<const double> p) {
    if (p.size() != width()) throw std::invalid_argument("point has wrong width for cloud");
    data.insert(data.end(), p.begin(), p.end());
}

Interval product_distance(std::span<const double> x, std::span<const double> y, const WeightScheme& scheme,
                          const GroupWindow& w, CoordKind kind) {
    const auto width = static_cast<std::size_t>(coordinate_width(kind));
    if (x.size() != w.size() * width || y.size() != w.size() * width)
        throw std::invalid_argument("configuration does not match window");
    long double lo = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
        lo += scheme.alpha(w[i]) * coordinate_distance(kind, &x[i * width], &y[i * width]);
    const long double tail = scheme.complement_weight(w) * coordinate_diameter(kind);
    return {static_cast<double>(lo), static_cast<double>(lo + tail)};
}

DynamicalMetric::DynamicalMetric(const PointCloud& cloud, const WeightScheme& scheme, const GroupWindow& F)
    : cloud_(&cloud) {
    if (F.rank() != cloud.window.rank() || scheme.rank() != F.rank())
        throw std::invalid_argument("dynamical metric: rank mismatch");
    const auto& W = cloud.window;
    const long double diam = coordinate_diameter(cloud.kind);
    for (const auto& g : F.elements()) {
        std::vector<double> w(W.size());
        long double inside = 0;
        for (std::size_t u = 0; u < W.size(); ++u) {
            const long double a = scheme.alpha(W[u] - g);
            w[u] = static_cast<double>(a);
            inside += a;
        }
        weights_.push_back(std::move(w));
        tails_.push_back(static_cast<double>(std::max(0.0L, scheme.total() - inside) * diam));
    }
}

Interval DynamicalMetric::between(std::span<const double> x, std::span<const double> y) const {
    const auto& W = cloud_->window;
    const auto width = static_cast<std::size_t>(coordinate_width(cloud_->kind));
    std::vector<double> delta(W.size());
    for (std::size_t u = 0; u < W.size(); ++u) delta[u] = coordinate_distance(cloud_->kind, &x[u * width], &y[u * width]);
    Interval r{0, 0};
    for (std::size_t g = 0; g < weights_.size(); ++g) {
        double lo = 0;
        for (std::size_t u = 0; u < W.size(); ++u) lo += weights_[g][u] * delta[u];
        r.lo = std::max(r.lo, lo);
        r.hi = std::max(r.hi, lo + tails_[g]);
    }
    return r;
}

Interval DynamicalMetric::operator()(std::size_t i, std::size_t j) const {
    return between(cloud_->point(i), cloud_->point(j));
}

nlohmann::json to_json(const CoverReport& r) {
    return {{"eps", r.eps},         {"lower", to_string(r.lower)},      {"upper", to_string(r.upper)},
            {"exact", r.exact},     {"window_size", r.window_size},     {"seconds", r.seconds}};
}

// ---- separated sets and covers ----

namespace reference {

std::vector<std::size_t> separated_set(std::size_t n, const DistanceOracle& d, double eps) {
    std::vector<std::size_t> kept;
    for (std::size_t p = 0; p < n; ++p) {
        bool ok = true;
        for (auto q : kept) {
            if (d(p, q).lo < eps) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(p);
    }
    return kept;
}

std::vector<CoverSet> greedy_cover(std::size_t n, const DistanceOracle& d, double eps) {
    const double limit = eps - kStrictTol;
    std::vector<char> covered(n, 0);
    std::vector<CoverSet> out;
    for (std::size_t v = 0; v < n; ++v) {
        if (covered[v]) continue;
        CoverSet set{{v}, 0};
        covered[v] = 1;
        for (std::size_t j = v + 1; j < n; ++j) {
            if (covered[j]) continue;
            double worst = 0;
            bool ok = true;
            for (auto m : set.members) {
                const double h = d(j, m).hi;
                if (h > limit) {
                    ok = false;
                    break;
                }
                worst = std::max(worst, h);
            }
            if (!ok) continue;
            set.members.push_back(j);
            set.diameter = std::max(set.diameter, worst);
            covered[j] = 1;
        }
        out.push_back(std::move(set));
    }
    return out;
}

}  // namespace reference

std::vector<std::size_t> separated_set(std::size_t n, const DistanceOracle& d, double eps) {
    // blocks are screened in parallel against the points kept so far, then settled serially;
    // the result equals the serial greedy pass
    constexpr std::size_t kBlock = 256;
    std::vector<std::size_t> kept;
    std::vector<char> alive(kBlock);
    for (std::size_t start = 0; start < n; start += kBlock) {
        const std::size_t end = std::min(n, start + kBlock);
        const std::size_t frozen = kept.size();
#pragma omp parallel for schedule(dynamic, 8)
        for (std::size_t p = start; p < end; ++p) {
            char ok = 1;
            for (std::size_t k = 0; k < frozen && ok; ++k) ok = d(p, kept[k]).lo >= eps;
            alive[p - start] = ok;
        }
        for (std::size_t p = start; p < end; ++p) {
            if (!alive[p - start]) continue;
            bool ok = true;
            for (std::size_t k = frozen; k < kept.size() && ok; ++k) ok = d(p, kept[k]).lo >= eps;
            if (ok) kept.push_back(p);
        }
    }
    return kept;
}

std::vector<CoverSet> greedy_cover(std::size_t n, const DistanceOracle& d, double eps) {
    const double limit = eps - kStrictTol;
    std::vector<char> covered(n, 0);
    std::vector<double> to_seed(n);
    std::vector<CoverSet> out;
    for (std::size_t v = 0; v < n; ++v) {
        if (covered[v]) continue;
        covered[v] = 1;
        // distances to the seed dominate the work
#pragma omp parallel for schedule(static)
        for (std::size_t j = v + 1; j < n; ++j) to_seed[j] = covered[j] ? 0.0 : d(j, v).hi;
        CoverSet set{{v}, 0};
        for (std::size_t j = v + 1; j < n; ++j) {
            if (covered[j] || to_seed[j] > limit) continue;
            double worst = to_seed[j];
            bool ok = true;
            for (std::size_t k = 1; k < set.members.size(); ++k) {
                const double h = d(j, set.members[k]).hi;
                if (h > limit) {
                    ok = false;
                    break;
                }
                worst = std::max(worst, h);
            }
            if (!ok) continue;
            set.members.push_back(j);
            set.diameter = std::max(set.diameter, worst);
            covered[j] = 1;
        }
        out.push_back(std::move(set));
    }
    return out;
}

namespace {

using Mask = std::uint32_t;

void bron_kerbosch(Mask r, Mask p, Mask x, const std::vector<Mask>& adj, std::vector<Mask>& out) {
    if (p == 0 && x == 0) {
        out.push_back(r);
        return;
    }
    const Mask px = p | x;
    const int pivot = std::countr_zero(px);
    Mask cand = p & ~adj[static_cast<std::size_t>(pivot)];
    while (cand) {
        const int v = std::countr_zero(cand);
        const Mask bit = Mask{1} << v;
        bron_kerbosch(r | bit, p & adj[static_cast<std::size_t>(v)], x & adj[static_cast<std::size_t>(v)], adj, out);
        p &= ~bit;
        x |= bit;
        cand &= ~bit;
    }
}

struct CliqueSearch {
    const std::vector<Mask>& compat;  // includes self
    std::vector<std::vector<Mask>> cliques;  // maximal cliques through each vertex
    std::vector<Mask> path, best_path;
    std::size_t best = 0;
    std::unordered_map<Mask, std::size_t> seen;

    // pairwise incompatible points of unc, each needing its own set
    std::size_t lower_bound(Mask unc) const {
        std::size_t lb = 0;
        while (unc) {
            const int v = std::countr_zero(unc);
            unc &= ~compat[static_cast<std::size_t>(v)];
            ++lb;
        }
        return lb;
    }

    void run(Mask unc) {
        if (unc == 0) {
            if (path.size() < best) {
                best = path.size();
                best_path = path;
            }
            return;
        }
        if (path.size() + lower_bound(unc) >= best) return;
        auto [it, fresh] = seen.emplace(unc, path.size());
        if (!fresh) {
            if (it->second <= path.size()) return;
            it->second = path.size();
        }
        const auto v = static_cast<std::size_t>(std::countr_zero(unc));
        auto order = cliques[v];
        std::stable_sort(order.begin(), order.end(),
                         [unc](Mask a, Mask b) { return std::popcount(a & unc) > std::popcount(b & unc); });
        for (auto c : order) {
            path.push_back(c & unc);
            run(unc & ~c);
            path.pop_back();
        }
    }
};

}  // namespace

std::vector<CoverSet> minimum_cover(std::size_t n, const DistanceOracle& d, double eps, std::size_t limit) {
    if (n > limit || n > 32) throw CapExceeded("exact cover", n, std::min<std::size_t>(limit, 32));
    if (n == 0) return {};
    const double tol_limit = eps - kStrictTol;
    std::vector<Mask> compat(n, 0), adj(n, 0);
    std::vector<double> hi(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        compat[i] |= Mask{1} << i;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double h = d(i, j).hi;
            hi[i * n + j] = hi[j * n + i] = h;
            if (h <= tol_limit) {
                compat[i] |= Mask{1} << j;
                compat[j] |= Mask{1} << i;
            }
        }
        adj[i] = compat[i] & ~(Mask{1} << i);
    }
    CliqueSearch search{compat, {}, {}, {}, n + 1, {}};
    search.cliques.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        const Mask bit = Mask{1} << v;
        bron_kerbosch(bit, adj[v], 0, adj, search.cliques[v]);
    }
    const Mask all = n == 32 ? ~Mask{0} : ((Mask{1} << n) - 1);
    search.run(all);

    std::vector<CoverSet> out;
    for (auto m : search.best_path) {
        CoverSet set;
        for (Mask r = m; r; r &= r - 1) set.members.push_back(static_cast<std::size_t>(std::countr_zero(r)));
        for (std::size_t a = 0; a < set.members.size(); ++a)
            for (std::size_t b = a + 1; b < set.members.size(); ++b)
                set.diameter = std::max(set.diameter, hi[set.members[a] * n + set.members[b]]);
        out.push_back(std::move(set));
    }
    return out;
}

CoverReport covering_number(std::size_t n, const DistanceOracle& d, double eps, CoverMode mode, const Caps& caps) {
    if (n == 0) throw std::invalid_argument("covering_number needs a nonempty cloud");
    if (!(eps > kStrictTol)) throw std::invalid_argument("covering_number needs eps > tolerance");
    const auto t0 = std::chrono::steady_clock::now();
    CoverReport r;
    r.eps = eps;
    r.separated = separated_set(n, d, eps);
    if (mode == CoverMode::exact) {
        r.cover = minimum_cover(n, d, eps, caps.exact_cover);
        r.exact = true;
        r.lower = r.upper = r.cover.size();
    } else {
        r.cover = greedy_cover(n, d, eps);
        r.lower = r.separated.size();
        r.upper = r.cover.size();
    }
    // a set of diameter < eps holds at most one eps-separated point
    if (BigInt(r.separated.size()) > r.upper || r.lower > r.upper)
        throw std::logic_error("cover report violates separated <= cover");
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

CoverReport covering_number(const DynamicalMetric& metric, double eps, CoverMode mode, const Caps& caps) {
    if (metric.cloud().size() > caps.cloud) throw CapExceeded("point cloud", metric.cloud().size(), caps.cloud);
    auto r = covering_number(
        metric.cloud().size(), [&metric](std::size_t i, std::size_t j) { return metric(i, j); }, eps, mode, caps);
    r.window_size = metric.window_size();
    return r;
}

std::vector<CoverReport> covering_sweep(std::size_t n, const DistanceOracle& d, const std::vector<double>& eps,
                                        CoverMode mode, const Caps& caps) {
    std::vector<CoverReport> out(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) out[i] = covering_number(n, d, eps[i], mode, caps);
    return out;
}

// ---- Hausdorff sums ----

namespace {

long double log_cover_sum(const std::vector<CoverSummary>& cover, long double s) {
    std::vector<long double> terms;
    terms.reserve(cover.size());
    for (const auto& c : cover) {
        if (c.multiplicity == 0) continue;
        const long double lm = log_big(c.multiplicity);
        if (c.diameter == 0) {
            if (s == 0) terms.push_back(lm);  // 0^0 = 1
            continue;
        }
        terms.push_back(lm + s * std::log(static_cast<long double>(c.diameter)));
    }
    return log_sum_exp(terms);
}

}  // namespace

long double hausdorff_sum(const std::vector<CoverSummary>& cover, long double s, double eps) {
    if (s < 0) throw std::invalid_argument("hausdorff_sum needs s >= 0");
    for (const auto& c : cover) {
        if (c.diameter < 0 || c.diameter > eps - kStrictTol)
            throw std::invalid_argument("cover set of diameter " + std::to_string(c.diameter) + " is not < eps");
    }
    return std::exp(log_cover_sum(cover, s));
}

std::vector<CoverSummary> summarize(const std::vector<CoverSet>& cover) {
    std::vector<CoverSummary> out;
    out.reserve(cover.size());
    for (const auto& c : cover) out.push_back({c.diameter, 1});
    return out;
}

long double hausdorff_sum(const std::vector<CoverSet>& cover, long double s, double eps) {
    return hausdorff_sum(summarize(cover), s, eps);
}

long double hausdorff_dim_upper(const std::vector<std::vector<CoverSummary>>& covers, HausdorffOptions opt) {
    if (covers.empty()) throw std::invalid_argument("hausdorff_dim_upper needs at least one cover");
    for (const auto& c : covers) {
        if (c.empty()) throw std::invalid_argument("empty cover");
        for (const auto& e : c)
            if (e.diameter > 1) throw std::invalid_argument("cover diameters must not exceed 1");
    }
    auto g = [&covers](long double s) {
        long double best = kInf;
        for (const auto& c : covers) best = std::min(best, log_cover_sum(c, s));
        return best;
    };
    if (g(opt.cap) >= 0) return opt.cap;
    long double lo = 0, hi = opt.cap;
    while (hi - lo > opt.tol) {
        const long double mid = (lo + hi) / 2;
        if (g(mid) >= 0) lo = mid;
        else hi = mid;
    }
    return hi;
}

// ---- mass distribution ----

MassBound mass_distribution_bound(const MassDistributionInput& in, long double eps) {
    if (!(eps > 0 && eps < 1.0L / 6)) throw std::invalid_argument("mass distribution bound needs 0 < eps < 1/6");
    MassBound out;
    if (!in.log_point_mass.empty()) {
        if (in.log_point_mass.size() != in.support) throw std::invalid_argument("point masses do not match support");
        const long double total = log_sum_exp(in.log_point_mass);
        if (std::fabs(total) > 1e-12L) {
            out.reason = "measure does not sum to 1";
            return out;
        }
    }
    const long double diam_limit = std::log(eps / 6 - kStrictTol);
    // each point needs s >= log mu(A) / log diam(A) for some admissible A containing it
    std::vector<long double> need(in.support, kInf);
    for (const auto& A : in.family) {
        if (!(A.log_diameter > -kInf) || A.log_diameter > diam_limit) continue;
        long double log_mass = A.log_mass;
        if (std::isnan(log_mass)) {
            std::vector<long double> parts;
            for (auto p : A.points) parts.push_back(in.log_point_mass.at(p));
            log_mass = log_sum_exp(parts);
        }
        if (!(log_mass > -kInf)) continue;
        const long double s = std::max(0.0L, log_mass / A.log_diameter);
        for (auto p : A.points) {
            if (p >= in.support) throw std::invalid_argument("family set names a point outside the support");
            need[p] = std::min(need[p], s);
        }
    }
    long double s_star = 0;
    for (std::size_t p = 0; p < in.support; ++p) {
        if (std::isinf(need[p])) {
            out.reason = "no admissible set contains support point " + std::to_string(p);
            return out;
        }
        s_star = std::max(s_star, need[p]);
    }
    out.ok = true;
    out.s = s_star;
    out.bound = 2 * s_star;
    return out;
}

}  // namespace meandim
