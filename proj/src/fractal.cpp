#include "meandim/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "meandim/parallel.hpp"

namespace meandim {

using nlohmann::json;

namespace {

constexpr long double kInf = std::numeric_limits<long double>::infinity();
constexpr long double kNaN = std::numeric_limits<long double>::quiet_NaN();

long double parse_ratio(const json& j, const char* what) {
    if (j.is_number()) return j.get<long double>();
    if (j.is_array() && j.size() == 2) {
        const auto den = j[1].get<long double>();
        if (den == 0) throw SpecError(std::string(what) + " has a zero denominator");
        return j[0].get<long double>() / den;
    }
    throw SpecError(std::string(what) + " must be a number or a [num, den] pair");
}

long double slope_of(const BigInt& count, std::size_t sites, double eps) {
    if (count == 0 || sites == 0) return kNaN;
    return log_big(count) / (static_cast<long double>(sites) * std::log(1.0L / eps));
}

json num_or_null(long double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return static_cast<double>(x);
}

void check_eps_grid(const std::vector<double>& eps, double upper) {
    if (eps.empty()) throw std::invalid_argument("eps grid is empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0 && eps[i] < upper))
            throw std::invalid_argument("eps " + std::to_string(eps[i]) + " outside (0, " + std::to_string(upper) + ")");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw std::invalid_argument("eps grid must be strictly decreasing");
    }
}

DistanceOracle lower_only(const DynamicalMetric& m) {
    return [&m](std::size_t i, std::size_t j) {
        const double lo = m(i, j).lo;
        return Interval{lo, lo};
    };
}

double set_diameter(const std::vector<std::size_t>& members, const DistanceOracle& d) {
    double diam = 0;
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) diam = std::max(diam, d(members[a], members[b]).hi);
    return diam;
}

json folner_to_json(const FolnerDescriptor& f) { return {{"family", to_string(f.family)}, {"indices", f.indices}}; }

FolnerDescriptor folner_from_json(const json& j) {
    FolnerDescriptor f;
    f.family = folner_family_from_string(j.value("family", std::string("boxes")));
    f.indices = j.at("indices").get<std::vector<std::int64_t>>();
    if (!f.valid()) throw SpecError("Folner indices must be strictly increasing");
    return f;
}

}  // namespace

// ---- self-similar ----

void SelfSimilarSpec::validate() const {
    if (!(c > 0 && c < 1)) throw SpecError("contraction ratio c must lie in (0,1)");
    if (!(rho > 0 && rho < 1)) throw SpecError("weight decay rho must lie in (0,1)");
    if (omega.rank != 1) throw SpecError("self-similar driving subshift must have rank 1");
    if (omega.alphabet.is_paired()) throw SpecError("self-similar driving subshift needs a plain alphabet");
    if (static_cast<int>(values.size()) != omega.alphabet.k) throw SpecError("one real value per symbol is required");
    for (double v : values) {
        if (!(v >= 0 && v <= 1 - c + 1e-15))
            throw SpecError("symbol values must lie in [0, 1-c] so the attractor sits in [0,1]^Z");
    }
    const long double computed = coordinate_spread() * scheme().total();
    if (d_override != 0 && d_override < computed)
        throw SpecError("diameter bound D is below the computed spread " + std::to_string(static_cast<double>(computed)));
}

long double SelfSimilarSpec::value_spread() const {
    if (values.empty()) return 0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi - *lo;
}

long double SelfSimilarSpec::coordinate_spread() const { return value_spread() / (1 - c); }

long double SelfSimilarSpec::diameter_bound() const {
    return std::max(d_override, coordinate_spread() * scheme().total());
}

SelfSimilarSpec make_selfsimilar(SubshiftSpec omega, long double c, long double rho) {
    SelfSimilarSpec s;
    s.name = omega.name;
    s.c = c;
    s.rho = rho;
    const int k = omega.alphabet.k;
    for (int i = 0; i < k; ++i)
        s.values.push_back(k == 1 ? 0.0 : static_cast<double>(i * (1 - c) / (k - 1)));
    s.omega = std::move(omega);
    s.validate();
    return s;
}

SelfSimilarSpec parse_selfsimilar(const json& doc) {
    try {
        if (!doc.is_object()) throw SpecError("self-similar spec must be a JSON object");
        if (!doc.contains("omega")) throw SpecError("missing 'omega'");
        if (!doc.contains("c")) throw SpecError("missing 'c'");
        const long double c = parse_ratio(doc["c"], "c");
        if (!(c > 0 && c < 1)) throw SpecError("contraction ratio c must lie in (0,1)");
        auto s = make_selfsimilar(parse_subshift(doc["omega"]), c, parse_ratio(doc.value("rho", json(0.25)), "rho"));
        s.name = doc.value("name", s.name);
        if (doc.contains("values")) s.values = doc["values"].get<std::vector<double>>();
        if (doc.contains("D")) s.d_override = parse_ratio(doc["D"], "D");
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw SpecError(std::string("self-similar spec: ") + e.what());
    }
}

json selfsimilar_to_json(const SelfSimilarSpec& s) {
    json doc{{"kind", "selfsimilar"}, {"name", s.name},     {"c", static_cast<double>(s.c)},
             {"rho", static_cast<double>(s.rho)},          {"values", s.values},
             {"omega", subshift_to_json(s.omega)}};
    if (s.d_override != 0) doc["D"] = static_cast<double>(s.d_override);
    return doc;
}

json to_json(const SelfSimilarBound& b) {
    return {{"entropy", num_or_null(b.entropy)},
            {"log_inv_c", num_or_null(b.log_inv_c)},
            {"bound", num_or_null(b.bound)},
            {"provenance", b.provenance}};
}

SelfSimilarBound selfsimilar_upper_bound(const SelfSimilarSpec& spec, const Caps& caps) {
    spec.validate();
    SelfSimilarBound b;
    b.log_inv_c = std::log(1 / spec.c);
    if (spec.omega.forbidden.empty()) {
        b.entropy = spectral_entropy(spec.omega);
        b.provenance = "exact";
    } else {
        const auto series = entropy_series(spec.omega, FolnerFamily::boxes, 16, caps);
        const auto e = entropy_estimate(series);
        b.entropy = e.certified_upper ? *e.certified_upper : e.value;
        b.provenance = e.certified_upper ? "certified-bound" : "estimate";
    }
    b.bound = b.entropy / b.log_inv_c;
    return b;
}

std::int64_t selfsimilar_depth(const SelfSimilarSpec& spec, double eps) {
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    const long double D = spec.diameter_bound();
    std::int64_t m = 1;
    long double cm = spec.c;
    while (!(D * cm < eps / 6.0L)) {
        ++m;
        cm *= spec.c;
    }
    return m;
}

PointCloud selfsimilar_spanning_cloud(const SelfSimilarSpec& spec, std::int64_t m, const PatternSet& net,
                                      std::span<const double> p, const Caps& caps) {
    if (m < 1) throw std::invalid_argument("word length must be positive");
    const auto& W = net.window;
    if (p.size() != W.size()) throw std::invalid_argument("base point does not match the net window");
    PointCloud cloud(W, CoordKind::interval);
    const std::size_t q = net.size();
    if (q == 0) return cloud;
    std::size_t total = 1;
    for (std::int64_t i = 0; i < m; ++i) total = sat_mul(total, q);
    if (total > caps.cloud) throw CapExceeded("spanning cloud", total, caps.cloud);
    const std::size_t n = W.size();
    cloud.data.resize(total * n);
    const long double c = spec.c;
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(total); ++t) {
        std::vector<std::size_t> word(static_cast<std::size_t>(m));
        std::uint64_t r = static_cast<std::uint64_t>(t);
        for (std::int64_t i = m - 1; i >= 0; --i) {
            word[static_cast<std::size_t>(i)] = r % q;
            r /= q;
        }
        for (std::size_t u = 0; u < n; ++u) {
            long double x = p[u];
            for (std::int64_t i = m - 1; i >= 0; --i)
                x = c * x + spec.values[net.pattern(word[static_cast<std::size_t>(i)])[u]];
            cloud.data[static_cast<std::size_t>(t) * n + u] = static_cast<double>(x);
        }
    }
    return cloud;
}

namespace reference {

// words in lexicographic order; the innermost map is applied first
PointCloud selfsimilar_spanning_cloud(const SelfSimilarSpec& spec, std::int64_t m, const PatternSet& net,
                                      std::span<const double> p, const Caps& caps) {
    if (m < 1) throw std::invalid_argument("word length must be positive");
    PointCloud cloud(net.window, CoordKind::interval);
    const std::size_t q = net.size();
    if (q == 0) return cloud;
    std::size_t total = 1;
    for (std::int64_t i = 0; i < m; ++i) total = sat_mul(total, q);
    if (total > caps.cloud) throw CapExceeded("spanning cloud", total, caps.cloud);
    std::vector<std::size_t> word(static_cast<std::size_t>(m), 0);
    std::vector<double> point(net.window.size());
    for (std::size_t t = 0; t < total; ++t) {
        for (std::size_t u = 0; u < point.size(); ++u) {
            long double x = p[u];
            for (auto it = word.rbegin(); it != word.rend(); ++it) x = spec.c * x + spec.values[net.pattern(*it)[u]];
            point[u] = static_cast<double>(x);
        }
        cloud.push(point);
        for (auto it = word.rbegin(); it != word.rend(); ++it) {
            if (++*it < q) break;
            *it = 0;
        }
    }
    return cloud;
}

}  // namespace reference

long double window_weight(const WeightScheme& scheme, const GroupWindow& F) {
    long double best = 0;
    for (const auto& g : F.elements()) {
        long double s = 0;
        for (const auto& u : F.elements()) s += scheme.alpha(u - g);
        best = std::max(best, s);
    }
    return best;
}

json to_json(const SelfSimilarProbeRow& r) {
    return {{"index", r.index},
            {"window_size", r.window_size},
            {"eps", r.eps},
            {"depth", r.depth},
            {"cylinder_depth", r.cylinder_depth},
            {"net_size", r.net_size},
            {"cloud_size", r.cloud_size},
            {"lower", r.cloud_size == 0 ? json(nullptr) : json(to_string(r.lower))},
            {"upper", to_string(r.upper)},
            {"slope_lower", num_or_null(r.slope_lower)},
            {"slope_upper", num_or_null(r.slope_upper)},
            {"provenance", "certified-bound"}};
}

SelfSimilarProbe selfsimilar_cover_probe(const SelfSimilarSpec& spec, const std::vector<double>& eps,
                                         const FolnerDescriptor& windows, const Caps& caps,
                                         std::size_t materialize_limit) {
    spec.validate();
    check_eps_grid(eps, 1.0);
    if (!windows.valid() || windows.indices.empty()) throw std::invalid_argument("invalid window list");
    SelfSimilarProbe out;
    out.bound = selfsimilar_upper_bound(spec, caps);
    const auto scheme = spec.scheme();
    const long double spread = spec.coordinate_spread();
    GroupSpec g1(1);
    for (std::size_t wi = 0; wi < windows.indices.size(); ++wi) {
        const auto F = windows.window(wi, g1, caps.cells);
        const auto net = enumerate_patterns(spec.omega, F, caps);
        const long double wF = window_weight(scheme, F);
        for (double e : eps) {
            SelfSimilarProbeRow row;
            row.index = windows.indices[wi];
            row.window_size = F.size();
            row.eps = e;
            row.net_size = net.size();
            row.depth = selfsimilar_depth(spec, e);
            const long double cm = std::pow(spec.c, static_cast<long double>(row.depth));
            // words agreeing in the first j positions stay within wF spread (c^j - c^m)
            std::int64_t j = 0;
            while (j < row.depth && wF * spread * (std::pow(spec.c, static_cast<long double>(j)) - cm) > e - kStrictTol)
                ++j;
            row.cylinder_depth = j;
            row.upper = pow_big(BigInt(net.size()), static_cast<std::uint64_t>(j));
            std::size_t cloud_size = 1;
            for (std::int64_t i = 0; i < row.depth; ++i) cloud_size = sat_mul(cloud_size, net.size());
            if (net.size() > 0 && cloud_size <= materialize_limit) {
                const std::vector<double> p(F.size(), 0.0);
                const auto cloud = selfsimilar_spanning_cloud(spec, row.depth, net, p, caps);
                const DynamicalMetric metric(cloud, scheme, F);
                const auto rep = covering_number(cloud.size(), lower_only(metric), e, CoverMode::bounds, caps);
                row.cloud_size = cloud.size();
                row.lower = rep.lower;
                if (rep.upper < row.upper) row.upper = rep.upper;
                if (row.lower > row.upper) throw std::logic_error("separated set exceeds the cylinder cover");
            }
            row.slope_upper = net.size() == 0 ? 0 : slope_of(row.upper, F.size(), e);
            row.slope_lower = row.cloud_size == 0 ? kNaN : slope_of(row.lower, F.size(), e);
            out.rows.push_back(std::move(row));
        }
    }
    out.finest_slope = out.rows.back().slope_upper;
    out.within_bound = out.finest_slope <= out.bound.bound + out.slack;
    return out;
}

std::int64_t embedding_depth(long double c, long double D, long double eps) {
    if (!(c > 0 && c < 1) || !(D > 0) || !(eps > 0)) throw std::invalid_argument("embedding depth needs 0<c<1, D>0, eps>0");
    std::int64_t k = 1;
    long double ck = c;
    while (ck * D > eps) {
        ++k;
        ck *= c;
    }
    return k;
}

json to_json(const EmbeddingReport& r) {
    return {{"k", r.k},
            {"ratio", static_cast<double>(r.ratio)},
            {"D", static_cast<double>(r.D)},
            {"address_found", r.address_found},
            {"address", r.address},
            {"lower_ratio_ok", r.lower_ratio_ok},
            {"in_ball", r.in_ball},
            {"max_error", r.max_error},
            {"pairs_checked", r.pairs_checked},
            {"ok", r.ok},
            {"reason", r.reason}};
}

EmbeddingReport contraction_embedding_check(const SelfSimilarSpec& spec, const PatternSet& net,
                                            std::span<const double> q, double eps,
                                            const std::vector<std::vector<double>>& samples, const GroupWindow& F) {
    spec.validate();
    const auto& W = net.window;
    const std::size_t n = W.size();
    if (q.size() != n) throw std::invalid_argument("q does not match the net window");
    EmbeddingReport r;
    r.D = spec.diameter_bound();
    r.k = embedding_depth(spec.c, r.D, eps);
    r.ratio = std::pow(spec.c, static_cast<long double>(r.k));
    r.lower_ratio_ok = r.ratio > spec.c * eps / r.D;

    const long double lo_hull = *std::min_element(spec.values.begin(), spec.values.end()) / (1 - spec.c);
    const long double hi_hull = *std::max_element(spec.values.begin(), spec.values.end()) / (1 - spec.c);
    std::vector<long double> x(q.begin(), q.end());
    for (std::int64_t i = 0; i < r.k; ++i) {
        bool found = false;
        for (std::size_t w = 0; w < net.size() && !found; ++w) {
            std::vector<long double> y(n);
            bool inside = true;
            for (std::size_t u = 0; u < n && inside; ++u) {
                y[u] = (x[u] - spec.values[net.pattern(w)[u]]) / spec.c;
                inside = y[u] >= lo_hull - 1e-9L && y[u] <= hi_hull + 1e-9L;
            }
            if (inside) {
                r.address.push_back(w);
                x = std::move(y);
                found = true;
            }
        }
        if (!found) {
            r.reason = "no net word continues the address of q at step " + std::to_string(i + 1);
            return r;
        }
    }
    r.address_found = true;

    auto phi = [&](const std::vector<double>& p) {
        std::vector<double> out(n);
        for (std::size_t u = 0; u < n; ++u) {
            long double v = p[u];
            for (std::int64_t i = r.k - 1; i >= 0; --i)
                v = spec.c * v + spec.values[net.pattern(r.address[static_cast<std::size_t>(i)])[u]];
            out[u] = static_cast<double>(v);
        }
        return out;
    };
    PointCloud holder(W, CoordKind::interval);
    const DynamicalMetric metric(holder, spec.scheme(), F);
    r.in_ball = true;
    std::vector<std::vector<double>> images;
    for (const auto& s : samples) {
        if (s.size() != n) throw std::invalid_argument("sample does not match the net window");
        images.push_back(phi(s));
        if (metric.between(images.back(), q).lo > eps + 1e-12) r.in_ball = false;
    }
    for (std::size_t a = 0; a < samples.size(); ++a)
        for (std::size_t b = a; b < samples.size(); ++b) {
            const long double before = metric.between(samples[a], samples[b]).lo;
            const long double after = metric.between(images[a], images[b]).lo;
            r.max_error = std::max(r.max_error, static_cast<double>(std::fabs(after - r.ratio * before)));
            ++r.pairs_checked;
        }
    r.ok = r.lower_ratio_ok && r.in_ball && r.max_error <= 1e-12;
    if (!r.ok) r.reason = !r.in_ball ? "image leaves the eps-ball" : !r.lower_ratio_ok ? "c^k <= c eps / D" : "ratio mismatch";
    return r;
}

// ---- homogeneous ----

void HomogeneousSpec::validate() const {
    if (b < 2) throw SpecError("base b must be >= 2");
    if (digits.rank < 2) throw SpecError("digit subshift lives on Z^d x N and needs rank >= 2");
    if (digits.alphabet.is_paired() || digits.alphabet.k != b) throw SpecError("digits must be the plain alphabet {0..b-1}");
    if (!(rho > 0 && rho < 1)) throw SpecError("weight decay rho must lie in (0,1)");
}

HomogeneousSpec make_homogeneous(int b, SubshiftSpec digits, long double rho) {
    HomogeneousSpec s;
    s.name = digits.name;
    s.b = b;
    s.digits = std::move(digits);
    s.rho = rho;
    s.validate();
    return s;
}

HomogeneousSpec parse_homogeneous(const json& doc) {
    try {
        if (!doc.is_object()) throw SpecError("homogeneous spec must be a JSON object");
        if (!doc.contains("digits")) throw SpecError("missing 'digits'");
        auto s = make_homogeneous(doc.value("b", 2), parse_subshift(doc["digits"]),
                                  parse_ratio(doc.value("rho", json(0.25)), "rho"));
        s.name = doc.value("name", s.name);
        return s;
    } catch (const json::exception& e) {
        throw SpecError(std::string("homogeneous spec: ") + e.what());
    }
}

json homogeneous_to_json(const HomogeneousSpec& s) {
    return {{"kind", "homogeneous"},
            {"name", s.name},
            {"b", s.b},
            {"rho", static_cast<double>(s.rho)},
            {"digits", subshift_to_json(s.digits)}};
}

SubshiftSpec full_digits(int b, int rank) {
    auto s = full_shift(Alphabet::plain(b), rank + 1);
    s.name = "full_digits";
    return s;
}

SubshiftSpec vertical_golden_digits(int rank) {
    auto s = full_shift(Alphabet::plain(2), rank + 1);
    add_forbidden_pairs(s, rank, {{1, 1}});
    s.rule_class = RuleClass::nearest_neighbor;
    s.name = "vertical_golden";
    return s;
}

json to_json(const HomogeneousEntropy& h) {
    return {{"entropy", num_or_null(h.entropy)},
            {"prediction", num_or_null(h.prediction)},
            {"provenance", h.provenance},
            {"semantics", h.series.semantics}};
}

HomogeneousEntropy homogeneous_gxn_entropy(const HomogeneousSpec& spec, std::int64_t n_max, std::int64_t N_max,
                                           const Caps& caps) {
    spec.validate();
    if (n_max < 1 || N_max < 1) throw std::invalid_argument("n_max and N_max must be positive");
    HomogeneousEntropy h;
    h.series = gxn_entropy_series(spec.digits, FolnerDescriptor::range(FolnerFamily::boxes, 1, n_max), N_max, caps);
    if (h.series.empty_system) {
        h.entropy = -kInf;
        h.prediction = -kInf;
        h.provenance = "exact";
        return h;
    }
    const auto& rows = h.series.rows;
    const auto& last = rows.back();
    if (N_max >= 2) {
        const auto& prev = rows[rows.size() - 2];
        h.entropy = (last.log_count - prev.log_count) / static_cast<long double>(last.window_size / static_cast<std::size_t>(N_max));
        h.provenance = "estimate";
    } else {
        h.entropy = last.per_site;
        h.provenance = "estimate";
    }
    h.prediction = h.entropy / std::log(static_cast<long double>(spec.b));
    return h;
}

std::int64_t homogeneous_depth(int b, double eps) {
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("eps must lie in (0,1)");
    std::int64_t N = 1;
    double p = 1.0 / b;
    while (p > eps) {
        ++N;
        p /= b;
    }
    return N;
}

json to_json(const HomogeneousProbeRow& r) {
    return {{"index", r.index},
            {"window_size", r.window_size},
            {"cloud_cells", r.cloud_cells},
            {"eps", r.eps},
            {"N", r.N},
            {"scale", r.scale},
            {"cloud_size", r.cloud_size},
            {"left_lower", to_string(r.left_lower)},
            {"left_upper", to_string(r.left_upper)},
            {"right_lower", to_string(r.right_lower)},
            {"right_upper", to_string(r.right_upper)},
            {"max_left_diameter", r.max_left_diameter},
            {"transfer_ok", r.transfer_ok},
            {"inequality_ok", r.inequality_ok},
            {"slope", num_or_null(r.slope)},
            {"provenance", "certified-bound"}};
}

HomogeneousProbe homogeneous_covering_probe(const HomogeneousSpec& spec, const std::vector<double>& eps,
                                            const FolnerDescriptor& windows, std::int64_t s_radius, const Caps& caps) {
    spec.validate();
    check_eps_grid(eps, 1.0);
    if (!windows.valid() || windows.indices.empty()) throw std::invalid_argument("invalid window list");
    if (s_radius < 0) throw std::invalid_argument("S radius must be >= 0");
    HomogeneousProbe out;
    const int d = spec.rank();
    const GroupSpec gs(d);
    const auto scheme = spec.scheme();
    const double scale = static_cast<double>(1.0L / (2 * scheme.total() * spec.b));
    const auto S = GroupWindow::ball(s_radius, gs, caps.cells);
    for (std::size_t wi = 0; wi < windows.indices.size(); ++wi) {
        const auto F = windows.window(wi, gs, caps.cells);
        const auto W = S.sum(F, caps.cells);
        const std::size_t nw = W.size();
        for (double e : eps) {
            HomogeneousProbeRow row;
            row.index = windows.indices[wi];
            row.window_size = F.size();
            row.cloud_cells = nw;
            row.eps = e;
            row.N = homogeneous_depth(spec.b, e);
            row.scale = scale;
            const auto N = static_cast<std::size_t>(row.N);
            const ProductWindow pw(W, row.N);
            const auto lattice = pw.lattice_window(caps.cells);
            const auto patterns = enumerate_patterns(spec.digits, lattice, caps);
            const std::size_t np = patterns.size();
            if (np == 0) throw std::invalid_argument("digit subshift has no legal pattern on the probe window");
            if (np > caps.cloud) throw CapExceeded("digit cloud", np, caps.cloud);
            std::vector<std::size_t> where(pw.size());
            for (std::size_t cell = 0; cell < pw.size(); ++cell) where[cell] = *lattice.index_of(pw.lattice_point(cell));
            // shifted[p][n][u] = T_b^n x_u, truncated at depth N
            std::vector<double> shifted(np * N * nw);
            for (std::size_t p = 0; p < np; ++p) {
                const auto pat = patterns.pattern(p);
                for (std::size_t u = 0; u < nw; ++u) {
                    long double acc = 0;
                    for (std::size_t n = N; n-- > 0;) {
                        acc = (acc + pat[where[u * N + n]]) / spec.b;
                        shifted[(p * N + n) * nw + u] = static_cast<double>(acc);
                    }
                }
            }
            PointCloud cloud(W, CoordKind::torus);
            cloud.data.resize(np * nw);
            for (std::size_t p = 0; p < np; ++p)
                std::copy_n(&shifted[p * N * nw], nw, &cloud.data[p * nw]);
            row.cloud_size = np;
            const DynamicalMetric left_metric(cloud, scheme, F);
            const auto left = lower_only(left_metric);
            std::vector<double> alpha(nw * nw);
            for (std::size_t s = 0; s < nw; ++s)
                for (std::size_t u = 0; u < nw; ++u) alpha[s * nw + u] = static_cast<double>(scheme.alpha(W[u] - W[s]));
            DistanceOracle right = [&](std::size_t i, std::size_t j) {
                double best = 0;
                for (std::size_t n = 0; n < N; ++n) {
                    const double* x = &shifted[(i * N + n) * nw];
                    const double* y = &shifted[(j * N + n) * nw];
                    for (std::size_t s = 0; s < nw; ++s) {
                        double acc = 0;
                        for (std::size_t u = 0; u < nw; ++u)
                            acc += alpha[s * nw + u] * coordinate_distance(CoordKind::torus, x + u, y + u);
                        best = std::max(best, acc);
                    }
                }
                return Interval{best, best};
            };
            const auto lrep = covering_number(np, left, e, CoverMode::bounds, caps);
            const auto rrep = covering_number(np, right, scale, CoverMode::bounds, caps);
            row.left_lower = lrep.lower;
            row.left_upper = lrep.upper;
            row.right_lower = rrep.lower;
            row.right_upper = rrep.upper;
            for (const auto& set : rrep.cover) row.max_left_diameter = std::max(row.max_left_diameter, set_diameter(set.members, left));
            row.transfer_ok = row.max_left_diameter <= e;
            row.inequality_ok = row.transfer_ok && row.left_lower <= row.right_upper;
            row.slope = slope_of(row.left_upper, F.size(), e);
            if (!row.inequality_ok && out.all_ok) {
                out.all_ok = false;
                out.witness = "window " + std::to_string(row.index) + ", eps " + std::to_string(e) +
                              ": left diameter " + std::to_string(row.max_left_diameter) + " of a right-cover set, left lower " +
                              to_string(row.left_lower) + " vs right upper " + to_string(row.right_upper);
            }
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

// ---- K^G and the cube ----

void KSpaceSpec::validate() const {
    if (rank < 1) throw SpecError("rank must be >= 1");
    if (!(rho > 0 && rho < 1)) throw SpecError("weight decay rho must lie in (0,1)");
    if (!windows.valid() || windows.indices.empty()) throw SpecError("Folner indices must be strictly increasing");
    try {
        check_eps_grid(eps, coordinate == KCoordinate::kspace ? 0.25 : 1.0);
    } catch (const std::invalid_argument& e) {
        throw SpecError(e.what());
    }
}

KSpaceSpec parse_kspace(const json& doc) {
    try {
        if (!doc.is_object()) throw SpecError("kspace spec must be a JSON object");
        KSpaceSpec s;
        s.name = doc.value("name", std::string("kspace"));
        s.rank = doc.value("rank", 1);
        s.rho = parse_ratio(doc.value("rho", json(0.25)), "rho");
        const auto coord = doc.value("coordinate", std::string("kspace"));
        if (coord == "kspace") s.coordinate = KCoordinate::kspace;
        else if (coord == "cube") s.coordinate = KCoordinate::cube;
        else throw SpecError("coordinate must be kspace|cube");
        if (doc.contains("folner")) s.windows = folner_from_json(doc["folner"]);
        if (doc.contains("eps")) s.eps = doc["eps"].get<std::vector<double>>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw SpecError(std::string("kspace spec: ") + e.what());
    }
}

json kspace_to_json(const KSpaceSpec& s) {
    return {{"kind", "kspace"},
            {"name", s.name},
            {"rank", s.rank},
            {"rho", static_cast<double>(s.rho)},
            {"coordinate", s.coordinate == KCoordinate::kspace ? "kspace" : "cube"},
            {"folner", folner_to_json(s.windows)},
            {"eps", s.eps}};
}

std::int64_t k_cover_count(double delta) {
    if (!(delta > 0)) throw std::invalid_argument("k_cover_count needs delta > 0");
    std::int64_t count = 1;
    double right = delta;  // [0, delta] holds 0 and every 1/n <= delta
    while (right < 1) {
        // smallest point of K beyond right is 1/n for the largest n with 1/n > right
        auto n = static_cast<std::int64_t>(std::floor(1 / right));
        while (n >= 1 && 1.0 / static_cast<double>(n) <= right) --n;
        while (1.0 / static_cast<double>(n + 1) > right) ++n;
        if (n < 1) break;
        ++count;
        right = 1.0 / static_cast<double>(n) + delta;
    }
    return count;
}

std::int64_t k_separated_count(double eps) {
    if (!(eps > 0)) throw std::invalid_argument("k_separated_count needs eps > 0");
    std::int64_t count = 1;
    double last = 0;
    for (;;) {
        const double t = last + eps;
        if (t > 1) break;
        // the smallest point >= t is 1/n for the largest n with 1/n >= t
        auto n = static_cast<std::int64_t>(std::floor(1 / t));
        while (n >= 1 && 1.0 / static_cast<double>(n) < t) --n;
        while (1.0 / static_cast<double>(n + 1) >= t) ++n;
        if (n < 1) break;
        ++count;
        last = 1.0 / static_cast<double>(n);
    }
    return count;
}

std::int64_t grid_cover_count(std::int64_t M, double delta) {
    if (M < 1 || !(delta >= 0)) throw std::invalid_argument("grid cover needs M >= 1 and delta >= 0");
    std::int64_t t = static_cast<std::int64_t>(std::floor(delta * static_cast<double>(M)));
    while (t > 0 && static_cast<double>(t) / static_cast<double>(M) > delta) --t;
    while (static_cast<double>(t + 1) / static_cast<double>(M) <= delta) ++t;
    const std::int64_t per = t + 1;
    return (M + per - 1) / per;
}

std::int64_t grid_separated_count(std::int64_t M, double eps) {
    if (M < 1 || !(eps > 0)) throw std::invalid_argument("grid separation needs M >= 1 and eps > 0");
    std::int64_t t = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(eps * static_cast<double>(M))));
    while (t > 1 && static_cast<double>(t - 1) / static_cast<double>(M) >= eps) --t;
    while (static_cast<double>(t) / static_cast<double>(M) < eps) ++t;
    return (M - 1) / t + 1;
}

std::int64_t kg_gamma(double eps) {
    if (!(eps > 0 && eps < 0.25)) throw std::invalid_argument("gamma needs 0 < eps < 1/4");
    const long double x = 2 * std::sqrt(static_cast<long double>(eps));
    auto g = static_cast<std::int64_t>(std::ceil(1 / x)) - 1;
    while (g > 1 && !(x < 1.0L / g)) --g;
    while (1.0L / (g + 1) > x) ++g;
    while (!(x < 1.0L / g)) --g;
    return g;
}

std::int64_t kg_zeta(double eps, long double c) {
    if (!(eps > 0) || !(c > 0)) throw std::invalid_argument("zeta needs eps > 0 and c > 0");
    const long double t = 4 * c / eps;
    auto z = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::sqrt(t)) - 2);
    while (static_cast<long double>(z) * (z + 1) < t) ++z;
    while (z > 1 && static_cast<long double>(z - 1) * z >= t) --z;
    return z;
}

json to_json(const KgRow& r) {
    return {{"index", r.index},
            {"window_size", r.window_size},
            {"sf_size", r.sf_size},
            {"eps", r.eps},
            {"grid", r.grid},
            {"gamma", r.gamma},
            {"zeta", r.zeta},
            {"lower", to_string(r.lower)},
            {"upper_sub", to_string(r.upper_sub)},
            {"upper_full", to_string(r.upper_full)},
            {"lower_formula", to_string(r.lower_formula)},
            {"upper_formula", to_string(r.upper_formula)},
            {"slope_lower", num_or_null(r.slope_lower)},
            {"slope_upper", num_or_null(r.slope_upper)},
            {"chain_ok", r.chain_ok},
            {"provenance", "exact"}};
}

KgExperiment kg_covering_experiment(const KSpaceSpec& spec, const Caps& caps) {
    spec.validate();
    KgExperiment out;
    out.coordinate = spec.coordinate;
    const auto scheme = spec.scheme();
    const long double c = scheme.total();
    const GroupSpec gs(spec.rank);
    const bool cube = spec.coordinate == KCoordinate::cube;
    for (std::size_t wi = 0; wi < spec.windows.indices.size(); ++wi) {
        const auto F = spec.windows.window(wi, gs, caps.cells);
        const long double wF = window_weight(scheme, F);
        for (double e : spec.eps) {
            KgRow row;
            row.index = spec.windows.indices[wi];
            row.window_size = F.size();
            row.eps = e;
            const std::int64_t r = scheme.tail_radius(e);
            const auto S = GroupWindow::ball(r, gs, caps.cells);
            const auto SF = S.sum(F, caps.cells);
            row.sf_size = SF.size();
            long double R = 0;
            for (const auto& g : F.elements()) {
                long double s = 0;
                for (const auto& u : SF.elements()) s += scheme.alpha(u - g);
                R = std::max(R, s);
            }
            const long double tail = scheme.tail(r);
            const double delta_sub = static_cast<double>((e - kStrictTol) / wF);
            const double delta_full = static_cast<double>((e - tail - kStrictTol) / R);
            const auto nF = static_cast<std::uint64_t>(F.size());
            const auto nSF = static_cast<std::uint64_t>(SF.size());
            if (cube) {
                row.grid = std::llround(1.0 / e);
                row.lower = pow_big(BigInt(grid_separated_count(row.grid, e)), nF);
                row.upper_sub = pow_big(BigInt(grid_cover_count(row.grid, delta_sub)), nF);
                row.upper_full = pow_big(BigInt(static_cast<std::int64_t>(std::ceil(1.0 / delta_full))), nSF);
                row.lower_formula = 1;
                row.upper_formula = pow_big(BigInt(1 + static_cast<std::int64_t>(std::floor(6 * c / e))), nSF);
            } else {
                row.gamma = kg_gamma(e);
                row.zeta = kg_zeta(e, c);
                row.lower = pow_big(BigInt(k_separated_count(e)), nF);
                row.upper_sub = pow_big(BigInt(k_cover_count(delta_sub)), nF);
                row.upper_full = pow_big(BigInt(k_cover_count(delta_full)), nSF);
                row.lower_formula = pow_big(BigInt(row.gamma + 1), nF);
                row.upper_formula = pow_big(BigInt(2 * row.zeta), nSF);
            }
            row.slope_lower = slope_of(row.lower, F.size(), e);
            row.slope_upper = slope_of(row.upper_sub, F.size(), e);
            row.chain_ok = row.lower_formula <= row.lower && row.lower <= row.upper_sub &&
                           row.upper_sub <= row.upper_full && row.upper_full <= row.upper_formula;
            if (!row.chain_ok && out.all_ok) {
                out.all_ok = false;
                out.witness = "window " + std::to_string(row.index) + ", eps " + std::to_string(e) + ": " +
                              to_string(row.lower_formula) + " <= " + to_string(row.lower) + " <= " +
                              to_string(row.upper_sub) + " <= " + to_string(row.upper_full) + " <= " +
                              to_string(row.upper_formula) + " fails";
            }
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

long double nu_a() { return 3.0L / (std::numbers::pi_v<long double> * std::numbers::pi_v<long double>); }

NuNormalization nu_normalization(std::size_t terms) {
    if (terms < 1) throw std::invalid_argument("nu normalization needs at least one term");
    NuNormalization r;
    r.terms = terms;
    long double s = 0;
    for (std::size_t n = terms; n >= 1; --n) s += 1.0L / (static_cast<long double>(n) * static_cast<long double>(n));
    const long double a = nu_a();
    r.partial = 0.5L + a * s;
    // integral comparison: 1/(N+1) <= sum_{n > N} 1/n^2 <= 1/N
    r.tail_lo = a / static_cast<long double>(terms + 1);
    r.tail_hi = a / static_cast<long double>(terms);
    r.ok = std::fabs(r.partial + r.tail_lo - 1) <= 1e-9L && std::fabs(r.partial + r.tail_hi - 1) <= 1e-9L;
    return r;
}

long double kg_log_box_mass_lower(const KPoint& x, long double log_r) {
    static const long double log_half = std::log(0.5L);
    // 0 lies in [x - r, x] exactly when x <= r
    if (x.zero || -x.log_n <= log_r) return log_half;
    return std::log(nu_a()) - 2 * x.log_n;
}

json to_json(const MassDemoReport& r) {
    return {{"k", r.k},
            {"eps", r.eps},
            {"c", static_cast<double>(r.c)},
            {"log_delta", static_cast<double>(r.log_delta)},
            {"window_size", r.window_size},
            {"sf_size", r.sf_size},
            {"samples", r.samples},
            {"hypothesis_ok", r.hypothesis_ok},
            {"witness", r.witness},
            {"s_star", static_cast<double>(r.s_star)},
            {"measured_bound", static_cast<double>(r.measured_bound)},
            {"bound", static_cast<double>(r.bound)},
            {"per_site", static_cast<double>(r.per_site)},
            {"log_tail", num_or_null(r.log_tail)},
            {"tail_condition", r.tail_condition},
            {"provenance", "certified-bound"}};
}

MassDemoReport kg_mass_distribution_demo(const KSpaceSpec& spec, int k, const GroupWindow& F, double eps,
                                         std::size_t samples, std::uint64_t seed, std::int64_t s_radius) {
    if (k < 1) throw std::invalid_argument("sharpness k must be >= 1");
    if (!(eps > 0 && eps < 1.0 / 6)) throw std::invalid_argument("mass demo needs 0 < eps < 1/6");
    if (F.empty() || F.rank() != spec.rank) throw std::invalid_argument("window rank does not match the system rank");
    const auto scheme = spec.scheme();
    const GroupSpec gs(spec.rank);
    const auto S = GroupWindow::ball(s_radius, gs);
    const auto SF = S.sum(F);
    const std::size_t n = SF.size();
    const long double a = nu_a();
    const long double c = scheme.total();
    const auto K = static_cast<long double>(k);

    MassDemoReport rep;
    rep.k = k;
    rep.eps = eps;
    rep.c = c;
    rep.window_size = F.size();
    rep.sf_size = n;
    // strict constraint: halve the minimum; eps/(12c) keeps (1+c) r below eps/6
    const long double delta = 0.5L * std::min({static_cast<long double>(eps) / (12 * c), std::pow(a, K) / std::pow(1 + c, 3.0L),
                                                std::pow(0.5L, K / 3 + 1) / (1 + c)});
    rep.log_delta = std::log(delta);
    const long double neg = -rep.log_delta;  // > 0
    const long double kk = std::pow(K, K);
    // class m of log n: 0 below neg, m in 1..k for [k^{m-1} neg, k^m neg), k+1 beyond or zero
    auto class_of = [&](const KPoint& x) -> int {
        if (x.zero) return k + 1;
        if (x.log_n < neg) return 0;
        for (int m = 1; m <= k; ++m)
            if (x.log_n < std::pow(K, static_cast<long double>(m)) * neg) return m;
        return k + 1;
    };

    std::vector<std::vector<KPoint>> pts;
    pts.push_back(std::vector<KPoint>(n));                 // all zero
    pts.push_back(std::vector<KPoint>(n, KPoint{false, 0}));  // all ones
    for (int m = 0; m <= k + 1; ++m) {
        std::vector<KPoint> p(n);
        for (auto& x : p) {
            x.zero = false;
            x.log_n = m == 0 ? 0 : m == k + 1 ? kk * neg * 1.5L : std::pow(K, static_cast<long double>(m - 1)) * neg;
        }
        pts.push_back(std::move(p));
    }
    std::mt19937_64 rng(stream_seed(seed, 0));
    for (std::size_t s = 0; s < samples; ++s) {
        std::vector<KPoint> p(n);
        for (auto& x : p) {
            const int m = static_cast<int>(uniform01(rng) * (k + 2));
            const double u = uniform01(rng);
            x.zero = false;
            if (m == 0) {
                long double v = std::max(1.0L, std::floor(std::exp(static_cast<long double>(u) * neg)));
                while (v > 1 && !(1.0L / v > delta)) v -= 1;
                x.log_n = std::log(v);
            } else if (m <= k) {
                const long double lo = std::pow(K, static_cast<long double>(m - 1)) * neg;
                const long double hi = std::pow(K, static_cast<long double>(m)) * neg;
                x.log_n = lo + static_cast<long double>(u) * (hi - lo);
            } else if (u < 0.5) {
                x.zero = true;
            } else {
                x.log_n = kk * neg * (1 + static_cast<long double>(u));
            }
        }
        pts.push_back(std::move(p));
    }
    rep.samples = pts.size();

    MassDistributionInput in;
    in.support = pts.size();
    const long double target = 6.0L / K * static_cast<long double>(n);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k + 2), 0);
        for (const auto& x : p) ++sizes[static_cast<std::size_t>(class_of(x))];
        int k0 = -1;
        for (int m = 0; m <= k; ++m) {
            if (sizes[static_cast<std::size_t>(m)] * static_cast<std::size_t>(k + 1) <= n) {
                k0 = m;
                break;
            }
        }
        auto describe = [&] {
            std::string s = "point " + std::to_string(i) + " class sizes [";
            for (std::size_t m = 0; m < sizes.size(); ++m) s += (m ? "," : "") + std::to_string(sizes[m]);
            return s + "], k0 = " + std::to_string(k0);
        };
        if (k0 < 0) {
            rep.hypothesis_ok = false;
            if (rep.witness.empty()) rep.witness = describe() + ": no sparse class";
            continue;
        }
        const long double log_r = std::pow(K, static_cast<long double>(k0)) * rep.log_delta;
        const long double log_D = std::log(1 + c) + log_r;
        long double log_mass = 0;
        long double sparse = 0;
        bool coords_ok = true;
        for (const auto& x : p) {
            const long double lm = kg_log_box_mass_lower(x, log_r);
            log_mass += lm;
            if (class_of(x) == k0) sparse += lm;
            else if (lm < 3.0L / K * log_D) coords_ok = false;
        }
        const bool sparse_ok = sparse >= 3.0L / K * static_cast<long double>(n) * log_D;
        const bool total_ok = log_mass >= target * log_D;
        const bool diam_ok = log_D < std::log(static_cast<long double>(eps) / 6);
        if (!(coords_ok && sparse_ok && total_ok && diam_ok)) {
            rep.hypothesis_ok = false;
            if (rep.witness.empty()) rep.witness = describe();
        }
        in.family.push_back(MassSet{{i}, log_mass, log_D});
    }
    const auto mb = mass_distribution_bound(in, eps);
    if (!mb.ok) {
        rep.hypothesis_ok = false;
        if (rep.witness.empty()) rep.witness = mb.reason;
    }
    rep.s_star = mb.s;
    rep.measured_bound = mb.bound;
    rep.bound = 12.0L / K * static_cast<long double>(n);
    rep.per_site = rep.bound / static_cast<long double>(F.size());
    if (mb.ok && mb.s > target * (1 + 1e-12L)) {
        rep.hypothesis_ok = false;
        if (rep.witness.empty()) rep.witness = "s* exceeds (6/k)|SF|";
    }
    rep.log_tail = spec.rank == 1
                       ? std::log(2.0L) + static_cast<long double>(s_radius + 1) * std::log(spec.rho) - std::log(1 - spec.rho)
                       : std::log(scheme.tail(s_radius));
    rep.tail_condition = rep.log_tail < kk * rep.log_delta;
    return rep;
}

}  // namespace meandim
