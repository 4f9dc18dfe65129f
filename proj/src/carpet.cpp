#include "meandim/carpet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "meandim/parallel.hpp"

namespace meandim {

using nlohmann::json;

namespace {

constexpr long double kInf = std::numeric_limits<long double>::infinity();

std::optional<std::size_t> find_pattern(const PatternSet& ps, const std::vector<Symbol>& key) {
    const std::size_t n = ps.window.size();
    std::size_t lo = 0, hi = ps.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        auto p = ps.pattern(mid);
        if (std::lexicographical_compare(p.begin(), p.end(), key.begin(), key.begin() + static_cast<long>(n))) lo = mid + 1;
        else hi = mid;
    }
    if (lo < ps.size()) {
        auto p = ps.pattern(lo);
        if (std::equal(p.begin(), p.end(), key.begin())) return lo;
    }
    return std::nullopt;
}

std::int64_t ipow(std::int64_t base, std::int64_t e) {
    std::int64_t r = 1;
    for (std::int64_t i = 0; i < e; ++i) {
        if (r > std::numeric_limits<std::int64_t>::max() / base) throw std::overflow_error("carpet depth too large");
        r *= base;
    }
    return r;
}

long double log_sum_exp(const std::vector<long double>& xs) {
    long double m = -kInf;
    for (auto x : xs) m = std::max(m, x);
    if (std::isinf(m)) return m;
    long double acc = 0;
    for (auto x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

// digits n = 0..l-1 of ordinal, most significant first
void decode(std::uint64_t ordinal, std::int64_t l, std::int64_t k, std::size_t full_radix, std::size_t prime_radix,
            std::vector<std::size_t>& digits) {
    digits.resize(static_cast<std::size_t>(l));
    for (std::int64_t n = l - 1; n >= 0; --n) {
        const std::size_t r = n < k ? full_radix : prime_radix;
        digits[static_cast<std::size_t>(n)] = static_cast<std::size_t>(ordinal % r);
        ordinal /= r;
    }
}

}  // namespace

long double CarpetSpec::w() const { return std::log(static_cast<long double>(b)) / std::log(static_cast<long double>(a)); }

void CarpetSpec::validate() const {
    if (!(b >= 2 && a >= b)) throw SpecError("carpet needs a >= b >= 2 (got a=" + std::to_string(a) + ", b=" +
                                             std::to_string(b) + ")");
    if (!omega.alphabet.is_paired() || omega.alphabet.a != a || omega.alphabet.b != b)
        throw SpecError("carpet subshift must use the paired alphabet A x B with |A|=a, |B|=b");
}

CarpetSpec make_carpet(int a, int b, SubshiftSpec omega) {
    CarpetSpec c;
    c.name = omega.name;
    c.a = a;
    c.b = b;
    c.omega = std::move(omega);
    c.validate();
    return c;
}

CarpetSpec parse_carpet(const json& doc) {
    try {
        CarpetSpec c;
        c.name = doc.value("name", std::string("carpet"));
        c.a = doc.at("a").get<int>();
        c.b = doc.at("b").get<int>();
        if (!(c.b >= 2 && c.a >= c.b)) c.validate();
        json omega = doc.at("omega");
        if (!omega.contains("alphabet")) omega["alphabet"] = {{"a", c.a}, {"b", c.b}};
        c.omega = parse_subshift(omega);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw SpecError(std::string("carpet spec: ") + e.what());
    }
}

json carpet_to_json(const CarpetSpec& spec) {
    return {{"kind", "carpet"}, {"name", spec.name}, {"a", spec.a}, {"b", spec.b}, {"omega", subshift_to_json(spec.omega)}};
}

std::int64_t floor_wl(int a, int b, std::int64_t l) {
    if (l < 0) throw std::invalid_argument("depth must be nonnegative");
    const BigInt bl = pow_big(BigInt(b), static_cast<unsigned>(l));
    std::int64_t k = 0;
    BigInt ak = a;
    while (ak <= bl) {
        ++k;
        ak *= a;
    }
    return k;
}

long double mdim_M_carpet(long double h, long double h_prime, int a, int b) {
    const long double la = std::log(static_cast<long double>(a));
    const long double lb = std::log(static_cast<long double>(b));
    return h / la + (1 / lb - 1 / la) * h_prime;
}

long double mdim_H_carpet(long double hw, int b) { return hw / std::log(static_cast<long double>(b)); }

// ---- restricted window ----

CarpetWindow::CarpetWindow(const CarpetSpec& spec, std::int64_t m, const Caps& caps) : spec_(&spec), m_(m) {
    spec.validate();
    const auto w = GroupWindow::ball(m, GroupSpec(spec.omega.rank), caps.cells);
    omega_ = enumerate_patterns(spec.omega, w, caps);
    prime_ = project(omega_);
    const std::size_t n = w.size();
    const auto& al = spec.omega.alphabet;
    proj_.resize(omega_.size());
    section_.assign(prime_.size(), omega_.size());
    fiber_.assign(prime_.size(), 0);
    spread_.assign(prime_.size() * n, 0);
    std::vector<int> lo(prime_.size() * n, al.a), hi(prime_.size() * n, -1);
    a_spread_.assign(n, 0);
    b_spread_.assign(n, 0);
    std::vector<int> alo(n, al.a), ahi(n, -1), blo(n, al.b), bhi(n, -1);
    std::vector<Symbol> key(n);
    for (std::size_t p = 0; p < omega_.size(); ++p) {
        auto pat = omega_.pattern(p);
        for (std::size_t c = 0; c < n; ++c) key[c] = static_cast<Symbol>(al.b_part(pat[c]));
        const auto q = *find_pattern(prime_, key);
        proj_[p] = q;
        if (section_[q] == omega_.size()) section_[q] = p;  // patterns are sorted
        ++fiber_[q];
        for (std::size_t c = 0; c < n; ++c) {
            const int u = al.a_part(pat[c]);
            const int vv = al.b_part(pat[c]);
            lo[q * n + c] = std::min(lo[q * n + c], u);
            hi[q * n + c] = std::max(hi[q * n + c], u);
            alo[c] = std::min(alo[c], u);
            ahi[c] = std::max(ahi[c], u);
            blo[c] = std::min(blo[c], vv);
            bhi[c] = std::max(bhi[c], vv);
        }
    }
    for (std::size_t i = 0; i < spread_.size(); ++i) spread_[i] = hi[i] - lo[i];
    if (!omega_.data.empty()) {
        for (std::size_t c = 0; c < n; ++c) {
            a_spread_[c] = ahi[c] - alo[c];
            b_spread_[c] = bhi[c] - blo[c];
        }
    }
}

// ---- representatives and the sandwich ----

BigInt representative_count(const CarpetWindow& cw, std::int64_t l) {
    const auto k = floor_wl(cw.spec().a, cw.spec().b, l);
    return pow_big(BigInt(cw.omega_count()), static_cast<unsigned>(k)) *
           pow_big(BigInt(cw.prime_count()), static_cast<unsigned>(l - k));
}

Representatives carpet_representatives(const CarpetWindow& cw, std::int64_t l, const Caps& caps) {
    const int a = cw.spec().a, b = cw.spec().b;
    Representatives r;
    r.l = l;
    r.k = floor_wl(a, b, l);
    r.cells = cw.cells();
    r.x_den = ipow(a, l + 1) / a * (a - 1);
    r.y_den = ipow(b, l + 1) / b * (b - 1);
    ipow(a, l + 2);  // headroom for differences and products in the checks
    const BigInt count = representative_count(cw, l);
    if (count > BigInt(caps.cloud))
        throw CapExceeded("carpet representatives", count > BigInt(std::numeric_limits<std::size_t>::max())
                                                        ? std::numeric_limits<std::size_t>::max()
                                                        : count.convert_to<std::size_t>(),
                          caps.cloud);
    const auto npts = count.convert_to<std::size_t>();
    const std::size_t nc = r.cells;
    r.x.assign(npts * nc, 0);
    r.y.assign(npts * nc, 0);
    if (npts == 0) return r;
    const std::size_t tail = cw.tail();
#pragma omp parallel
    {
        std::vector<std::size_t> digits;
#pragma omp for schedule(static)
        for (std::size_t i = 0; i < npts; ++i) {
            decode(i, l, r.k, cw.omega_count(), cw.prime_count(), digits);
            for (std::size_t c = 0; c < nc; ++c) {
                std::int64_t xs = 0, ys = 0;
                for (std::int64_t n = 0; n < l; ++n) {
                    const std::size_t d = digits[static_cast<std::size_t>(n)];
                    int xd, yd;
                    if (n < r.k) {
                        xd = cw.u(d, c);
                        yd = cw.v(d, c);
                    } else {
                        xd = cw.u(cw.section(d), c);
                        yd = cw.prime_symbol(d, c);
                    }
                    xs = xs * a + xd;
                    ys = ys * b + yd;
                }
                r.x[i * nc + c] = (a - 1) * xs + cw.u(tail, c);
                r.y[i * nc + c] = (b - 1) * ys + cw.v(tail, c);
            }
        }
    }
    return r;
}

namespace reference {

// serial odometer over the digit words, last digit fastest
Representatives carpet_representatives(const CarpetWindow& cw, std::int64_t l, const Caps& caps) {
    const int a = cw.spec().a, b = cw.spec().b;
    Representatives r;
    r.l = l;
    r.k = floor_wl(a, b, l);
    r.cells = cw.cells();
    r.x_den = ipow(a, l + 1) / a * (a - 1);
    r.y_den = ipow(b, l + 1) / b * (b - 1);
    const BigInt count = representative_count(cw, l);
    if (count > BigInt(caps.cloud)) throw CapExceeded("carpet representatives", caps.cloud + 1, caps.cloud);
    const auto npts = count.convert_to<std::size_t>();
    if (npts == 0) return r;
    std::vector<std::size_t> digits(static_cast<std::size_t>(l), 0);
    const std::size_t tail = cw.tail();
    for (std::size_t i = 0; i < npts; ++i) {
        for (std::size_t c = 0; c < r.cells; ++c) {
            std::int64_t xs = 0, ys = 0;
            for (std::int64_t n = 0; n < l; ++n) {
                const std::size_t d = digits[static_cast<std::size_t>(n)];
                const bool full = n < r.k;
                xs = xs * a + cw.u(full ? d : cw.section(d), c);
                ys = ys * b + (full ? cw.v(d, c) : cw.prime_symbol(d, c));
            }
            r.x.push_back((a - 1) * xs + cw.u(tail, c));
            r.y.push_back((b - 1) * ys + cw.v(tail, c));
        }
        for (std::int64_t n = l - 1; n >= 0; --n) {
            auto& d = digits[static_cast<std::size_t>(n)];
            if (++d < (n < r.k ? cw.omega_count() : cw.prime_count())) break;
            d = 0;
        }
    }
    return r;
}

}  // namespace reference

namespace {

bool close(const Representatives& r, std::size_t i, std::size_t j, std::int64_t tx, std::int64_t ty) {
    for (std::size_t c = 0; c < r.cells; ++c) {
        if (std::llabs(r.x[i * r.cells + c] - r.x[j * r.cells + c]) >= tx) return false;
        if (std::llabs(r.y[i * r.cells + c] - r.y[j * r.cells + c]) >= ty) return false;
    }
    return true;
}

bool pair_less(const ClosePair& p, const ClosePair& q) { return p.i != q.i ? p.i < q.i : p.j < q.j; }

}  // namespace

namespace reference {

std::optional<ClosePair> find_close_pair(const Representatives& r, std::int64_t tx, std::int64_t ty) {
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (close(r, i, j, tx, ty)) return ClosePair{i, j};
    return std::nullopt;
}

}  // namespace reference

std::optional<ClosePair> find_close_pair(const Representatives& r, std::int64_t tx, std::int64_t ty) {
    // single-linkage splitting per coordinate: points in different clusters differ by >= the
    // threshold somewhere, so every close pair survives inside one cluster
    const std::size_t n = r.size();
    if (n < 2) return std::nullopt;
    using Cluster = std::vector<std::uint32_t>;
    std::vector<Cluster> clusters(1);
    clusters[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) clusters[0][i] = static_cast<std::uint32_t>(i);
    const std::size_t dims = 2 * r.cells;
    std::size_t stable = 0;
    for (std::size_t pass = 0; stable < dims; ++pass) {
        const std::size_t dim = pass % dims;
        const bool is_y = dim % 2 == 0;
        const std::size_t c = dim / 2;
        const auto& coord = is_y ? r.y : r.x;
        const std::int64_t t = is_y ? ty : tx;
        std::vector<std::vector<Cluster>> pieces(clusters.size());
#pragma omp parallel for schedule(dynamic, 16)
        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            auto& cl = clusters[ci];
            std::sort(cl.begin(), cl.end(), [&](auto p, auto q) {
                const auto vp = coord[p * r.cells + c], vq = coord[q * r.cells + c];
                return vp != vq ? vp < vq : p < q;
            });
            Cluster cur{cl[0]};
            for (std::size_t s = 1; s < cl.size(); ++s) {
                if (coord[cl[s] * r.cells + c] - coord[cl[s - 1] * r.cells + c] >= t) {
                    if (cur.size() > 1) pieces[ci].push_back(std::move(cur));
                    cur.clear();
                }
                cur.push_back(cl[s]);
            }
            if (cur.size() > 1) pieces[ci].push_back(std::move(cur));
        }
        std::vector<Cluster> next;
        for (auto& p : pieces)
            for (auto& cl : p) next.push_back(std::move(cl));
        std::size_t before = 0, after = 0;
        for (const auto& cl : clusters) before += cl.size();
        for (const auto& cl : next) after += cl.size();
        stable = (next.size() == clusters.size() && after == before) ? stable + 1 : 0;
        clusters = std::move(next);
        if (clusters.empty()) return std::nullopt;
    }
    std::optional<ClosePair> best;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        auto cl = clusters[ci];
        std::sort(cl.begin(), cl.end());
        std::optional<ClosePair> local;
        for (std::size_t s = 0; s < cl.size() && !local; ++s)
            for (std::size_t u = s + 1; u < cl.size(); ++u)
                if (close(r, cl[s], cl[u], tx, ty)) {
                    local = ClosePair{cl[s], cl[u]};
                    break;
                }
        if (local) {
#pragma omp critical(meandim_close_pair)
            if (!best || pair_less(*local, *best)) best = local;
        }
    }
    return best;
}

json to_json(const SandwichReport& r) {
    return {{"m", r.m},
            {"l", r.l},
            {"floor_wl", r.k},
            {"omega_count", r.omega_count},
            {"omega_prime_count", r.prime_count},
            {"product", to_string(r.product)},
            {"separated", to_string(r.separated)},
            {"cover", to_string(r.cover)},
            {"max_cell_diameter", r.max_cell_diameter},
            {"cover_scale", r.cover_scale},
            {"lower_ok", r.lower_ok},
            {"upper_ok", r.upper_ok}};
}

SandwichReport sandwich_check(const CarpetWindow& cw, std::int64_t l, const Caps& caps) {
    const int a = cw.spec().a, b = cw.spec().b;
    SandwichReport rep;
    rep.m = cw.m();
    rep.l = l;
    rep.k = floor_wl(a, b, l);
    rep.omega_count = cw.omega_count();
    rep.prime_count = cw.prime_count();
    rep.product = representative_count(cw, l);
    rep.cover_scale = static_cast<double>(a * std::pow(static_cast<long double>(b), -static_cast<long double>(l)));
    if (cw.empty()) {
        rep.lower_ok = rep.upper_ok = true;
        return rep;
    }
    // separation at b^{-l}: |dX| / (a^l (a-1)) >= b^{-l} or |dY| / (b^l (b-1)) >= b^{-l}
    const auto reps = carpet_representatives(cw, l, caps);
    const BigInt xnum = pow_big(BigInt(a), static_cast<unsigned>(l)) * (a - 1);
    const BigInt bl = pow_big(BigInt(b), static_cast<unsigned>(l));
    const auto tx = BigInt((xnum + bl - 1) / bl).convert_to<std::int64_t>();
    const std::int64_t ty = b - 1;
    if (auto pair = find_close_pair(reps, tx, ty)) {
        throw std::logic_error("sandwich lower bound violated: representatives " + std::to_string(pair->i) + " and " +
                               std::to_string(pair->j) + " are closer than b^-l");
    }
    rep.separated = reps.size();
    rep.lower_ok = rep.separated >= rep.product;

    // Phi-cell diameters from per-digit spreads; cells are indexed by the same prefixes
    rep.cover = psi_cell_count(cw, l);
    const BigInt al = pow_big(BigInt(a), static_cast<unsigned>(l));
    BigInt worst_x = 0;
    for (std::size_t c = 0; c < cw.cells(); ++c) {
        BigInt sx = 0;
        for (std::int64_t n = rep.k; n < l; ++n) {
            int best = 0;
            for (std::size_t q = 0; q < cw.prime_count(); ++q) best = std::max(best, cw.fiber_spread(q, c));
            sx += BigInt(best) * pow_big(BigInt(a), static_cast<unsigned>(l - 1 - n));
        }
        sx = sx * (a - 1) + cw.a_spread(c);
        worst_x = std::max(worst_x, sx);
    }
    int worst_y = 0;
    for (std::size_t c = 0; c < cw.cells(); ++c) worst_y = std::max(worst_y, cw.b_spread(c));
    // diameter = max(worst_x / (a^l (a-1)), worst_y / (b^l (b-1))), on the common denominator
    const BigInt xden = al * (a - 1), yden = bl * (b - 1);
    rep.cell_den = xden * yden;
    rep.max_cell_num = std::max(BigInt(worst_x * yden), BigInt(BigInt(worst_y) * xden));
    rep.max_cell_diameter = static_cast<double>(rep.max_cell_num.convert_to<long double>() /
                                                rep.cell_den.convert_to<long double>());
    // diameter < a b^{-l}  <=>  num * b^l < a * den
    const bool cells_small = rep.max_cell_num * bl < rep.cell_den * a;
    rep.upper_ok = cells_small && rep.cover <= rep.product;
    return rep;
}

// ---- Psi cells ----

std::size_t PsiCell::prime_at(const CarpetWindow& cw, std::size_t n) const {
    return n < full.size() ? cw.projection(full[n]) : prime[n - full.size()];
}

BigInt psi_cell_count(const CarpetWindow& cw, std::int64_t l) { return representative_count(cw, l); }

PsiCell psi_cell(const CarpetWindow& cw, std::int64_t l, const BigInt& ordinal) {
    if (ordinal < 0 || ordinal >= psi_cell_count(cw, l)) throw std::out_of_range("Psi cell ordinal");
    const auto k = floor_wl(cw.spec().a, cw.spec().b, l);
    PsiCell cell;
    cell.m = cw.m();
    cell.l = l;
    cell.full.resize(static_cast<std::size_t>(k));
    cell.prime.resize(static_cast<std::size_t>(l - k));
    BigInt ord = ordinal;
    for (std::int64_t n = l - 1; n >= 0; --n) {
        const std::size_t r = n < k ? cw.omega_count() : cw.prime_count();
        const auto d = BigInt(ord % r).convert_to<std::size_t>();
        ord /= r;
        if (n < k) cell.full[static_cast<std::size_t>(n)] = d;
        else cell.prime[static_cast<std::size_t>(n - k)] = d;
    }
    return cell;
}

PsiCell psi_cell_from_patterns(const CarpetWindow& cw, std::int64_t l, const std::vector<std::vector<Symbol>>& x_prefix,
                               const std::vector<std::vector<Symbol>>& y_prefix) {
    const auto k = floor_wl(cw.spec().a, cw.spec().b, l);
    if (x_prefix.size() != static_cast<std::size_t>(k) || y_prefix.size() != static_cast<std::size_t>(l))
        throw std::invalid_argument("Psi cell prefixes must have lengths floor(wl) and l");
    const auto& al = cw.spec().omega.alphabet;
    PsiCell cell;
    cell.m = cw.m();
    cell.l = l;
    for (std::int64_t n = 0; n < l; ++n) {
        const auto& y = y_prefix[static_cast<std::size_t>(n)];
        if (y.size() != cw.cells()) throw std::invalid_argument("prefix pattern of wrong size");
        if (n < k) {
            const auto& x = x_prefix[static_cast<std::size_t>(n)];
            if (x.size() != cw.cells()) throw std::invalid_argument("prefix pattern of wrong size");
            std::vector<Symbol> key(cw.cells());
            for (std::size_t c = 0; c < key.size(); ++c) key[c] = static_cast<Symbol>(al.compose(x[c], y[c]));
            const auto p = find_pattern(cw.omega(), key);
            if (!p) throw IllegalPrefix("digit pair " + std::to_string(n + 1) + " is not a legal pattern");
            cell.full.push_back(*p);
        } else {
            const auto q = find_pattern(cw.omega_prime(), y);
            if (!q) throw IllegalPrefix("digit " + std::to_string(n + 1) + " is not a legal projected pattern");
            cell.prime.push_back(*q);
        }
    }
    return cell;
}

// ---- the measure ----

CarpetMeasure::CarpetMeasure(const CarpetWindow& cw, long double w) : cw_(&cw), w_(w) {
    if (!(w >= 0 && w <= 1)) throw std::invalid_argument("carpet measure needs 0 <= w <= 1");
    if (cw.empty()) throw std::invalid_argument("carpet measure on an empty subshift");
    std::vector<long double> terms;
    for (std::size_t q = 0; q < cw.prime_count(); ++q) {
        log_t_.push_back(std::log(static_cast<long double>(cw.fiber(q))));
        terms.push_back(w * log_t_.back());
    }
    log_z_ = log_sum_exp(terms);
    long double acc = 0;
    for (std::size_t q = 0; q < cw.prime_count(); ++q) {
        acc += std::exp(log_f_prime(q));
        cdf_.push_back(static_cast<double>(acc));
    }
    cdf_.back() = 1.0;
}

long double CarpetMeasure::sum_f() const {
    long double s = 0;
    for (std::size_t p = 0; p < cw_->omega_count(); ++p) s += std::exp(log_f(p));
    return s;
}

long double CarpetMeasure::sum_f_prime() const {
    long double s = 0;
    for (std::size_t q = 0; q < cw_->prime_count(); ++q) s += std::exp(log_f_prime(q));
    return s;
}

std::size_t CarpetMeasure::sample_prime(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

long double mu_psi(const CarpetMeasure& mu, const PsiCell& cell) {
    long double s = 0;
    for (auto p : cell.full) s += mu.log_f(p);
    for (auto q : cell.prime) s += mu.log_f_prime(q);
    return s;
}

json to_json(const ProbeReport& r) {
    return {{"l", r.l},
            {"samples", r.samples},
            {"log_z_per_site", static_cast<double>(r.log_z)},
            {"mean_neg_log_mu_per_site", static_cast<double>(r.mean_neg_log)},
            {"mean_deviation", static_cast<double>(r.mean_deviation)},
            {"q05", static_cast<double>(r.q05)},
            {"q50", static_cast<double>(r.q50)},
            {"q95", static_cast<double>(r.q95)},
            {"delta", static_cast<double>(r.delta)},
            {"fraction_within_delta", static_cast<double>(r.within_delta)}};
}

namespace {

// (1/(l|B|)) log mu of one sampled cell; u within a fiber does not change the value
long double sample_log_mu(const CarpetMeasure& mu, std::int64_t l, std::int64_t k, std::uint64_t seed, std::size_t s) {
    std::mt19937_64 rng(stream_seed(seed, s));
    long double acc = 0;
    for (std::int64_t n = 0; n < l; ++n) {
        const auto q = mu.sample_prime(uniform01(rng));
        acc += mu.log_f_prime(q);
        if (n < k) acc -= mu.log_t(q);
    }
    return acc;
}

ProbeReport summarize_probe(const CarpetMeasure& mu, std::int64_t l, std::vector<long double> dev, long double delta) {
    ProbeReport r;
    const auto cells = static_cast<long double>(mu.window().cells());
    r.l = l;
    r.samples = dev.size();
    r.log_z = mu.log_z() / cells;
    r.delta = delta;
    if (dev.empty()) return r;
    long double sum = 0, within = 0;
    for (auto d : dev) {
        sum += d;
        if (std::fabs(d) <= delta) within += 1;
    }
    r.mean_deviation = sum / static_cast<long double>(dev.size());
    r.mean_neg_log = r.log_z - r.mean_deviation;
    r.within_delta = within / static_cast<long double>(dev.size());
    std::sort(dev.begin(), dev.end());
    auto q = [&dev](double p) { return dev[static_cast<std::size_t>(p * static_cast<double>(dev.size() - 1))]; };
    r.q05 = q(0.05);
    r.q50 = q(0.5);
    r.q95 = q(0.95);
    return r;
}

}  // namespace

ProbeReport shannon_mcmillan_probe(const CarpetMeasure& mu, std::int64_t l, std::size_t samples, std::uint64_t seed,
                                   long double delta) {
    if (l < 1) throw std::invalid_argument("probe depth must be >= 1");
    const auto k = floor_wl(mu.window().spec().a, mu.window().spec().b, l);
    const auto scale = static_cast<long double>(l) * static_cast<long double>(mu.window().cells());
    const long double z = mu.log_z() / static_cast<long double>(mu.window().cells());
    std::vector<long double> dev(samples);
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < samples; ++s) dev[s] = sample_log_mu(mu, l, k, seed, s) / scale + z;
    return summarize_probe(mu, l, std::move(dev), delta);
}

namespace reference {

ProbeReport shannon_mcmillan_probe(const CarpetMeasure& mu, std::int64_t l, std::size_t samples, std::uint64_t seed,
                                   long double delta) {
    if (l < 1) throw std::invalid_argument("probe depth must be >= 1");
    const auto k = floor_wl(mu.window().spec().a, mu.window().spec().b, l);
    const auto scale = static_cast<long double>(l) * static_cast<long double>(mu.window().cells());
    const long double z = mu.log_z() / static_cast<long double>(mu.window().cells());
    std::vector<long double> dev;
    for (std::size_t s = 0; s < samples; ++s) dev.push_back(sample_log_mu(mu, l, k, seed, s) / scale + z);
    return summarize_probe(mu, l, std::move(dev), delta);
}

}  // namespace reference

// ---- pigeonhole separation ----

namespace {

struct Corners {
    std::size_t cells = 0;
    std::vector<std::int64_t> x, y;  // units a^{-k} and b^{-l}
    __int128 bl = 1, ak = 1;
};

Corners corners(const CarpetWindow& cw, std::int64_t l, const std::vector<PsiCell>& cells) {
    const int a = cw.spec().a, b = cw.spec().b;
    const auto k = floor_wl(a, b, l);
    Corners out;
    out.cells = cw.cells();
    out.bl = ipow(b, l);
    out.ak = ipow(a, k);
    std::vector<PsiCell> sorted = cells;
    auto key = [](const PsiCell& c) { return std::pair(c.full, c.prime); };
    std::sort(sorted.begin(), sorted.end(), [&](const auto& p, const auto& q) { return key(p) < key(q); });
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("pigeonhole check needs pairwise distinct cells");
    for (const auto& cell : cells) {
        if (cell.l != l || cell.full.size() != static_cast<std::size_t>(k))
            throw std::invalid_argument("cell depth does not match");
        for (std::size_t c = 0; c < out.cells; ++c) {
            std::int64_t xs = 0, ys = 0;
            for (std::int64_t n = 0; n < k; ++n) xs = xs * a + cw.u(cell.full[static_cast<std::size_t>(n)], c);
            for (std::int64_t n = 0; n < l; ++n) ys = ys * b + cw.prime_symbol(cell.prime_at(cw, static_cast<std::size_t>(n)), c);
            out.x.push_back(xs);
            out.y.push_back(ys);
        }
    }
    return out;
}

// box gap (|dXc| - 1) a^{-k} >= b^{-l}, or (|dYc| - 1) b^{-l} >= b^{-l}
bool separated(const Corners& cs, std::size_t i, std::size_t j) {
    for (std::size_t c = 0; c < cs.cells; ++c) {
        const std::int64_t dx = std::llabs(cs.x[i * cs.cells + c] - cs.x[j * cs.cells + c]);
        if (dx >= 1 && static_cast<__int128>(dx - 1) * cs.bl >= cs.ak) return true;
        if (std::llabs(cs.y[i * cs.cells + c] - cs.y[j * cs.cells + c]) >= 2) return true;
    }
    return false;
}

}  // namespace

namespace reference {

PigeonholeResult separation_pigeonhole_check(const CarpetWindow& cw, std::int64_t l, const std::vector<PsiCell>& cells) {
    const auto cs = corners(cw, l, cells);
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = i + 1; j < cells.size(); ++j)
            if (separated(cs, i, j)) return {true, i, j};
    return {};
}

}  // namespace reference

PigeonholeResult separation_pigeonhole_check(const CarpetWindow& cw, std::int64_t l, const std::vector<PsiCell>& cells) {
    const auto cs = corners(cw, l, cells);
    const std::size_t n = cells.size();
    std::vector<std::size_t> first(n, n);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j)
            if (separated(cs, i, j)) {
                first[i] = j;
                break;
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (first[i] < n) return {true, i, first[i]};
    return {};
}

// ---- dimension formulas on computed series ----

json to_json(const CarpetDimensions& d) {
    json rows = json::array();
    for (std::size_t i = 0; i < d.weighted.rows.size(); ++i) {
        const auto& r = d.weighted.rows[i];
        rows.push_back({{"m", r.index},
                        {"window_size", r.window_size},
                        {"h", static_cast<double>(r.log_total / static_cast<long double>(r.window_size))},
                        {"h_prime", static_cast<double>(r.log_projected / static_cast<long double>(r.window_size))},
                        {"hw", static_cast<double>(r.per_site)},
                        {"mdim_M", static_cast<double>(d.mdim_M_rows[i])},
                        {"mdim_H", static_cast<double>(d.mdim_H_rows[i])}});
    }
    return {{"w", static_cast<double>(d.w)},      {"h", static_cast<double>(d.h)},
            {"h_prime", static_cast<double>(d.h_prime)}, {"hw", static_cast<double>(d.hw)},
            {"h_source", d.h_source},             {"mdim_M", static_cast<double>(d.mdim_M)},
            {"mdim_H", static_cast<double>(d.mdim_H)}, {"rows", rows}};
}

CarpetDimensions carpet_dimensions(const CarpetSpec& spec, const FolnerDescriptor& folner, const Caps& caps) {
    spec.validate();
    CarpetDimensions d;
    d.w = spec.w();
    d.omega = entropy_series(spec.omega, folner, caps);
    if (d.omega.empty_system) throw std::invalid_argument("carpet dimensions need a nonempty subshift");
    d.weighted = weighted_entropy_series(spec.omega, folner, d.w, caps);
    EntropySeries prime;
    prime.family = folner.family;
    prime.submultiplicative = d.omega.submultiplicative;
    for (const auto& r : d.weighted.rows) {
        prime.rows.push_back({r.index, 0, r.window_size, BigInt(r.projected), r.log_projected,
                              r.log_projected / static_cast<long double>(r.window_size)});
        d.mdim_M_rows.push_back(mdim_M_carpet(r.log_total / static_cast<long double>(r.window_size),
                                              r.log_projected / static_cast<long double>(r.window_size), spec.a,
                                              spec.b));
        d.mdim_H_rows.push_back(mdim_H_carpet(r.per_site, spec.b));
    }
    const auto eh = entropy_estimate(d.omega);
    const auto ehp = entropy_estimate(prime);
    const bool certified = eh.certified_upper.has_value() && ehp.certified_upper.has_value();
    d.h = certified ? *eh.certified_upper : eh.value;
    d.h_prime = certified ? *ehp.certified_upper : ehp.value;
    d.h_source = certified ? "certified minimum over windows" : "last window";
    d.hw = d.weighted.rows.back().per_site;
    d.mdim_M = mdim_M_carpet(d.h, d.h_prime, spec.a, spec.b);
    d.mdim_H = mdim_H_carpet(d.hw, spec.b);
    return d;
}

}  // namespace meandim
