#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <random>
#include <set>

#include "meandim/carpet.hpp"
#include "meandim/metrics.hpp"
#include "meandim/parallel.hpp"

using namespace meandim;
using Exact = boost::multiprecision::cpp_rational;

namespace {

CarpetSpec full_carpet(int a, int b) { return make_carpet(a, b, full_shift(Alphabet::paired(a, b))); }
CarpetSpec mcmullen() { return make_carpet(4, 2, cellwise_shift(Alphabet::paired(4, 2), {0, 2, 1})); }
// golden-mean rule on the B-digits along the axis
CarpetSpec golden_b() {
    SubshiftSpec s = full_shift(Alphabet::paired(3, 2));
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v) pairs.push_back({u * 2 + 1, v * 2 + 1});
    add_forbidden_pairs(s, 0, pairs);
    return make_carpet(3, 2, s);
}

// direct formula: sum_{n<=l} d_n / a^n + tail / (a^l (a-1))
Exact coordinate(const std::vector<int>& digits, int tail, int base) {
    Exact s = 0, p = 1;
    for (int d : digits) {
        p /= base;
        s += d * p;
    }
    return s + Exact(tail) * p / (base - 1);
}

Exact rabs(const Exact& r) { return r < 0 ? Exact(-r) : r; }

}  // namespace

TEST_CASE("carpet dimension formulas") {
    CHECK(mdim_M_carpet(std::log(6.0L), std::log(2.0L), 3, 2) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(mdim_H_carpet(2 * std::log(2.0L), 2) == doctest::Approx(2.0).epsilon(1e-15));
    for (long double h : {0.1L, 0.7L, 1.3L}) {
        CHECK(std::fabs(mdim_M_carpet(h, h, 5, 3) - h / std::log(3.0L)) < 1e-15L);
        for (long double hp : {0.0L, 0.4L, 0.9L})
            CHECK(std::fabs(mdim_M_carpet(h, hp, 3, 3) - mdim_H_carpet(h, 3)) < 1e-15L);
    }
    CHECK(std::fabs(mdim_M_carpet(std::log(3.0L), std::log(2.0L), 4, 2) - (std::log(3.0L) / std::log(4.0L) + 0.5L)) <
          1e-15L);
    CHECK(std::fabs(mdim_H_carpet(std::log(1 + std::sqrt(2.0L)), 2) - 1.27155L) < 1e-5L);
}

TEST_CASE("floor(wl) in integers") {
    for (int a = 2; a <= 7; ++a)
        for (int b = 2; b <= a; ++b)
            for (int l = 0; l <= 40; ++l) {
                const long double wl = l * std::log(static_cast<long double>(b)) / std::log(static_cast<long double>(a));
                const long double fl = std::floor(wl + 1e-12L);
                const auto k = floor_wl(a, b, l);
                CHECK(k == static_cast<std::int64_t>(fl));
                CHECK(pow_big(BigInt(a), static_cast<unsigned>(k)) <= pow_big(BigInt(b), static_cast<unsigned>(l)));
            }
    CHECK(floor_wl(4, 2, 7) == 3);
}

TEST_CASE("carpet specs") {
    CHECK_THROWS_AS(make_carpet(2, 3, full_shift(Alphabet::paired(2, 3))), SpecError);
    const auto j = carpet_to_json(mcmullen());
    const auto back = parse_carpet(j);
    CHECK(back.a == 4);
    CHECK(back.omega.allowed_symbols() == mcmullen().omega.allowed_symbols());
    nlohmann::json bad = j;
    bad["a"] = 2;
    bad["b"] = 3;
    CHECK_THROWS_AS(parse_carpet(bad), SpecError);
}

TEST_CASE("carpet window") {
    const auto mc = mcmullen();
    const CarpetWindow cw(mc, 0);
    CHECK(cw.omega_count() == 3);
    CHECK(cw.prime_count() == 2);
    CHECK(cw.fiber(0) == 2);
    CHECK(cw.fiber(1) == 1);
    CHECK(cw.u(cw.section(0), 0) == 0);
    CHECK(cw.fiber_spread(0, 0) == 1);
    CHECK(cw.fiber_spread(1, 0) == 0);
    CHECK(cw.a_spread(0) == 1);
    CHECK(cw.b_spread(0) == 1);
}

TEST_CASE("representatives") {
    const auto f2 = full_carpet(2, 2);
    const CarpetWindow cw(f2, 0);
    const auto r1 = carpet_representatives(cw, 1);
    REQUIRE(r1.size() == 4);
    // tail (0,0): X = x_1 / 2, Y = y_1 / 2
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(Exact(r1.x[i], r1.x_den) * 2 == Exact(static_cast<int>(i / 2)));
        CHECK(Exact(r1.y[i], r1.y_den) * 2 == Exact(static_cast<int>(i % 2)));
    }
    CHECK(carpet_representatives(cw, 0).size() == 1);
    const auto mc = mcmullen();
    const CarpetWindow mw(mc, 0);
    CHECK(carpet_representatives(mw, 2).size() == 6);
    CHECK(representative_count(mw, 2) == 6);

    // against the direct rational formula, m = 1 windows
    const auto gb = golden_b();
    const CarpetWindow gw(gb, 1);
    const auto r = carpet_representatives(gw, 3);
    for (std::size_t i = 0; i < r.size(); i += 7) {
        const auto cell = psi_cell(gw, 3, i);
        for (std::size_t c = 0; c < gw.cells(); ++c) {
            std::vector<int> xd, yd;
            for (std::size_t n = 0; n < 3; ++n) {
                const auto q = cell.prime_at(gw, n);
                yd.push_back(gw.prime_symbol(q, c));
                xd.push_back(n < cell.full.size() ? gw.u(cell.full[n], c) : gw.u(gw.section(q), c));
            }
            CHECK(Exact(r.x[i * r.cells + c], r.x_den) == coordinate(xd, gw.u(gw.tail(), c), 3));
            CHECK(Exact(r.y[i * r.cells + c], r.y_den) == coordinate(yd, gw.v(gw.tail(), c), 2));
        }
    }
}

TEST_CASE("sandwich lemma on small windows") {
    for (const auto& spec : {full_carpet(2, 2), full_carpet(3, 2), mcmullen(), golden_b()}) {
        for (std::int64_t m = 0; m <= 1; ++m) {
            const CarpetWindow cw(spec, m);
            for (std::int64_t l = 0; l <= 3; ++l) {
                if (representative_count(cw, l) > 20000) continue;
                const auto rep = sandwich_check(cw, l);
                CHECK(rep.lower_ok);
                CHECK(rep.upper_ok);
                CHECK(rep.separated >= rep.product);
                CHECK(rep.cover <= rep.product);
                // exhaustive rational l-infinity distances
                if (rep.product > 400) continue;
                const auto r = carpet_representatives(cw, l);
                const Exact sep = Exact(1, static_cast<long>(std::pow(spec.b, l)));
                for (std::size_t i = 0; i < r.size(); ++i)
                    for (std::size_t j = i + 1; j < r.size(); ++j) {
                        Exact d = 0;
                        for (std::size_t c = 0; c < r.cells; ++c) {
                            d = std::max(d, rabs(Exact(r.x[i * r.cells + c] - r.x[j * r.cells + c], r.x_den)));
                            d = std::max(d, rabs(Exact(r.y[i * r.cells + c] - r.y[j * r.cells + c], r.y_den)));
                        }
                        CHECK(d >= sep);
                    }
            }
        }
    }
    // cross-module: greedy separated set of the same points
    const auto mc = mcmullen();
    const CarpetWindow cw(mc, 0);
    const auto r = carpet_representatives(cw, 4);
    PointCloud cloud(cw.window(), CoordKind::pair);
    for (std::size_t i = 0; i < r.size(); ++i)
        cloud.push(std::vector<double>{static_cast<double>(r.x[i]) / static_cast<double>(r.x_den),
                                       static_cast<double>(r.y[i]) / static_cast<double>(r.y_den)});
    const auto d = [&cloud](std::size_t i, std::size_t j) {
        const double v = coordinate_distance(CoordKind::pair, cloud.point(i).data(), cloud.point(j).data());
        return Interval{v, v};
    };
    CHECK(separated_set(cloud.size(), d, (1.0 / 16) * (1 - 1e-9)).size() >= representative_count(cw, 4));

    const auto empty = make_carpet(2, 2, cellwise_shift(Alphabet::paired(2, 2), {}));
    const CarpetWindow ew(empty, 0);
    const auto er = sandwich_check(ew, 2);
    CHECK(er.product == 0);
    CHECK(er.separated == 0);
    CHECK(er.cover == 0);
}

TEST_CASE("Phi cell diameter against truncated enumeration") {
    const auto mc = mcmullen();
    const CarpetWindow cw(mc, 0);
    const std::int64_t l = 2, depth = 8;
    const auto rep = sandwich_check(cw, l);
    // all cells share the worst fiber pattern here; enumerate one with y_2 = 0 (fiber {0,1})
    double lo = 1, hi = 0, ylo = 1, yhi = 0;
    const std::int64_t k = floor_wl(4, 2, l);
    std::vector<int> digits(static_cast<std::size_t>(depth), 0);
    const std::size_t free_n = static_cast<std::size_t>(depth - k);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < free_n; ++i) combos *= 3;
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        double x = 0, y = 0;
        bool ok = true;
        for (std::int64_t n = k; n < depth; ++n) {
            const std::size_t p = c % 3;
            c /= 3;
            const int u = cw.u(p, 0), v = cw.v(p, 0);
            if (n < l && v != 0) ok = false;  // y_n fixed to 0
            x += u * std::pow(4.0, -static_cast<double>(n + 1));
            y += v * std::pow(2.0, -static_cast<double>(n + 1));
        }
        if (!ok) continue;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        ylo = std::min(ylo, y);
        yhi = std::max(yhi, y);
    }
    const double tail_slack = 2 * std::pow(2.0, -static_cast<double>(depth));
    const double diam = std::max(hi - lo, yhi - ylo);
    CHECK(diam <= rep.max_cell_diameter + 1e-15);
    CHECK(diam >= rep.max_cell_diameter - tail_slack);
    CHECK(rep.max_cell_diameter < rep.cover_scale);
}

TEST_CASE("close-pair kernel against the quadratic scan") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        Representatives r;
        r.cells = 1 + rng() % 3;
        const std::size_t n = 2 + rng() % 120;
        for (std::size_t i = 0; i < n * r.cells; ++i) {
            r.x.push_back(static_cast<std::int64_t>(rng() % 200));
            r.y.push_back(static_cast<std::int64_t>(rng() % 200));
        }
        const std::int64_t tx = 1 + static_cast<std::int64_t>(rng() % 40), ty = 1 + static_cast<std::int64_t>(rng() % 40);
        const auto fast = find_close_pair(r, tx, ty);
        const auto slow = reference::find_close_pair(r, tx, ty);
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) {
            CHECK(fast->i == slow->i);
            CHECK(fast->j == slow->j);
        }
    }
}

TEST_CASE("Psi cells and the measure") {
    const auto mc = mcmullen();
    const CarpetWindow cw(mc, 0);
    const CarpetMeasure mu(cw, 0.5L);
    CHECK(std::fabs(mu.log_z() - std::log(std::sqrt(2.0L) + 1)) < 1e-15L);
    // l = 1 fixes only y_1
    const auto cell = psi_cell_from_patterns(cw, 1, {}, {{0}});
    CHECK(std::fabs(mu_psi(mu, cell) - std::log(std::sqrt(2.0L) / (1 + std::sqrt(2.0L)))) < 1e-15L);
    CHECK(mu_psi(mu, psi_cell(cw, 0, 0)) == 0);
    CHECK_THROWS_AS(psi_cell_from_patterns(cw, 2, {{1}}, {{1}, {0}}), IllegalPrefix);

    for (const auto& spec : {full_carpet(3, 2), mcmullen(), golden_b()}) {
        for (std::int64_t m = 0; m <= 2; ++m) {
            const CarpetWindow w(spec, m);
            for (long double wexp : {spec.w(), 0.0L, 1.0L}) {
                const CarpetMeasure me(w, wexp);
                CHECK(std::fabs(me.sum_f() - 1) < 1e-12L);
                CHECK(std::fabs(me.sum_f_prime() - 1) < 1e-12L);
            }
            // cell probabilities at depth 3 add up to 1, children add up to parents
            const CarpetMeasure me(w, spec.w());
            const auto cells3 = psi_cell_count(w, 3);
            if (cells3 > 5000) continue;
            long double total = 0;
            for (BigInt i = 0; i < cells3; ++i) total += std::exp(mu_psi(me, psi_cell(w, 3, i)));
            CHECK(std::fabs(total - 1) < 1e-12L);
        }
    }
    // additivity: depth l+1 cell = parent + last factor (McMullen, k grows every other level)
    for (std::int64_t l = 1; l < 8; ++l) {
        const auto k1 = floor_wl(4, 2, l + 1), k0 = floor_wl(4, 2, l);
        const auto child = psi_cell(cw, l + 1, 5 % psi_cell_count(cw, l + 1));
        PsiCell parent;
        parent.m = 0;
        parent.l = l;
        for (std::size_t n = 0; n < static_cast<std::size_t>(l); ++n) {
            if (n < static_cast<std::size_t>(k0)) parent.full.push_back(child.full[n]);
            else parent.prime.push_back(child.prime_at(cw, n));
        }
        long double last;
        if (k1 > k0) {
            // y_{k1} became an x-digit: the factor f' is replaced by f and a new f' appended
            last = mu.log_f(child.full.back()) - mu.log_f_prime(cw.projection(child.full.back())) +
                   mu.log_f_prime(child.prime.back());
        } else {
            last = mu.log_f_prime(child.prime.back());
        }
        CHECK(std::fabs(mu_psi(mu, child) - (mu_psi(mu, parent) + last)) < 1e-15L);
    }

    // full shift with a = b has w = 1 and is uniform
    const auto f2 = full_carpet(2, 2);
    const CarpetWindow fw(f2, 1);
    const CarpetMeasure uni(fw, f2.w());
    for (std::int64_t l = 1; l <= 4; ++l)
        CHECK(std::fabs(mu_psi(uni, psi_cell(fw, l, 11)) + l * std::log(64.0L)) < 1e-12L);
}

TEST_CASE("Shannon-McMillan probe") {
    const auto f2 = full_carpet(2, 2);
    const CarpetWindow fw(f2, 1);
    const CarpetMeasure uni(fw, f2.w());
    const auto u = shannon_mcmillan_probe(uni, 20, 200, 5);
    CHECK(std::fabs(u.mean_deviation) < 1e-15L);
    CHECK(std::fabs(u.q05) < 1e-15L);
    CHECK(std::fabs(u.q95) < 1e-15L);
    CHECK(u.within_delta == 1);

    const auto mc = mcmullen();
    const CarpetWindow cw(mc, 0);
    const CarpetMeasure mu(cw, mc.w());
    const auto p = shannon_mcmillan_probe(mu, 256, 10000, 2024);
    CHECK(std::fabs(p.mean_neg_log - p.log_z) < 0.05L);
    const auto ref = reference::shannon_mcmillan_probe(mu, 256, 10000, 2024);
    CHECK(p.mean_deviation == ref.mean_deviation);
    CHECK(p.q50 == ref.q50);
    CHECK(shannon_mcmillan_probe(mu, 4, 0, 1).samples == 0);
}

TEST_CASE("pigeonhole separation") {
    const auto f2 = full_carpet(2, 2);
    const CarpetWindow cw(f2, 0);
    std::vector<PsiCell> five;
    for (int i = 0; i < 5; ++i) five.push_back(psi_cell(cw, 2, i));
    const auto r = separation_pigeonhole_check(cw, 2, five);
    CHECK(r.found);
    const auto ref = reference::separation_pigeonhole_check(cw, 2, five);
    CHECK(r.i == ref.i);
    CHECK(r.j == ref.j);

    // same y-prefix, x differing within floor(wl): boxes are a^{-k} apart
    const auto f3 = full_carpet(3, 2);
    const CarpetWindow w3(f3, 0);
    const auto c1 = psi_cell_from_patterns(w3, 2, {{0}}, {{0}, {0}});
    const auto c2 = psi_cell_from_patterns(w3, 2, {{2}}, {{0}, {0}});
    CHECK(separation_pigeonhole_check(w3, 2, {c1, c2}).found);

    std::vector<PsiCell> all;
    for (BigInt i = 0; i < psi_cell_count(cw, 3); ++i) all.push_back(psi_cell(cw, 3, i));
    CHECK(separation_pigeonhole_check(cw, 3, all).found);

    // random subsets of size 4^{|B|}+1 on several specs
    std::mt19937_64 rng(11);
    for (const auto& spec : {full_carpet(3, 2), mcmullen(), golden_b()}) {
        for (std::int64_t m = 0; m <= 1; ++m) {
            const CarpetWindow w(spec, m);
            const std::size_t need = (std::size_t{1} << (2 * w.cells())) + 1;
            for (std::int64_t l = 1; l <= 10; ++l) {
                const auto total = psi_cell_count(w, l);
                if (total < need) continue;
                std::vector<PsiCell> pick;
                std::set<BigInt> used;
                while (pick.size() < need) {
                    const BigInt ord = BigInt(rng()) % total;
                    if (used.insert(ord).second) pick.push_back(psi_cell(w, l, ord));
                }
                const auto got = separation_pigeonhole_check(w, l, pick);
                CHECK(got.found);
                const auto slow = reference::separation_pigeonhole_check(w, l, pick);
                CHECK(got.i == slow.i);
                CHECK(got.j == slow.j);
                break;
            }
        }
    }
}

TEST_CASE("carpet dimensions from series") {
    const auto mc = mcmullen();
    const auto d = carpet_dimensions(mc, FolnerDescriptor::range(FolnerFamily::balls, 0, 5));
    CHECK(std::fabs(d.mdim_H - std::log2(1 + std::sqrt(2.0L))) < 1e-9L);
    CHECK(std::fabs(d.mdim_M - (std::log(3.0L) / std::log(4.0L) + 0.5L)) < 1e-9L);
    CHECK(d.mdim_H < d.mdim_M);

    const auto f3 = full_carpet(3, 2);
    const auto df = carpet_dimensions(f3, FolnerDescriptor::range(FolnerFamily::balls, 0, 3));
    CHECK(df.mdim_M == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(df.mdim_H == doctest::Approx(2.0).epsilon(1e-12));

    // Hoelder: log Z_m <= (1-w) log|Omega'| + w log|Omega| on every window
    for (const auto& spec : {mc, f3, golden_b()}) {
        const auto dd = carpet_dimensions(spec, FolnerDescriptor::range(FolnerFamily::balls, 0, 4));
        for (std::size_t i = 0; i < dd.mdim_H_rows.size(); ++i) CHECK(dd.mdim_H_rows[i] <= dd.mdim_M_rows[i] + 1e-12L);
        CHECK(dd.mdim_H <= dd.mdim_M + 0.02L);
    }
}

TEST_CASE("representatives match the serial reference") {
    for (const auto& spec : {full_carpet(3, 2), mcmullen(), golden_b()}) {
        for (std::int64_t m = 0; m <= 1; ++m) {
            const CarpetWindow cw(spec, m);
            for (std::int64_t l = 0; l <= 3; ++l) {
                const auto fast = carpet_representatives(cw, l);
                const auto slow = reference::carpet_representatives(cw, l);
                CHECK(fast.x == slow.x);
                CHECK(fast.y == slow.y);
                CHECK(fast.x_den == slow.x_den);
                CHECK(fast.y_den == slow.y_den);
            }
        }
    }
}
