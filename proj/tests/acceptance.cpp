// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "meandim/carpet.hpp"
#include "meandim/entropy.hpp"
#include "meandim/experiment.hpp"
#include "meandim/fractal.hpp"
#include "meandim/subshift.hpp"

using namespace meandim;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// collects failures without aborting so the line can report the first witness
struct Checker {
    Outcome out;
    std::vector<std::string> notes;
    void require(bool cond, const std::string& what) {
        if (!cond && out.pass) {
            out.pass = false;
            out.detail = what;
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
    Outcome done() {
        if (out.pass) {
            for (std::size_t i = 0; i < notes.size(); ++i) out.detail += (i ? "; " : "") + notes[i];
        }
        return out;
    }
};

std::string num(long double x, int digits = 6) {
    std::ostringstream os;
    os.precision(digits);
    os << static_cast<double>(x);
    return os.str();
}

std::string round12(long double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.11e", static_cast<double>(x));
    return buf;
}

json load_spec(const std::string& name) { return load_json_file(std::string(MEANDIM_SPEC_DIR) + "/" + name + ".json"); }

std::vector<std::pair<std::string, json>> shipped_specs() {
    std::vector<std::pair<std::string, json>> out;
    for (const auto& e : std::filesystem::directory_iterator(MEANDIM_SPEC_DIR))
        out.emplace_back(e.path().stem().string(), load_json_file(e.path().string()));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

std::vector<CarpetSpec> shipped_carpets() {
    std::vector<CarpetSpec> out;
    for (const auto& [name, doc] : shipped_specs())
        if (spec_kind(doc) == "carpet") out.push_back(parse_carpet(doc));
    return out;
}

BigInt fib(int n) {
    BigInt a = 0, b = 1;
    for (int i = 0; i < n; ++i) {
        BigInt t = a + b;
        a = b;
        b = t;
    }
    return a;
}

// largest k with a^k <= b^l
std::int64_t floor_wl_oracle(int a, int b, std::int64_t l) {
    const BigInt bl = pow_big(b, static_cast<std::uint64_t>(l));
    std::int64_t k = 0;
    while (pow_big(a, static_cast<std::uint64_t>(k + 1)) <= bl) ++k;
    return k;
}

Outcome exact_counting() {
    Checker c;
    const auto gm = parse_subshift(load_spec("golden_mean"));
    const GroupSpec z1(1);
    for (int n = 1; n <= 20; ++n) {
        const BigInt tm = count_by_transfer_matrix(gm, n);
        const BigInt bt = reference::count_by_backtracking(gm, GroupWindow::box(n, z1));
        c.require(tm == fib(n + 2) && bt == tm, "golden mean n=" + std::to_string(n) + ": transfer " + to_string(tm) +
                                                    ", backtracking " + to_string(bt) + ", F_{n+2} " +
                                                    to_string(fib(n + 2)));
    }
    for (int k = 2; k <= 3; ++k) {
        const auto fs = full_shift(Alphabet::plain(k), 1);
        for (int n = 1; n <= 10; ++n) {
            const auto w = GroupWindow::box(n, z1);
            c.require(count_patterns(fs, w) == pow_big(k, w.size()) && reference::count_by_backtracking(fs, w) == pow_big(k, w.size()),
                      "full shift k=" + std::to_string(k) + " n=" + std::to_string(n));
        }
        const auto fs2 = full_shift(Alphabet::plain(k), 2);
        for (int m = 0; m <= 2; ++m) {
            const auto w = GroupWindow::ball(m, GroupSpec(2));
            c.require(count_patterns(fs2, w) == pow_big(k, w.size()),
                      "full shift Z^2 k=" + std::to_string(k) + " ball " + std::to_string(m));
        }
    }
    c.note("golden mean n<=20 equals F_{n+2}; full shifts equal k^|w|");
    return c.done();
}

Outcome entropy_convergence() {
    Checker c;
    const auto gm = parse_subshift(load_spec("golden_mean"));
    const auto series = entropy_series(gm, FolnerFamily::boxes, 16);
    const auto est = entropy_estimate(series);
    const long double log_phi = std::log((1 + std::sqrt(5.0L)) / 2);
    const long double h16 = series.rows.back().per_site;
    c.require(std::fabs(h16 - log_phi) <= 0.02L, "per-site at n=16 is " + num(h16, 10));
    c.require(est.certified_upper && *est.certified_upper >= log_phi, "certified upper below log phi");
    c.note("h_16 = " + num(h16, 8) + ", certified upper " + num(est.certified_upper.value_or(0), 8) + " >= log phi " +
           num(log_phi, 8));
    return c.done();
}

Outcome weighted_degenerations() {
    Checker c;
    std::size_t rows = 0;
    for (const auto& [name, doc] : shipped_specs()) {
        SubshiftSpec omega;
        if (spec_kind(doc) == "carpet") omega = parse_carpet(doc).omega;
        else if (spec_kind(doc) == "subshift") omega = parse_subshift(doc);
        else continue;
        if (!omega.alphabet.is_paired()) continue;
        for (const auto& folner : {FolnerDescriptor::range(FolnerFamily::balls, 0, 3),
                                   FolnerDescriptor::range(FolnerFamily::boxes, 1, 4)}) {
            const auto one = weighted_entropy_series(omega, folner, 1);
            const auto zero = weighted_entropy_series(omega, folner, 0);
            for (std::size_t i = 0; i < folner.indices.size(); ++i) {
                const auto w = folner.window(i, GroupSpec(omega.rank));
                const auto ps = enumerate_patterns(omega, w);
                std::set<std::vector<int>> bs;
                for (std::size_t p = 0; p < ps.size(); ++p) {
                    std::vector<int> v;
                    for (auto s : ps.pattern(p)) v.push_back(omega.alphabet.b_part(s));
                    bs.insert(v);
                }
                const auto size = static_cast<long double>(w.size());
                const long double full = log_big(reference::count_by_backtracking(omega, w)) / size;
                const long double proj = std::log(static_cast<long double>(bs.size())) / size;
                const std::string tag = name + " " + to_string(folner.family) + " " + std::to_string(folner.indices[i]);
                c.require(round12(one.rows[i].per_site) == round12(full),
                          tag + ": w=1 " + round12(one.rows[i].per_site) + " vs " + round12(full));
                c.require(round12(zero.rows[i].per_site) == round12(proj),
                          tag + ": w=0 " + round12(zero.rows[i].per_site) + " vs " + round12(proj));
                ++rows;
            }
        }
    }
    c.require(rows > 0, "no paired-alphabet spec shipped");
    c.note(std::to_string(rows) + " windows agree at 12 digits");
    return c.done();
}

Outcome mcmullen_cross_check() {
    Checker c;
    const auto mc = parse_carpet(load_spec("carpet_mcmullen"));
    const auto d = carpet_dimensions(mc, FolnerDescriptor::range(FolnerFamily::balls, 0, 5));
    // per-cell factorization: |P| = 3, |pi P| = 2, fibers {2, 1}
    const long double H = std::log2(1 + std::sqrt(2.0L));
    const long double M = std::log(2.0L) / std::log(2.0L) + (std::log(3.0L) - std::log(2.0L)) / std::log(4.0L);
    c.require(std::fabs(d.mdim_H - H) <= 1e-9L, "mdim_H " + num(d.mdim_H, 15));
    c.require(std::fabs(d.mdim_M - M) <= 1e-9L, "mdim_M " + num(d.mdim_M, 15));
    c.require(d.mdim_H < d.mdim_M, "mdim_H not below mdim_M");
    c.note("mdim_H " + num(d.mdim_H, 12) + " < mdim_M " + num(d.mdim_M, 12));
    return c.done();
}

Outcome sandwich() {
    Checker c;
    std::size_t checked = 0;
    for (const auto* name : {"carpet_full_3x2", "carpet_mcmullen"}) {
        const auto spec = parse_carpet(load_spec(name));
        for (std::int64_t m = 0; m <= 1; ++m) {
            const CarpetWindow cw(spec, m);
            for (std::int64_t l = 1; l <= 4; ++l) {
                const auto r = sandwich_check(cw, l);
                const auto k = floor_wl_oracle(spec.a, spec.b, l);
                const BigInt product = pow_big(cw.omega_count(), static_cast<std::uint64_t>(k)) *
                                       pow_big(cw.prime_count(), static_cast<std::uint64_t>(l - k));
                const std::string tag = std::string(name) + " m=" + std::to_string(m) + " l=" + std::to_string(l);
                c.require(r.product == product, tag + ": product " + to_string(r.product) + " vs " + to_string(product));
                c.require(r.separated >= product, tag + ": separated " + to_string(r.separated));
                c.require(r.cover <= product, tag + ": cover " + to_string(r.cover));
                ++checked;
            }
        }
    }
    c.note(std::to_string(checked) + " (spec, m, l) instances");
    return c.done();
}

Outcome measure_engine() {
    Checker c;
    std::size_t tables = 0;
    for (const auto& spec : shipped_carpets()) {
        for (std::int64_t m = 0; m <= 2; ++m) {
            const CarpetWindow cw(spec, m);
            for (long double w : {spec.w(), 0.0L, 1.0L}) {
                const CarpetMeasure mu(cw, w);
                const std::string tag = spec.name + " m=" + std::to_string(m) + " w=" + num(w);
                c.require(std::fabs(mu.sum_f() - 1) <= 5e-13L, tag + ": sum f = " + num(mu.sum_f(), 17));
                c.require(std::fabs(mu.sum_f_prime() - 1) <= 5e-13L, tag + ": sum f' = " + num(mu.sum_f_prime(), 17));
                ++tables;
            }
        }
    }
    const auto mc = parse_carpet(load_spec("carpet_mcmullen"));
    const CarpetWindow cw(mc, 0);
    const CarpetMeasure mu(cw, mc.w());
    const auto p = shannon_mcmillan_probe(mu, 256, 10000, 2024);
    c.require(std::fabs(p.mean_neg_log - p.log_z) <= 0.05L,
              "mean " + num(p.mean_neg_log) + " vs log Z " + num(p.log_z));
    c.require(p.within_delta >= 0.9L, "only " + num(p.within_delta) + " of samples within 0.05");
    c.note(std::to_string(tables) + " tables normalized; probe mean " + num(p.mean_neg_log) + " vs log Z " +
           num(p.log_z) + ", " + num(100 * p.within_delta, 4) + "% within 0.05");
    return c.done();
}

Outcome pigeonhole() {
    Checker c;
    std::mt19937_64 rng(2024);
    std::size_t families = 0;
    for (const auto& spec : shipped_carpets()) {
        for (std::int64_t m = 0; m <= 1; ++m) {
            const CarpetWindow cw(spec, m);
            const std::size_t need = (std::size_t{1} << (2 * cw.cells())) + 1;
            std::size_t tested_l = 0;
            for (std::int64_t l = 1; l <= 12 && tested_l < 3; ++l) {
                const auto total = psi_cell_count(cw, l);
                if (total < need) continue;
                ++tested_l;
                for (int rep = 0; rep < 4; ++rep) {
                    std::vector<PsiCell> pick;
                    std::set<BigInt> used;
                    while (pick.size() < need) {
                        const BigInt ord = BigInt(rng()) % total;
                        if (used.insert(ord).second) pick.push_back(psi_cell(cw, l, ord));
                    }
                    const auto r = separation_pigeonhole_check(cw, l, pick);
                    c.require(r.found, spec.name + " m=" + std::to_string(m) + " l=" + std::to_string(l) +
                                           ": no separated pair among " + std::to_string(need) + " cells");
                    ++families;
                }
            }
        }
    }
    c.require(families > 0, "no family tested");
    c.note(std::to_string(families) + " families, each with a witness pair");
    return c.done();
}

Outcome inequality_chain() {
    Checker c;
    std::vector<std::string> seen;
    for (const auto& spec : shipped_carpets()) {
        const auto d = carpet_dimensions(spec, FolnerDescriptor::range(FolnerFamily::balls, 0, 4));
        c.require(d.mdim_H <= d.mdim_M + 0.02L, spec.name + ": " + num(d.mdim_H) + " > " + num(d.mdim_M) + " + 0.02");
        seen.push_back(spec.name + " " + num(d.mdim_H, 4) + "<=" + num(d.mdim_M, 4));
    }
    const auto ks = parse_kspace(load_spec("kspace"));
    const auto e = kg_covering_experiment(ks);
    const auto& finest = e.rows.back();
    const auto F = ks.windows.window(ks.windows.indices.size() - 1, GroupSpec(ks.rank));
    long double h_est = INFINITY;
    for (int k : {2, 4, 6, 12, 24, 48, 96}) {
        const auto r = kg_mass_distribution_demo(ks, k, F, 1e-3, 200, 2024);
        if (r.hypothesis_ok) h_est = std::min(h_est, r.per_site);
    }
    c.require(h_est <= finest.slope_lower + 0.02L, "K^G: " + num(h_est) + " > " + num(finest.slope_lower) + " + 0.02");
    seen.push_back("K^G " + num(h_est, 4) + "<=" + num(finest.slope_lower, 4));
    std::string s;
    for (std::size_t i = 0; i < seen.size(); ++i) s += (i ? ", " : "") + seen[i];
    c.note(s);
    return c.done();
}

Outcome kg_counts() {
    Checker c;
    const auto ks = parse_kspace(load_spec("kspace"));
    const auto e = kg_covering_experiment(ks);
    const long double cw = ks.scheme().total();
    std::map<std::int64_t, std::vector<const KgRow*>> by_window;
    for (const auto& r : e.rows) {
        const std::string tag = "F=" + std::to_string(r.index) + " eps=" + num(r.eps);
        // brackets: 1/(gamma+1) <= 2 sqrt(eps) < 1/gamma, zeta smallest with zeta(zeta+1) >= 4c/eps
        std::int64_t gamma = 1;
        while (!(1.0L / (gamma + 1) <= 2 * std::sqrt(static_cast<long double>(r.eps)))) ++gamma;
        std::int64_t zeta = 1;
        while (static_cast<long double>(zeta) * (zeta + 1) < 4 * cw / r.eps) ++zeta;
        c.require(r.gamma == gamma && r.zeta == zeta, tag + ": gamma/zeta " + std::to_string(r.gamma) + "/" +
                                                          std::to_string(r.zeta) + " vs " + std::to_string(gamma) + "/" +
                                                          std::to_string(zeta));
        const BigInt lo = pow_big(gamma + 1, r.window_size), hi = pow_big(2 * zeta, r.sf_size);
        c.require(r.lower_formula == lo && r.upper_formula == hi, tag + ": formula mismatch");
        c.require(lo <= r.lower && r.lower <= r.upper_sub && r.upper_sub <= r.upper_full && r.upper_full <= hi,
                  tag + ": chain " + to_string(lo) + " <= " + to_string(r.lower) + " <= " + to_string(r.upper_full) +
                      " <= " + to_string(hi));
        if (r.window_size <= 2 && (r.eps == 1e-2 || r.eps == 1e-3))
            c.require(r.slope_lower >= 0.35L && r.slope_upper <= 0.70L,
                      tag + ": slopes " + num(r.slope_lower) + ".." + num(r.slope_upper));
        by_window[r.index].push_back(&r);
    }
    for (const auto& [idx, rows] : by_window) {
        for (std::size_t i = 1; i < rows.size(); ++i)
            c.require(rows[i]->slope_upper < rows[i - 1]->slope_upper,
                      "F=" + std::to_string(idx) + ": slope does not decrease at eps " + num(rows[i]->eps));
        c.require(std::fabs(rows.back()->slope_upper - 0.5L) < std::fabs(rows.front()->slope_upper - 0.5L),
                  "F=" + std::to_string(idx) + ": slope does not approach 1/2");
    }
    const auto cube = kg_covering_experiment(parse_kspace(load_spec("cube")));
    for (const auto& r : cube.rows) {
        c.require(r.chain_ok, "cube chain at eps " + num(r.eps));
        // with eps = 1/M exactly: slope <= 1 iff upper <= M^|F|, slope >= 0.85 iff lower^20 >= M^(17|F|)
        if (r.eps == 1e-3) {
            const BigInt M = r.grid;
            c.require(r.grid == 1000 && r.upper_sub <= pow_big(M, r.window_size) &&
                          pow_big(r.lower, 20) >= pow_big(M, 17 * r.window_size),
                      "cube slope " + num(r.slope_lower) + ".." + num(r.slope_upper));
        }
    }
    c.note("finest K slope " + num(e.rows.back().slope_upper, 4) + ", cube slope at 1e-3 " +
           num(cube.rows.back().slope_upper, 4));
    return c.done();
}

Outcome mass_demo() {
    Checker c;
    const auto ks = parse_kspace(load_spec("kspace"));
    const auto e = kg_covering_experiment(ks);
    long double m_est = e.rows.back().slope_lower;
    std::string s;
    for (std::size_t i = 0; i < ks.windows.indices.size(); ++i) {
        const auto F = ks.windows.window(i, GroupSpec(ks.rank));
        long double prev = INFINITY;
        for (int k : {2, 4, 6}) {
            const auto r = kg_mass_distribution_demo(ks, k, F, 1e-3, 1000, 2024);
            const std::string tag = "F=" + std::to_string(ks.windows.indices[i]) + " k=" + std::to_string(k);
            c.require(r.hypothesis_ok, tag + ": " + r.witness);
            c.require(r.bound == 12.0L / k * static_cast<long double>(r.sf_size), tag + ": bound " + num(r.bound));
            c.require(r.bound < prev, tag + ": bound not monotone");
            prev = r.bound;
        }
        const auto sharp = kg_mass_distribution_demo(ks, 96, F, 1e-3, 1000, 2024);
        c.require(sharp.hypothesis_ok, "k=96: " + sharp.witness);
        c.require(sharp.per_site < 0.5L * m_est, "k=96 per-site " + num(sharp.per_site) + " vs " + num(m_est));
        s = "k=96 per-site bound " + num(sharp.per_site, 4) + " vs covering slope " + num(m_est, 4);
    }
    c.note("bounds (12/k)|SF| for k=2,4,6 verified; " + s);
    return c.done();
}

Outcome selfsimilar_and_homogeneous() {
    Checker c;
    std::string s;
    for (const auto* name : {"selfsimilar_full_c1_2", "selfsimilar_full_c1_3", "selfsimilar_golden_c1_2",
                             "selfsimilar_golden_c1_3"}) {
        const auto spec = parse_selfsimilar(load_spec(name));
        const auto p = selfsimilar_cover_probe(spec, {0.25, 0x1p-6, 0x1p-30},
                                               FolnerDescriptor{FolnerFamily::boxes, {1, 2, 4, 16}});
        c.require(p.within_bound, std::string(name) + ": slope " + num(p.finest_slope) + " > " + num(p.bound.bound) +
                                      " + 0.05");
        s += std::string(s.empty() ? "" : ", ") + name + " slope " + num(p.finest_slope, 4) + " bound " +
             num(p.bound.bound, 4);
    }
    std::size_t rows = 0;
    for (const auto* name : {"homogeneous_full_b2", "homogeneous_vertical_golden"}) {
        const auto spec = parse_homogeneous(load_spec(name));
        const auto a = homogeneous_covering_probe(spec, {0.25, 0.125, 0.0625}, FolnerDescriptor{FolnerFamily::boxes, {1, 2}});
        const auto b = homogeneous_covering_probe(spec, {0.25, 0.125}, FolnerDescriptor{FolnerFamily::boxes, {1}}, 1);
        c.require(a.all_ok, std::string(name) + ": " + a.witness);
        c.require(b.all_ok, std::string(name) + " S=ball(1): " + b.witness);
        rows += a.rows.size() + b.rows.size();
    }
    const auto full = homogeneous_gxn_entropy(parse_homogeneous(load_spec("homogeneous_full_b2")), 2, 6);
    c.require(std::fabs(full.prediction - 1) <= 1e-9L, "full-digit prediction " + num(full.prediction, 15));
    c.note(s + "; " + std::to_string(rows) + " homogeneous instances; full-digit prediction " + num(full.prediction, 12));
    return c.done();
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        double limit;  // seconds, 0 for none
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "exact counting", 1, exact_counting},
        {2, "entropy convergence", 1, entropy_convergence},
        {3, "weighted-entropy degenerations", 0, weighted_degenerations},
        {4, "McMullen cross-check", 0, mcmullen_cross_check},
        {5, "sandwich at desk scale", 30, sandwich},
        {6, "measure engine", 10, measure_engine},
        {7, "pigeonhole separation", 0, pigeonhole},
        {8, "inequality chain", 0, inequality_chain},
        {9, "K^G covering counts", 60, kg_counts},
        {10, "mass-distribution demo", 0, mass_demo},
        {11, "self-similar bound and homogeneous probe", 0, selfsimilar_and_homogeneous},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && cr.limit > 0 && secs >= cr.limit) o = {false, "runtime " + num(secs) + " s over " + num(cr.limit) + " s"};
        if (!o.pass) ++failed;
        char t[32];
        std::snprintf(t, sizeof t, "%.3f", secs);
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << cr.id << ". " << cr.title << " (" << t << " s): " << o.detail
                  << "\n";
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
    return failed == 0 ? 0 : 1;
}
