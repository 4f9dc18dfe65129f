#include "meandim/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace meandim {

namespace {

constexpr long double kNegInf = -std::numeric_limits<long double>::infinity();

EntropyRow make_row(std::int64_t index, std::size_t size, BigInt count) {
    EntropyRow r;
    r.index = index;
    r.window_size = size;
    r.log_count = log_big(count);
    r.per_site = size == 0 ? 0 : r.log_count / static_cast<long double>(size);
    r.count = std::move(count);
    return r;
}

}  // namespace

EntropySeries entropy_series(const SubshiftSpec& spec, const FolnerDescriptor& folner, const Caps& caps) {
    if (!folner.valid()) throw std::invalid_argument("Folner indices must be strictly increasing");
    GroupSpec g(spec.rank);
    EntropySeries s;
    s.family = folner.family;
    s.semantics = spec.semantics();
    s.submultiplicative = folner.family == FolnerFamily::boxes || spec.rank == 1;
    for (std::size_t i = 0; i < folner.indices.size(); ++i) {
        const auto w = folner.window(i, g, caps.cells);
        s.rows.push_back(make_row(folner.indices[i], w.size(), count_patterns(spec, w, caps)));
        if (s.rows.back().count == 0) s.empty_system = true;
    }
    return s;
}

EntropySeries entropy_series(const SubshiftSpec& spec, FolnerFamily family, std::int64_t m_max, const Caps& caps) {
    return entropy_series(spec, FolnerDescriptor::range(family, 1, m_max), caps);
}

EntropyEstimate entropy_estimate(const EntropySeries& series) {
    if (series.rows.empty()) throw std::invalid_argument("entropy_estimate needs a nonempty series");
    EntropyEstimate e;
    if (series.empty_system) {
        e.value = kNegInf;
        e.certified_upper = kNegInf;
        e.provenance = "exact";
        return e;
    }
    e.value = series.rows.back().per_site;
    e.provenance = "estimate";
    if (series.submultiplicative) {
        long double m = series.rows.front().per_site;
        for (const auto& r : series.rows) m = std::min(m, r.per_site);
        e.certified_upper = m;
    }
    return e;
}

long double spectral_entropy(const SubshiftSpec& spec) {
    if (spec.rank != 1 || !spec.forbidden.empty())
        throw std::invalid_argument("spectral entropy needs a rank-1 nearest-neighbour rule");
    const int k = spec.alphabet.k;
    std::vector<long double> m(static_cast<std::size_t>(k * k), 0);
    for (int s = 0; s < k; ++s)
        for (int t = 0; t < k; ++t) {
            bool ok = spec.symbol_allowed(s) && spec.symbol_allowed(t);
            for (const auto& r : spec.adjacency) ok = ok && r.ok(s, t);
            m[static_cast<std::size_t>(s * k + t)] = ok ? 1 : 0;
        }
    // power iteration on M + I; the shift keeps every class aperiodic
    std::vector<long double> v(static_cast<std::size_t>(k), 1), nv(static_cast<std::size_t>(k));
    long double lambda = 0;
    for (int it = 0; it < 200000; ++it) {
        long double norm = 0;
        for (int s = 0; s < k; ++s) {
            long double acc = v[static_cast<std::size_t>(s)];
            for (int t = 0; t < k; ++t) acc += m[static_cast<std::size_t>(s * k + t)] * v[static_cast<std::size_t>(t)];
            nv[static_cast<std::size_t>(s)] = acc;
            norm = std::max(norm, acc);
        }
        for (auto& x : nv) x /= norm;
        const long double prev = lambda;
        lambda = norm;
        v.swap(nv);
        if (it > 50 && std::fabs(lambda - prev) <= 1e-18L * lambda) break;
    }
    const long double rho = lambda - 1;
    return rho <= 1e-15L ? kNegInf : std::log(rho);
}

long double log_partition(const FiberTable& table, long double w) {
    if (table.entries.empty()) return kNegInf;
    if (w == 0) return log_big(BigInt(table.size()));
    if (w == 1) return log_big(table.total());
    long double top = kNegInf;
    std::vector<long double> terms;
    terms.reserve(table.size());
    for (const auto& e : table.entries) {
        terms.push_back(w * log_big(e.t));
        top = std::max(top, terms.back());
    }
    long double acc = 0;
    for (auto t : terms) acc += std::exp(t - top);
    return top + std::log(acc);
}

WeightedRow weighted_row(const FiberTable& table, long double w, std::int64_t index) {
    WeightedRow r;
    r.index = index;
    r.window_size = table.window.size();
    r.total = table.total();
    r.projected = table.size();
    r.log_total = log_big(r.total);
    r.log_projected = log_big(BigInt(r.projected));
    r.max_log_fiber = table.max_log_fiber();
    r.log_z = log_partition(table, w);
    r.per_site = r.window_size == 0 ? 0 : r.log_z / static_cast<long double>(r.window_size);
    return r;
}

bool weighted_bracket_holds(const WeightedRow& row, long double w) {
    if (row.projected == 0) return true;
    const long double tol = 1e-12L * std::max<long double>(1, std::fabs(row.log_total));
    const bool upper = row.log_z <= row.log_projected + w * row.max_log_fiber + tol;
    const bool lower = row.log_z >= std::max(row.log_projected, w * row.log_total) - tol;
    // monotone in w between the exact endpoints
    const bool ends = row.log_z >= row.log_projected - tol && row.log_z <= row.log_total + tol;
    return upper && lower && ends;
}

WeightedEntropySeries weighted_entropy_series(const SubshiftSpec& spec, const FolnerDescriptor& folner, long double w,
                                              const Caps& caps) {
    if (!spec.alphabet.is_paired()) throw std::invalid_argument("weighted entropy needs a paired alphabet");
    if (!(w >= 0 && w <= 1)) throw std::invalid_argument("weight exponent must lie in [0,1]");
    if (!folner.valid()) throw std::invalid_argument("Folner indices must be strictly increasing");
    GroupSpec g(spec.rank);
    WeightedEntropySeries s;
    s.w = w;
    s.family = folner.family;
    for (std::size_t i = 0; i < folner.indices.size(); ++i) {
        const auto win = folner.window(i, g, caps.cells);
        auto row = weighted_row(fiber_table(spec, win, caps), w, folner.indices[i]);
        if (!weighted_bracket_holds(row, w))
            throw std::logic_error("weighted partition function escaped its bracket at index " +
                                   std::to_string(folner.indices[i]));
        s.rows.push_back(std::move(row));
    }
    return s;
}

EntropySeries gxn_entropy_series(const SubshiftSpec& digit_spec, const FolnerDescriptor& base, std::int64_t depth_max,
                                 const Caps& caps) {
    if (digit_spec.rank < 2) throw std::invalid_argument("digit rules live on Z^d x N, rank >= 2");
    if (depth_max < 1) throw std::invalid_argument("depth must be positive");
    if (!base.valid()) throw std::invalid_argument("Folner indices must be strictly increasing");
    GroupSpec g(digit_spec.rank - 1);
    EntropySeries s;
    s.family = base.family;
    s.semantics = digit_spec.semantics();
    s.submultiplicative = false;  // rows mix the two directions
    for (std::size_t i = 0; i < base.indices.size(); ++i) {
        const auto F = base.window(i, g, caps.cells);
        for (std::int64_t N = 1; N <= depth_max; ++N) {
            const ProductWindow pw(F, N);
            auto row = make_row(base.indices[i], pw.size(), count_patterns(digit_spec, pw.lattice_window(caps.cells), caps));
            row.depth = N;
            if (row.count == 0) s.empty_system = true;
            s.rows.push_back(std::move(row));
        }
    }
    return s;
}

}  // namespace meandim
