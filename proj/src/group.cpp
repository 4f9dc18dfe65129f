#include "meandim/group.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace meandim {

GroupElement GroupElement::operator+(const GroupElement& o) const {
    GroupElement r = *this;
    for (std::size_t i = 0; i < coords.size(); ++i) r.coords[i] += o.coords[i];
    return r;
}

GroupElement GroupElement::operator-(const GroupElement& o) const {
    GroupElement r = *this;
    for (std::size_t i = 0; i < coords.size(); ++i) r.coords[i] -= o.coords[i];
    return r;
}

GroupElement GroupElement::operator-() const {
    GroupElement r = *this;
    for (auto& c : r.coords) c = -c;
    return r;
}

std::size_t GroupElementHash::operator()(const GroupElement& g) const noexcept {
    std::size_t h = 0x84222325cbf29ce4ULL;
    for (auto c : g.coords) {
        h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

GroupSpec::GroupSpec(int rank) : rank_(rank) {
    if (rank < 1) throw std::invalid_argument("group rank must be >= 1");
}

GroupElement GroupSpec::generator(int index) const {
    if (index < 0 || index >= generator_count()) throw std::out_of_range("generator index");
    GroupElement g = GroupElement::identity(rank_);
    g.coords[static_cast<std::size_t>(index / 2)] = (index % 2 == 0) ? 1 : -1;
    return g;
}

std::int64_t word_length(const GroupElement& g) {
    std::int64_t n = 0;
    for (auto c : g.coords) n += c < 0 ? -c : c;
    return n;
}

std::vector<int> minimal_word(const GroupElement& g) {
    std::vector<int> word;
    for (std::size_t axis = 0; axis < g.coords.size(); ++axis) {
        const std::int64_t c = g.coords[axis];
        const int gen = static_cast<int>(2 * axis) + (c < 0 ? 1 : 0);
        word.insert(word.end(), static_cast<std::size_t>(std::llabs(c)), gen);
    }
    return word;  // already ascending
}

bool canonical_less(const GroupElement& a, const GroupElement& b) {
    const auto la = word_length(a);
    const auto lb = word_length(b);
    if (la != lb) return la < lb;
    // compare the ascending generator words without materializing them
    std::size_t axis_a = 0, axis_b = 0;
    std::int64_t left_a = 0, left_b = 0;
    int gen_a = 0, gen_b = 0;
    auto advance = [](const GroupElement& g, std::size_t& axis, std::int64_t& left, int& gen) {
        while (left == 0 && axis < g.coords.size()) {
            const std::int64_t c = g.coords[axis];
            left = std::llabs(c);
            gen = static_cast<int>(2 * axis) + (c < 0 ? 1 : 0);
            ++axis;
        }
    };
    for (std::int64_t k = 0; k < la; ++k) {
        advance(a, axis_a, left_a, gen_a);
        advance(b, axis_b, left_b, gen_b);
        if (gen_a != gen_b) return gen_a < gen_b;
        --left_a;
        --left_b;
    }
    return false;
}

std::vector<GroupElement> canonical_order(std::vector<GroupElement> elements) {
    std::stable_sort(elements.begin(), elements.end(), canonical_less);
    return elements;
}

std::uint64_t ball_size(int rank, std::int64_t m) {
    // sum_k 2^k C(d,k) C(m,k)
    long double total = 0;
    long double cd = 1, cm = 1, p2 = 1;
    for (int k = 0; k <= rank && k <= m; ++k) {
        if (k > 0) {
            cd = cd * static_cast<long double>(rank - k + 1) / k;
            cm = cm * static_cast<long double>(m - k + 1) / k;
            p2 *= 2;
        }
        total += p2 * cd * cm;
    }
    if (total >= 1.8e19L) return static_cast<std::uint64_t>(-1);
    return static_cast<std::uint64_t>(total + 0.5L);
}

GroupWindow::GroupWindow(std::vector<GroupElement> elements, int rank, WindowKind kind,
                         std::int64_t parameter)
    : elements_(std::move(elements)), rank_(rank), kind_(kind), parameter_(parameter) {
    index_.reserve(elements_.size());
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        if (elements_[i].rank() != rank) throw std::invalid_argument("window element of wrong rank");
        if (!index_.emplace(elements_[i], i).second)
            throw std::invalid_argument("duplicate element in window");
    }
}

namespace {

void enumerate_l1(int rank, std::int64_t m, std::vector<std::int64_t>& cur, std::size_t axis,
                  std::vector<GroupElement>& out) {
    if (axis == static_cast<std::size_t>(rank)) {
        out.emplace_back(cur);
        return;
    }
    for (std::int64_t c = -m; c <= m; ++c) {
        cur[axis] = c;
        enumerate_l1(rank, m - std::llabs(c), cur, axis + 1, out);
    }
    cur[axis] = 0;
}

}  // namespace

GroupWindow GroupWindow::ball(std::int64_t m, const GroupSpec& spec, std::size_t cap) {
    if (m < 0) throw std::invalid_argument("ball radius must be nonnegative");
    const auto n = ball_size(spec.rank(), m);
    if (n > cap) throw CapExceeded("ball(" + std::to_string(m) + ")", n, cap);
    std::vector<GroupElement> els;
    els.reserve(n);
    std::vector<std::int64_t> cur(static_cast<std::size_t>(spec.rank()), 0);
    enumerate_l1(spec.rank(), m, cur, 0, els);
    return GroupWindow(canonical_order(std::move(els)), spec.rank(), WindowKind::ball, m);
}

GroupWindow GroupWindow::box(std::int64_t n, const GroupSpec& spec, std::size_t cap) {
    if (n < 1) throw std::invalid_argument("box side must be positive");
    std::size_t total = 1;
    for (int i = 0; i < spec.rank(); ++i) total = sat_mul(total, static_cast<std::size_t>(n));
    if (total > cap) throw CapExceeded("box(" + std::to_string(n) + ")", total, cap);
    std::vector<GroupElement> els;
    els.reserve(total);
    std::vector<std::int64_t> cur(static_cast<std::size_t>(spec.rank()), 0);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t r = k;
        for (int i = spec.rank() - 1; i >= 0; --i) {
            cur[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(r % static_cast<std::size_t>(n));
            r /= static_cast<std::size_t>(n);
        }
        els.emplace_back(cur);
    }
    return GroupWindow(canonical_order(std::move(els)), spec.rank(), WindowKind::box, n);
}

GroupWindow GroupWindow::from_elements(std::vector<GroupElement> elements, int rank, std::size_t cap) {
    if (elements.size() > cap) throw CapExceeded("explicit window", elements.size(), cap);
    auto sorted = canonical_order(std::move(elements));
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    return GroupWindow(std::move(sorted), rank, WindowKind::explicit_set, 0);
}

std::optional<std::size_t> GroupWindow::index_of(const GroupElement& g) const {
    auto it = index_.find(g);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

GroupWindow GroupWindow::translated(const GroupElement& g) const {
    std::vector<GroupElement> els;
    els.reserve(elements_.size());
    for (const auto& e : elements_) els.push_back(e + g);
    return from_elements(std::move(els), rank_, static_cast<std::size_t>(-1));
}

GroupWindow GroupWindow::sum(const GroupWindow& other, std::size_t cap) const {
    std::unordered_map<GroupElement, bool, GroupElementHash> seen;
    std::vector<GroupElement> els;
    for (const auto& a : elements_) {
        for (const auto& b : other.elements_) {
            auto s = a + b;
            if (seen.emplace(s, true).second) {
                els.push_back(std::move(s));
                if (els.size() > cap) throw CapExceeded("window sum", els.size(), cap);
            }
        }
    }
    return from_elements(std::move(els), rank_, cap);
}

Rational make_rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const auto g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return Rational{num, den};
}

Rational folner_defect(const GroupWindow& F, const GroupElement& g) {
    if (F.empty()) throw std::invalid_argument("folner_defect needs a nonempty window");
    // f lies in gF iff f - g lies in F
    std::int64_t missing = 0;
    for (const auto& f : F.elements()) {
        if (!F.contains(f - g)) ++missing;
    }
    return make_rational(missing, static_cast<std::int64_t>(F.size()));
}

FolnerDescriptor FolnerDescriptor::range(FolnerFamily family, std::int64_t first, std::int64_t last) {
    FolnerDescriptor d;
    d.family = family;
    for (std::int64_t i = first; i <= last; ++i) d.indices.push_back(i);
    return d;
}

GroupWindow FolnerDescriptor::window(std::size_t i, const GroupSpec& spec, std::size_t cap) const {
    const auto m = indices.at(i);
    return family == FolnerFamily::balls ? GroupWindow::ball(m, spec, cap) : GroupWindow::box(m, spec, cap);
}

bool FolnerDescriptor::valid() const {
    if (indices.empty()) return false;
    const std::int64_t lowest = family == FolnerFamily::balls ? 0 : 1;
    if (indices.front() < lowest) return false;
    return std::adjacent_find(indices.begin(), indices.end(),
                              [](auto x, auto y) { return y <= x; }) == indices.end();
}

std::string to_string(FolnerFamily f) { return f == FolnerFamily::balls ? "balls" : "boxes"; }

FolnerFamily folner_family_from_string(const std::string& s) {
    if (s == "balls") return FolnerFamily::balls;
    if (s == "boxes") return FolnerFamily::boxes;
    throw std::invalid_argument("unknown Folner family '" + s + "' (expected balls|boxes)");
}

ProductWindow::ProductWindow(GroupWindow base, std::int64_t layers) : base_(std::move(base)), layers_(layers) {
    if (layers < 1) throw std::invalid_argument("product window needs at least one layer");
}

GroupElement ProductWindow::lattice_point(std::size_t cell) const {
    GroupElement g = base_[window_index(cell)];
    g.coords.push_back(layer(cell));
    return g;
}

GroupWindow ProductWindow::lattice_window(std::size_t cap) const {
    if (size() > cap) throw CapExceeded("product window", size(), cap);
    std::vector<GroupElement> els;
    els.reserve(size());
    for (std::size_t c = 0; c < size(); ++c) els.push_back(lattice_point(c));
    return GroupWindow::from_elements(std::move(els), base_.rank() + 1, cap);
}

nlohmann::json window_to_json(const GroupWindow& w) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& g : w.elements()) arr.push_back(g.coords);
    return arr;
}

GroupWindow window_from_json(const nlohmann::json& j, int rank) {
    if (!j.is_array()) throw std::invalid_argument("window must be a JSON array");
    std::vector<GroupElement> els;
    for (const auto& e : j) {
        auto c = e.get<std::vector<std::int64_t>>();
        if (static_cast<int>(c.size()) != rank) throw std::invalid_argument("window element of wrong rank");
        els.emplace_back(std::move(c));
    }
    auto w = GroupWindow::from_elements(els, rank);
    if (w.size() != els.size()) throw std::invalid_argument("duplicate element in window");
    for (std::size_t i = 0; i < els.size(); ++i) {
        if (!(w[i] == els[i])) throw std::invalid_argument("window is not in canonical order");
    }
    return w;
}

}  // namespace meandim
