#include "meandim/subshift.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <numeric>
#include <unordered_map>

#include "sweep.hpp"

namespace meandim {

Alphabet Alphabet::plain(int k) {
    if (k < 1 || k > 256) throw SpecError("alphabet size must be in [1,256]");
    return Alphabet{k, 0, 0};
}

Alphabet Alphabet::paired(int a, int b) {
    if (a < 1 || b < 1 || a * b > 256) throw SpecError("paired alphabet needs a,b >= 1 and a*b <= 256");
    return Alphabet{a * b, a, b};
}

bool AdjacencyRule::trivial() const {
    return std::all_of(allowed.begin(), allowed.end(), [](auto x) { return x != 0; });
}

std::string to_string(RuleClass c) {
    switch (c) {
        case RuleClass::full: return "full";
        case RuleClass::cellwise: return "cellwise";
        case RuleClass::nearest_neighbor: return "nearest_neighbor";
        case RuleClass::forbidden: return "forbidden";
        case RuleClass::composite: return "composite";
    }
    return "unknown";
}

std::vector<Symbol> SubshiftSpec::allowed_symbols() const {
    std::vector<Symbol> out;
    for (int s = 0; s < alphabet.k; ++s) {
        if (symbol_allowed(s)) out.push_back(static_cast<Symbol>(s));
    }
    return out;
}

std::int64_t SubshiftSpec::declared_radius() const {
    std::int64_t r = adjacency.empty() ? 0 : 1;
    for (const auto& p : forbidden) {
        for (const auto& o : p.offsets) r = std::max(r, word_length(o));
    }
    return r;
}

std::string SubshiftSpec::semantics() const {
    if (adjacency.empty() && forbidden.empty()) return "free-boundary (equals projection count)";
    if (rank == 1 && forbidden.empty()) return "free-boundary (rank-1 nearest-neighbour; exact projection count available)";
    return "free-boundary (may over-count by a boundary factor)";
}

SubshiftSpec full_shift(Alphabet alphabet, int rank) {
    SubshiftSpec s;
    s.name = "full";
    s.rank = rank;
    s.alphabet = alphabet;
    s.rule_class = RuleClass::full;
    return s;
}

SubshiftSpec cellwise_shift(Alphabet alphabet, const std::vector<int>& allowed, int rank) {
    SubshiftSpec s = full_shift(alphabet, rank);
    s.name = "cellwise";
    s.rule_class = RuleClass::cellwise;
    s.allowed.assign(static_cast<std::size_t>(alphabet.k), 0);
    for (int x : allowed) {
        if (x < 0 || x >= alphabet.k) throw SpecError("cellwise symbol out of range");
        s.allowed[static_cast<std::size_t>(x)] = 1;
    }
    return s;
}

void add_forbidden_pairs(SubshiftSpec& spec, int axis, const std::vector<std::pair<int, int>>& pairs) {
    if (axis < 0 || axis >= spec.rank) throw SpecError("adjacency axis out of range");
    const int k = spec.alphabet.k;
    AdjacencyRule* rule = nullptr;
    for (auto& r : spec.adjacency) {
        if (r.axis == axis) rule = &r;
    }
    if (rule == nullptr) {
        spec.adjacency.push_back(AdjacencyRule{axis, k, std::vector<std::uint8_t>(static_cast<std::size_t>(k * k), 1)});
        rule = &spec.adjacency.back();
    }
    for (auto [s, t] : pairs) {
        if (s < 0 || s >= k || t < 0 || t >= k) throw SpecError("adjacency symbol out of range");
        rule->allowed[static_cast<std::size_t>(s * k + t)] = 0;
    }
}

SubshiftSpec hard_square(int rank) {
    SubshiftSpec s = full_shift(Alphabet::plain(2), rank);
    s.name = rank == 1 ? "golden_mean" : "hard_square";
    s.rule_class = RuleClass::nearest_neighbor;
    for (int axis = 0; axis < rank; ++axis) add_forbidden_pairs(s, axis, {{1, 1}});
    return s;
}

namespace {

using json = nlohmann::json;

int parse_symbol(const SubshiftSpec& spec, const json& j) {
    if (j.is_number_integer()) {
        const int s = j.get<int>();
        if (s < 0 || s >= spec.alphabet.k) throw SpecError("symbol " + std::to_string(s) + " out of range");
        return s;
    }
    if (j.is_array() && j.size() == 2 && spec.alphabet.is_paired()) {
        const int u = j[0].get<int>();
        const int v = j[1].get<int>();
        if (u < 0 || u >= spec.alphabet.a || v < 0 || v >= spec.alphabet.b)
            throw SpecError("paired symbol out of range");
        return spec.alphabet.compose(u, v);
    }
    throw SpecError("symbol must be an integer or an [a,b] pair: " + j.dump());
}

// component symbols expand to every full symbol with that component
std::vector<int> expand_component(const SubshiftSpec& spec, const std::string& component, const json& j) {
    if (component == "symbol") return {parse_symbol(spec, j)};
    if (!spec.alphabet.is_paired()) throw SpecError("component '" + component + "' needs a paired alphabet");
    const int c = j.get<int>();
    std::vector<int> out;
    for (int s = 0; s < spec.alphabet.k; ++s) {
        const int part = component == "a" ? spec.alphabet.a_part(s) : spec.alphabet.b_part(s);
        if (part == c) out.push_back(s);
    }
    if (out.empty()) throw SpecError("component value out of range");
    return out;
}

void apply_nearest_neighbor(SubshiftSpec& spec, const json& data) {
    const std::string component = data.value("component", std::string("symbol"));
    if (component != "symbol" && component != "a" && component != "b")
        throw SpecError("component must be symbol|a|b");
    if (!data.contains("axes") || !data["axes"].is_array()) throw SpecError("nearest_neighbor rule needs 'axes'");
    for (const auto& ax : data["axes"]) {
        std::vector<int> axes;
        if (ax.contains("axis") && ax["axis"].is_string() && ax["axis"].get<std::string>() == "all") {
            for (int i = 0; i < spec.rank; ++i) axes.push_back(i);
        } else {
            axes.push_back(ax.at("axis").get<int>());
        }
        std::vector<std::pair<int, int>> forbidden;
        const int k = spec.alphabet.k;
        if (ax.contains("forbidden")) {
            for (const auto& pr : ax["forbidden"]) {
                if (!pr.is_array() || pr.size() != 2) throw SpecError("adjacency pair must have two entries");
                for (int s : expand_component(spec, component, pr[0]))
                    for (int t : expand_component(spec, component, pr[1])) forbidden.emplace_back(s, t);
            }
        } else if (ax.contains("allowed")) {
            std::vector<std::uint8_t> ok(static_cast<std::size_t>(k * k), 0);
            for (const auto& pr : ax["allowed"]) {
                if (!pr.is_array() || pr.size() != 2) throw SpecError("adjacency pair must have two entries");
                for (int s : expand_component(spec, component, pr[0]))
                    for (int t : expand_component(spec, component, pr[1])) ok[static_cast<std::size_t>(s * k + t)] = 1;
            }
            for (int s = 0; s < k; ++s)
                for (int t = 0; t < k; ++t)
                    if (!ok[static_cast<std::size_t>(s * k + t)]) forbidden.emplace_back(s, t);
        } else {
            throw SpecError("axis entry needs 'forbidden' or 'allowed'");
        }
        for (int a : axes) add_forbidden_pairs(spec, a, forbidden);
    }
}

void apply_forbidden(SubshiftSpec& spec, const json& data) {
    if (!data.contains("patterns") || !data["patterns"].is_array()) throw SpecError("forbidden rule needs 'patterns'");
    for (const auto& p : data["patterns"]) {
        ForbiddenPattern fp;
        const auto& cells = p.at("cells");
        const auto& symbols = p.at("symbols");
        if (!cells.is_array() || !symbols.is_array() || cells.size() != symbols.size() || cells.empty())
            throw SpecError("forbidden pattern needs matching nonempty 'cells' and 'symbols'");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto c = cells[i].get<std::vector<std::int64_t>>();
            if (static_cast<int>(c.size()) != spec.rank) throw SpecError("forbidden pattern cell of wrong rank");
            fp.offsets.emplace_back(std::move(c));
            fp.symbols.push_back(static_cast<Symbol>(parse_symbol(spec, symbols[i])));
        }
        spec.forbidden.push_back(std::move(fp));
    }
}

}  // namespace

void apply_rule(SubshiftSpec& spec, const json& rule) {
    if (!rule.is_object() || !rule.contains("type")) throw SpecError("rule must be an object with a 'type'");
    const auto type = rule["type"].get<std::string>();
    const json data = rule.value("data", json::object());
    if (type == "full") return;
    if (type == "cellwise") {
        if (!data.contains("allowed")) throw SpecError("cellwise rule needs 'allowed'");
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(spec.alphabet.k), 0);
        for (const auto& s : data["allowed"]) mask[static_cast<std::size_t>(parse_symbol(spec, s))] = 1;
        if (spec.allowed.empty()) {
            spec.allowed = mask;
        } else {
            for (std::size_t i = 0; i < mask.size(); ++i) spec.allowed[i] &= mask[i];
        }
        return;
    }
    if (type == "nearest_neighbor") return apply_nearest_neighbor(spec, data);
    if (type == "forbidden") return apply_forbidden(spec, data);
    if (type == "composite") {
        if (!data.contains("rules") || !data["rules"].is_array()) throw SpecError("composite rule needs 'rules'");
        for (const auto& r : data["rules"]) apply_rule(spec, r);
        return;
    }
    throw SpecError("unknown rule type '" + type + "'");
}

SubshiftSpec parse_subshift(const json& doc) {
    try {
        if (!doc.is_object()) throw SpecError("subshift spec must be a JSON object");
        SubshiftSpec spec;
        spec.name = doc.value("name", std::string("subshift"));
        spec.rank = doc.value("rank", 1);
        if (spec.rank < 1) throw SpecError("rank must be >= 1");
        if (!doc.contains("alphabet")) throw SpecError("missing 'alphabet'");
        const auto& al = doc["alphabet"];
        if (al.contains("a") || al.contains("b")) {
            spec.alphabet = Alphabet::paired(al.at("a").get<int>(), al.at("b").get<int>());
        } else {
            spec.alphabet = Alphabet::plain(al.at("k").get<int>());
        }
        if (!doc.contains("rule")) throw SpecError("missing 'rule'");
        const auto type = doc["rule"].at("type").get<std::string>();
        if (type == "full") spec.rule_class = RuleClass::full;
        else if (type == "cellwise") spec.rule_class = RuleClass::cellwise;
        else if (type == "nearest_neighbor") spec.rule_class = RuleClass::nearest_neighbor;
        else if (type == "forbidden") spec.rule_class = RuleClass::forbidden;
        else spec.rule_class = RuleClass::composite;
        apply_rule(spec, doc["rule"]);
        return spec;
    } catch (const json::exception& e) {
        throw SpecError(std::string("subshift spec: ") + e.what());
    }
}

json subshift_to_json(const SubshiftSpec& spec) {
    json doc;
    doc["name"] = spec.name;
    doc["rank"] = spec.rank;
    if (spec.alphabet.is_paired()) doc["alphabet"] = {{"a", spec.alphabet.a}, {"b", spec.alphabet.b}};
    else doc["alphabet"] = {{"k", spec.alphabet.k}};
    json rules = json::array();
    if (!spec.allowed.empty()) {
        json allowed = json::array();
        for (auto s : spec.allowed_symbols()) allowed.push_back(static_cast<int>(s));
        rules.push_back({{"type", "cellwise"}, {"data", {{"allowed", allowed}}}});
    }
    for (const auto& r : spec.adjacency) {
        json forbidden = json::array();
        for (int s = 0; s < r.k; ++s)
            for (int t = 0; t < r.k; ++t)
                if (!r.ok(s, t)) forbidden.push_back({s, t});
        rules.push_back({{"type", "nearest_neighbor"},
                         {"data", {{"axes", json::array({{{"axis", r.axis}, {"forbidden", forbidden}}})}}}});
    }
    if (!spec.forbidden.empty()) {
        json pats = json::array();
        for (const auto& p : spec.forbidden) {
            json cells = json::array();
            for (const auto& o : p.offsets) cells.push_back(o.coords);
            json syms = json::array();
            for (auto s : p.symbols) syms.push_back(static_cast<int>(s));
            pats.push_back({{"cells", cells}, {"symbols", syms}});
        }
        rules.push_back({{"type", "forbidden"}, {"data", {{"patterns", pats}}}});
    }
    if (rules.empty()) doc["rule"] = {{"type", "full"}};
    else doc["rule"] = {{"type", "composite"}, {"data", {{"rules", rules}}}};
    return doc;
}

CompiledRules::CompiledRules(const SubshiftSpec& spec, const GroupWindow& window) : spec_(&spec), window_(&window) {
    if (window.rank() != spec.rank) throw std::invalid_argument("window rank differs from subshift rank");
    for (std::size_t r = 0; r < spec.adjacency.size(); ++r) {
        const auto& rule = spec.adjacency[r];
        if (rule.trivial()) continue;
        GroupElement step = GroupElement::identity(spec.rank);
        step.coords[static_cast<std::size_t>(rule.axis)] = 1;
        for (std::size_t i = 0; i < window.size(); ++i) {
            if (auto j = window.index_of(window[i] + step)) {
                instances_.push_back(Instance{{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(*j)},
                                              static_cast<std::int32_t>(r), -1});
            }
        }
    }
    for (std::size_t p = 0; p < spec.forbidden.size(); ++p) {
        const auto& pat = spec.forbidden[p];
        for (std::size_t i = 0; i < window.size(); ++i) {
            const GroupElement base = window[i] - pat.offsets[0];
            Instance inst;
            inst.pattern = static_cast<std::int32_t>(p);
            bool inside = true;
            for (const auto& o : pat.offsets) {
                auto j = window.index_of(base + o);
                if (!j) {
                    inside = false;
                    break;
                }
                inst.cells.push_back(static_cast<std::uint32_t>(*j));
            }
            if (inside) instances_.push_back(std::move(inst));
        }
    }
}

bool CompiledRules::legal(std::span<const Symbol> pattern) const {
    if (pattern.size() != window_->size()) throw std::invalid_argument("pattern size differs from window");
    for (auto s : pattern) {
        if (s >= spec_->alphabet.k || !spec_->symbol_allowed(s)) return false;
    }
    auto lookup = [&](std::uint32_t c) { return static_cast<int>(pattern[c]); };
    for (const auto& inst : instances_) {
        if (!satisfied(inst, lookup)) return false;
    }
    return true;
}

bool is_legal(const SubshiftSpec& spec, const GroupWindow& window, std::span<const Symbol> pattern) {
    return CompiledRules(spec, window).legal(pattern);
}

BigInt FiberTable::total() const {
    BigInt t = 0;
    for (const auto& e : entries) t += e.t;
    return t;
}

long double FiberTable::max_log_fiber() const {
    long double m = 0;
    for (const auto& e : entries) m = std::max(m, log_big(e.t));
    return m;
}

std::optional<std::size_t> FiberTable::find(std::span<const Symbol> v) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), v, [](const FiberEntry& e, std::span<const Symbol> key) {
        return std::lexicographical_compare(e.v.begin(), e.v.end(), key.begin(), key.end());
    });
    if (it == entries.end() || !std::equal(it->v.begin(), it->v.end(), v.begin(), v.end())) return std::nullopt;
    return static_cast<std::size_t>(it - entries.begin());
}

namespace {

// depth-first search over cells in window order with forward checking
class Backtracker {
public:
    Backtracker(const CompiledRules& rules) : rules_(rules), n_(rules.window().size()) {
        const auto& spec = rules.spec();
        domain_ = spec.allowed_symbols();
        cur_.assign(n_, 0);
        checks_at_.resize(n_);
        forward_at_.resize(n_);
        const auto& insts = rules.instances();
        for (std::size_t id = 0; id < insts.size(); ++id) {
            const auto& c = insts[id].cells;
            checks_at_[*std::max_element(c.begin(), c.end())].push_back(static_cast<std::uint32_t>(id));
            if (insts[id].adjacency >= 0) {
                const bool first_is_earlier = c[0] < c[1];
                const auto early = first_is_earlier ? c[0] : c[1];
                forward_at_[early].push_back(Forward{static_cast<std::uint32_t>(insts[id].adjacency), first_is_earlier});
            }
        }
        const int k = spec.alphabet.k;
        for (const auto& r : spec.adjacency) {
            std::vector<std::uint8_t> next(static_cast<std::size_t>(k), 0), prev(static_cast<std::size_t>(k), 0);
            for (auto s : domain_)
                for (auto t : domain_)
                    if (r.ok(s, t)) {
                        next[s] = 1;
                        prev[t] = 1;
                    }
            has_next_.push_back(std::move(next));
            has_prev_.push_back(std::move(prev));
        }
    }

    const std::vector<Symbol>& domain() const { return domain_; }
    std::size_t cells() const { return n_; }

    bool assign(std::size_t i, Symbol s) {
        cur_[i] = s;
        auto lookup = [this](std::uint32_t c) { return static_cast<int>(cur_[c]); };
        for (auto id : checks_at_[i]) {
            if (!rules_.satisfied(rules_.instances()[id], lookup)) return false;
        }
        for (const auto& f : forward_at_[i]) {
            // the partner cell is later; it still needs some compatible symbol
            if (f.first ? !has_next_[f.rule][s] : !has_prev_[f.rule][s]) return false;
        }
        return true;
    }

    // visit(pattern) for every completion of cells [i, n)
    template <class Visit>
    void run(std::size_t i, Visit& visit) {
        if (i == n_) {
            visit(cur_);
            return;
        }
        for (auto s : domain_) {
            if (assign(i, s)) run(i + 1, visit);
        }
    }

private:
    struct Forward {
        std::uint32_t rule;
        bool first;
    };
    const CompiledRules& rules_;
    std::size_t n_;
    std::vector<Symbol> domain_;
    std::vector<Symbol> cur_;
    std::vector<std::vector<std::uint32_t>> checks_at_;
    std::vector<std::vector<Forward>> forward_at_;
    std::vector<std::vector<std::uint8_t>> has_next_, has_prev_;
};

PatternSet empty_set(const SubshiftSpec& spec, const GroupWindow& w) {
    PatternSet ps;
    ps.window = w;
    ps.alphabet = spec.alphabet;
    return ps;
}

void check_pattern_cap(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps) {
    const BigInt predicted = count_patterns(spec, w, caps);
    if (predicted > caps.patterns) {
        const auto req = predicted > BigInt(std::numeric_limits<std::size_t>::max())
                             ? std::numeric_limits<std::size_t>::max()
                             : predicted.convert_to<std::size_t>();
        throw CapExceeded("pattern enumeration", req, caps.patterns);
    }
}

}  // namespace

PatternSet enumerate_patterns(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps) {
    check_pattern_cap(spec, w, caps);
    PatternSet ps = empty_set(spec, w);
    CompiledRules rules(spec, w);
    if (w.empty()) {
        ps.count = 1;
        return ps;
    }
    const auto domain = spec.allowed_symbols();
    const int parts_n = static_cast<int>(domain.size());
    std::vector<std::vector<Symbol>> parts(domain.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int idx = 0; idx < parts_n; ++idx) {
        Backtracker bt(rules);
        auto& out = parts[static_cast<std::size_t>(idx)];
        auto visit = [&out](const std::vector<Symbol>& p) { out.insert(out.end(), p.begin(), p.end()); };
        if (bt.assign(0, domain[static_cast<std::size_t>(idx)])) bt.run(1, visit);
    }
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    ps.data.reserve(total);
    for (const auto& p : parts) ps.data.insert(ps.data.end(), p.begin(), p.end());
    ps.count = ps.size();
    return ps;
}

namespace reference {

PatternSet enumerate_patterns(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps) {
    check_pattern_cap(spec, w, caps);
    PatternSet ps = empty_set(spec, w);
    CompiledRules rules(spec, w);
    if (w.empty()) {
        ps.count = 1;
        return ps;
    }
    Backtracker bt(rules);
    auto visit = [&ps](const std::vector<Symbol>& p) { ps.data.insert(ps.data.end(), p.begin(), p.end()); };
    bt.run(0, visit);
    ps.count = ps.size();
    return ps;
}

BigInt count_by_backtracking(const SubshiftSpec& spec, const GroupWindow& w) {
    CompiledRules rules(spec, w);
    Backtracker bt(rules);
    std::uint64_t n = 0;
    auto visit = [&n](const std::vector<Symbol>&) { ++n; };
    bt.run(0, visit);
    return BigInt(n);
}

FiberTable fiber_table(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps) {
    if (!spec.alphabet.is_paired()) throw std::invalid_argument("fiber_table needs a paired alphabet");
    return fiber_counts(reference::enumerate_patterns(spec, w, caps));
}

}  // namespace reference

namespace {

using BigMatrix = std::vector<BigInt>;

BigMatrix mat_mul(const BigMatrix& x, const BigMatrix& y, std::size_t k) {
    BigMatrix z(k * k, BigInt(0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            if (x[i * k + l] == 0) continue;
            for (std::size_t j = 0; j < k; ++j) z[i * k + j] += x[i * k + l] * y[l * k + j];
        }
    return z;
}

BigMatrix mat_pow(BigMatrix m, std::uint64_t e, std::size_t k) {
    BigMatrix r(k * k, BigInt(0));
    for (std::size_t i = 0; i < k; ++i) r[i * k + i] = 1;
    while (e != 0) {
        if (e & 1U) r = mat_mul(r, m, k);
        e >>= 1U;
        if (e != 0) m = mat_mul(m, m, k);
    }
    return r;
}

std::vector<std::uint8_t> transfer_matrix(const SubshiftSpec& spec) {
    const int k = spec.alphabet.k;
    std::vector<std::uint8_t> m(static_cast<std::size_t>(k * k), 0);
    for (int s = 0; s < k; ++s)
        for (int t = 0; t < k; ++t) {
            bool ok = spec.symbol_allowed(s) && spec.symbol_allowed(t);
            for (const auto& r : spec.adjacency) ok = ok && r.ok(s, t);
            m[static_cast<std::size_t>(s * k + t)] = ok ? 1 : 0;
        }
    return m;
}

BigInt bilinear_power(const SubshiftSpec& spec, std::int64_t length, const std::vector<std::uint8_t>& left,
                      const std::vector<std::uint8_t>& right) {
    const auto k = static_cast<std::size_t>(spec.alphabet.k);
    const auto m8 = transfer_matrix(spec);
    BigMatrix m(k * k);
    for (std::size_t i = 0; i < k * k; ++i) m[i] = m8[i];
    const auto p = mat_pow(std::move(m), static_cast<std::uint64_t>(length - 1), k);
    BigInt total = 0;
    for (std::size_t s = 0; s < k; ++s) {
        if (!left[s]) continue;
        for (std::size_t t = 0; t < k; ++t)
            if (right[t]) total += p[s * k + t];
    }
    return total;
}

}  // namespace

bool transfer_matrix_applicable(const SubshiftSpec& spec, const GroupWindow& w) {
    if (spec.rank != 1 || !spec.forbidden.empty() || w.empty()) return false;
    std::int64_t lo = w[0][0], hi = w[0][0];
    for (const auto& g : w.elements()) {
        lo = std::min(lo, g[0]);
        hi = std::max(hi, g[0]);
    }
    return hi - lo + 1 == static_cast<std::int64_t>(w.size());
}

BigInt count_by_transfer_matrix(const SubshiftSpec& spec, std::int64_t length) {
    if (spec.rank != 1 || !spec.forbidden.empty())
        throw std::invalid_argument("transfer matrix needs a rank-1 nearest-neighbour rule");
    if (length <= 0) return 1;
    std::vector<std::uint8_t> allowed(static_cast<std::size_t>(spec.alphabet.k));
    for (int s = 0; s < spec.alphabet.k; ++s) allowed[static_cast<std::size_t>(s)] = spec.symbol_allowed(s) ? 1 : 0;
    return bilinear_power(spec, length, allowed, allowed);
}

BigInt count_globally_legal(const SubshiftSpec& spec, std::int64_t length) {
    if (spec.rank != 1 || !spec.forbidden.empty())
        throw std::invalid_argument("global legality count needs a rank-1 nearest-neighbour rule");
    const int k = spec.alphabet.k;
    const auto m = transfer_matrix(spec);
    auto essential = [&](bool forward) {
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(k));
        for (int s = 0; s < k; ++s) keep[static_cast<std::size_t>(s)] = spec.symbol_allowed(s) ? 1 : 0;
        for (bool changed = true; changed;) {
            changed = false;
            for (int s = 0; s < k; ++s) {
                if (!keep[static_cast<std::size_t>(s)]) continue;
                bool any = false;
                for (int t = 0; t < k && !any; ++t) {
                    const auto e = forward ? m[static_cast<std::size_t>(s * k + t)] : m[static_cast<std::size_t>(t * k + s)];
                    any = e && keep[static_cast<std::size_t>(t)];
                }
                if (!any) {
                    keep[static_cast<std::size_t>(s)] = 0;
                    changed = true;
                }
            }
        }
        return keep;
    };
    if (length <= 0) return 1;
    return bilinear_power(spec, length, essential(false), essential(true));
}

BigInt count_by_sweep(const SubshiftSpec& spec, const GroupWindow& w) {
    CompiledRules rules(spec, w);
    detail::SweepPlan plan(rules);
    detail::StateMap state;
    state.emplace(std::string(), BigInt(1));
    const auto domain = spec.allowed_symbols();
    for (std::size_t p = 0; p < plan.steps.size() && !state.empty(); ++p) state = plan.advance(p, state, domain);
    BigInt total = 0;
    for (const auto& [key, c] : state) total += c;
    return total;
}

BigInt count_patterns(const SubshiftSpec& spec, const GroupWindow& w, const Caps&) {
    if (transfer_matrix_applicable(spec, w)) return count_by_transfer_matrix(spec, static_cast<std::int64_t>(w.size()));
    return count_by_sweep(spec, w);
}

PatternSet project(const PatternSet& ps) {
    if (!ps.alphabet.is_paired()) throw std::invalid_argument("project needs a paired alphabet");
    const std::size_t n = ps.window.size();
    std::vector<std::vector<Symbol>> rows;
    rows.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::vector<Symbol> v(n);
        auto p = ps.pattern(i);
        for (std::size_t c = 0; c < n; ++c) v[c] = static_cast<Symbol>(ps.alphabet.b_part(p[c]));
        rows.push_back(std::move(v));
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    PatternSet out;
    out.window = ps.window;
    out.alphabet = Alphabet::plain(ps.alphabet.b);
    for (const auto& r : rows) out.data.insert(out.data.end(), r.begin(), r.end());
    out.count = rows.size();
    if (n == 0 && ps.count > 0) out.count = 1;
    return out;
}

FiberTable fiber_counts(const PatternSet& ps) {
    if (!ps.alphabet.is_paired()) throw std::invalid_argument("fiber_counts needs a paired alphabet");
    const std::size_t n = ps.window.size();
    std::map<std::vector<Symbol>, BigInt> groups;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::vector<Symbol> v(n);
        auto p = ps.pattern(i);
        for (std::size_t c = 0; c < n; ++c) v[c] = static_cast<Symbol>(ps.alphabet.b_part(p[c]));
        groups[std::move(v)] += 1;
    }
    FiberTable ft;
    ft.window = ps.window;
    ft.a = ps.alphabet.a;
    ft.b = ps.alphabet.b;
    for (auto& [v, t] : groups) ft.entries.push_back(FiberEntry{v, t});
    return ft;
}

namespace {

struct FiberSearch {
    const detail::SweepPlan& plan;
    const std::vector<std::vector<Symbol>>& by_b;  // full symbols with a given B-part
    std::size_t cap;
    std::atomic<bool>& overflow;
    std::vector<Symbol> vbuf;  // sweep order
    std::vector<FiberEntry> out;

    void run(std::size_t p, const detail::StateMap& state) {
        if (overflow.load(std::memory_order_relaxed)) return;
        if (p == plan.steps.size()) {
            BigInt t = 0;
            for (const auto& [key, c] : state) t += c;
            if (t == 0) return;
            std::vector<Symbol> v(vbuf.size());
            for (std::size_t q = 0; q < vbuf.size(); ++q) v[plan.steps[q].cell] = vbuf[q];
            out.push_back(FiberEntry{std::move(v), std::move(t)});
            if (out.size() > cap) overflow.store(true);
            return;
        }
        for (std::size_t v = 0; v < by_b.size(); ++v) {
            if (by_b[v].empty()) continue;
            auto next = plan.advance(p, state, by_b[v]);
            if (next.empty()) continue;
            vbuf[p] = static_cast<Symbol>(v);
            run(p + 1, next);
        }
    }
};

}  // namespace

FiberTable fiber_table(const SubshiftSpec& spec, const GroupWindow& w, const Caps& caps) {
    if (!spec.alphabet.is_paired()) throw std::invalid_argument("fiber_table needs a paired alphabet");
    CompiledRules rules(spec, w);
    detail::SweepPlan plan(rules);
    const int b = spec.alphabet.b;
    std::vector<std::vector<Symbol>> by_b(static_cast<std::size_t>(b));
    for (auto s : spec.allowed_symbols()) by_b[static_cast<std::size_t>(spec.alphabet.b_part(s))].push_back(s);

    FiberTable ft;
    ft.window = w;
    ft.a = spec.alphabet.a;
    ft.b = b;
    detail::StateMap start;
    start.emplace(std::string(), BigInt(1));
    std::atomic<bool> overflow{false};
    if (plan.steps.empty()) {
        ft.entries.push_back(FiberEntry{{}, BigInt(1)});
        return ft;
    }
    std::vector<std::vector<FiberEntry>> parts(static_cast<std::size_t>(b));
#pragma omp parallel for schedule(dynamic, 1)
    for (int v0 = 0; v0 < b; ++v0) {
        const auto& syms = by_b[static_cast<std::size_t>(v0)];
        if (syms.empty()) continue;
        FiberSearch search{plan, by_b, caps.patterns, overflow, std::vector<Symbol>(w.size()), {}};
        auto next = plan.advance(0, start, syms);
        if (next.empty()) continue;
        search.vbuf[0] = static_cast<Symbol>(v0);
        search.run(1, next);
        parts[static_cast<std::size_t>(v0)] = std::move(search.out);
    }
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    if (overflow.load() || total > caps.patterns) throw CapExceeded("fiber table", total, caps.patterns);
    for (auto& p : parts)
        for (auto& e : p) ft.entries.push_back(std::move(e));
    std::sort(ft.entries.begin(), ft.entries.end(),
              [](const FiberEntry& x, const FiberEntry& y) { return x.v < y.v; });
    return ft;
}

}  // namespace meandim
