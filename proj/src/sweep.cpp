#include "sweep.hpp"

#include <algorithm>
#include <numeric>

namespace meandim::detail {

SweepPlan::SweepPlan(const CompiledRules& rules) : spec(&rules.spec()) {
    const auto& w = rules.window();
    const std::size_t n = w.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(), [&w](auto x, auto y) { return w[x] < w[y]; });
    std::vector<std::size_t> pos(n);
    for (std::size_t p = 0; p < n; ++p) pos[order[p]] = p;

    const auto& insts = rules.instances();
    std::vector<std::size_t> last_use(n, 0);
    for (std::size_t p = 0; p < n; ++p) last_use[order[p]] = p;
    std::vector<std::vector<std::size_t>> completes(n);
    for (std::size_t id = 0; id < insts.size(); ++id) {
        std::size_t last = 0;
        for (auto c : insts[id].cells) last = std::max(last, pos[c]);
        completes[last].push_back(id);
        for (auto c : insts[id].cells) last_use[c] = std::max(last_use[c], last);
    }

    std::vector<std::uint32_t> frontier;  // cells, in sweep order
    steps.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        auto& st = steps[p];
        st.cell = order[p];
        std::vector<std::uint32_t> extended = frontier;
        extended.push_back(order[p]);
        auto slot_of = [&extended](std::uint32_t cell) {
            return static_cast<std::uint32_t>(std::find(extended.begin(), extended.end(), cell) - extended.begin());
        };
        for (auto id : completes[p]) {
            Check ch;
            ch.adjacency = insts[id].adjacency;
            ch.pattern = insts[id].pattern;
            for (auto c : insts[id].cells) ch.slots.push_back(slot_of(c));
            st.checks.push_back(std::move(ch));
        }
        std::vector<std::uint32_t> next;
        for (std::size_t q = 0; q < extended.size(); ++q) {
            if (last_use[extended[q]] > p) {
                st.keep.push_back(static_cast<std::uint32_t>(q));
                next.push_back(extended[q]);
            }
        }
        frontier = std::move(next);
        max_frontier_ = std::max(max_frontier_, frontier.size());
    }
}

StateMap SweepPlan::advance(std::size_t p, const StateMap& in, const std::vector<Symbol>& symbols) const {
    const auto& st = steps[p];
    StateMap out;
    out.reserve(in.size() * 2);
    std::string ext;
    std::string key;
    for (const auto& [state, count] : in) {
        ext = state;
        ext.push_back('\0');
        for (auto s : symbols) {
            ext.back() = static_cast<char>(s);
            bool ok = true;
            for (const auto& ch : st.checks) {
                if (ch.adjacency >= 0) {
                    const auto& r = spec->adjacency[static_cast<std::size_t>(ch.adjacency)];
                    ok = r.ok(static_cast<Symbol>(ext[ch.slots[0]]), static_cast<Symbol>(ext[ch.slots[1]]));
                } else {
                    const auto& pat = spec->forbidden[static_cast<std::size_t>(ch.pattern)];
                    bool all = true;
                    for (std::size_t j = 0; j < ch.slots.size() && all; ++j)
                        all = static_cast<Symbol>(ext[ch.slots[j]]) == pat.symbols[j];
                    ok = !all;
                }
                if (!ok) break;
            }
            if (!ok) continue;
            key.clear();
            for (auto q : st.keep) key.push_back(ext[q]);
            out[key] += count;
        }
    }
    return out;
}

}  // namespace meandim::detail
