#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ellcharge/abstraction/abstraction.hpp"

namespace ellcharge::certificate {

/// Universe {0..universe-1}; each set lists the elements it covers.
struct SetCoverInstance {
    std::size_t universe = 0;
    std::vector<std::vector<int>> sets;
};

struct CoverResult {
    std::vector<std::size_t> chosen;  // indices into the instance's sets
    bool exact = false;
    [[nodiscard]] std::size_t size() const noexcept { return chosen.size(); }
};

enum class Method { greedy_upper_bound, exact };

inline const char* to_string(Method m) noexcept { return m == Method::exact ? "exact" : "greedy-upper-bound"; }

inline Method method_from_string(const std::string& s)
{
    if (s == "exact") return Method::exact;
    if (s == "greedy-upper-bound") return Method::greedy_upper_bound;
    throw DomainError("unknown complexity method '" + s + "'");
}

namespace detail {

using Bits = std::vector<std::uint64_t>;

inline Bits to_bits(const std::vector<int>& set, std::size_t universe)
{
    Bits b((universe + 63) / 64, 0);
    for (int e : set) b[static_cast<std::size_t>(e) / 64] |= std::uint64_t{1} << (static_cast<std::size_t>(e) % 64);
    return b;
}

inline bool subset_of(const Bits& a, const Bits& b) noexcept
{
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] & ~b[i]) return false;
    return true;
}

inline std::size_t count_new(const Bits& set, const Bits& covered) noexcept
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < set.size(); ++i) n += static_cast<std::size_t>(__builtin_popcountll(set[i] & ~covered[i]));
    return n;
}

inline void unite(Bits& dst, const Bits& src) noexcept
{
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
}

inline bool test(const Bits& b, std::size_t e) noexcept { return (b[e / 64] >> (e % 64)) & 1U; }

inline void check(const SetCoverInstance& inst)
{
    std::vector<char> seen(inst.universe, 0);
    for (const auto& s : inst.sets)
        for (int e : s) {
            if (e < 0 || static_cast<std::size_t>(e) >= inst.universe) throw ShapeError("cover element outside universe");
            seen[static_cast<std::size_t>(e)] = 1;
        }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw ShapeError("universe element covered by no set");
}

}  // namespace detail

/// Greedy cover: repeatedly takes the set with most uncovered elements (lowest
/// index on ties).
inline CoverResult greedy_cover(const SetCoverInstance& inst)
{
    detail::check(inst);
    std::vector<detail::Bits> bits;
    for (const auto& s : inst.sets) bits.push_back(detail::to_bits(s, inst.universe));
    detail::Bits covered((inst.universe + 63) / 64, 0);
    std::size_t left = inst.universe;
    CoverResult r;
    while (left > 0) {
        std::size_t best = 0;
        std::size_t gain = 0;
        for (std::size_t i = 0; i < bits.size(); ++i) {
            const auto g = detail::count_new(bits[i], covered);
            if (g > gain) {
                gain = g;
                best = i;
            }
        }
        detail::unite(covered, bits[best]);
        left -= gain;
        r.chosen.push_back(best);
    }
    std::sort(r.chosen.begin(), r.chosen.end());
    return r;
}

/// Exhaustive branch and bound: branch on the uncovered element with the fewest
/// covering sets.
inline CoverResult exact_cover(const SetCoverInstance& inst)
{
    detail::check(inst);
    std::vector<detail::Bits> bits;
    for (const auto& s : inst.sets) bits.push_back(detail::to_bits(s, inst.universe));
    std::vector<std::vector<std::size_t>> covering(inst.universe);
    for (std::size_t i = 0; i < inst.sets.size(); ++i)
        for (int e : inst.sets[i]) covering[static_cast<std::size_t>(e)].push_back(i);
    for (auto& c : covering) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
    }

    auto best = greedy_cover(inst).chosen;
    std::vector<std::size_t> current;
    detail::Bits covered((inst.universe + 63) / 64, 0);

    auto search = [&](auto&& self, const detail::Bits& cov) -> void {
        if (current.size() + 1 >= best.size()) {
            // one more set could only tie; check whether we are already done
            bool done = true;
            for (std::size_t e = 0; e < inst.universe && done; ++e) done = detail::test(cov, e);
            if (done && current.size() < best.size()) best = current;
            return;
        }
        std::size_t pick = inst.universe;
        std::size_t fewest = static_cast<std::size_t>(-1);
        for (std::size_t e = 0; e < inst.universe; ++e) {
            if (detail::test(cov, e)) continue;
            if (covering[e].size() < fewest) {
                fewest = covering[e].size();
                pick = e;
            }
        }
        if (pick == inst.universe) {
            if (current.size() < best.size()) best = current;
            return;
        }
        for (std::size_t s : covering[pick]) {
            auto next = cov;
            detail::unite(next, bits[s]);
            current.push_back(s);
            self(self, next);
            current.pop_back();
        }
    };
    search(search, covered);
    std::sort(best.begin(), best.end());
    return {best, true};
}

/// Minimum cover with reductions (duplicate and dominated sets removed,
/// essential sets forced). Solved exactly when at most `exact_limit` candidate
/// sets remain, otherwise greedily and flagged as an upper bound.
inline CoverResult min_cover(const SetCoverInstance& inst, std::size_t exact_limit = 20)
{
    detail::check(inst);
    const std::size_t words = (inst.universe + 63) / 64;
    std::vector<detail::Bits> bits;
    for (const auto& s : inst.sets) bits.push_back(detail::to_bits(s, inst.universe));

    // dedupe identical sets, keeping the first index
    std::vector<std::size_t> alive;
    {
        std::map<detail::Bits, std::size_t> first;
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (first.emplace(bits[i], i).second) alive.push_back(i);
    }
    // drop sets strictly contained in another live set
    {
        std::vector<std::size_t> keep;
        for (std::size_t a : alive) {
            bool dominated = false;
            for (std::size_t b : alive)
                if (a != b && detail::subset_of(bits[a], bits[b])) {
                    dominated = true;
                    break;
                }
            if (!dominated) keep.push_back(a);
        }
        alive = std::move(keep);
    }
    // essential sets: sole cover of some element
    detail::Bits covered(words, 0);
    std::vector<std::size_t> forced;
    for (std::size_t e = 0; e < inst.universe; ++e) {
        std::size_t owner = 0;
        int n = 0;
        for (std::size_t s : alive)
            if (detail::test(bits[s], e)) {
                owner = s;
                if (++n > 1) break;
            }
        if (n == 1 && std::find(forced.begin(), forced.end(), owner) == forced.end()) forced.push_back(owner);
    }
    for (std::size_t s : forced) detail::unite(covered, bits[s]);

    // residual instance over uncovered elements and the remaining useful sets
    std::vector<std::size_t> rest_elems;
    for (std::size_t e = 0; e < inst.universe; ++e)
        if (!detail::test(covered, e)) rest_elems.push_back(e);
    CoverResult out;
    out.chosen = forced;
    out.exact = true;
    if (!rest_elems.empty()) {
        std::vector<std::size_t> map_back;
        SetCoverInstance sub;
        sub.universe = rest_elems.size();
        for (std::size_t s : alive) {
            if (std::find(forced.begin(), forced.end(), s) != forced.end()) continue;
            std::vector<int> part;
            for (std::size_t j = 0; j < rest_elems.size(); ++j)
                if (detail::test(bits[s], rest_elems[j])) part.push_back(static_cast<int>(j));
            if (part.empty()) continue;
            sub.sets.push_back(std::move(part));
            map_back.push_back(s);
        }
        const auto r = sub.sets.size() <= exact_limit ? exact_cover(sub) : greedy_cover(sub);
        out.exact = r.exact;
        for (std::size_t i : r.chosen) out.chosen.push_back(map_back[i]);
    }
    std::sort(out.chosen.begin(), out.chosen.end());
    return out;
}

/// Cover instance whose universe is the distinct ℓ-windows and whose sets are the
/// windows of each behavior.
inline SetCoverInstance cover_instance(const std::vector<abstraction::Behavior>& behaviors, int ell)
{
    if (behaviors.empty()) throw DomainError("complexity needs at least one behavior");
    const auto h = behaviors.front().word.size();
    std::map<abstraction::Word, int> ids;
    SetCoverInstance inst;
    for (const auto& b : behaviors) {
        if (b.word.size() != h) throw ShapeError("behaviors have mixed lengths");
        std::vector<int> set;
        for (const auto& w : abstraction::subsequences(b, ell)) {
            const auto [it, fresh] = ids.emplace(w.window, static_cast<int>(ids.size()));
            set.push_back(it->second);
        }
        std::sort(set.begin(), set.end());
        inst.sets.push_back(std::move(set));
    }
    inst.universe = ids.size();
    return inst;
}

struct Complexity {
    std::size_t s_star = 0;
    Method method = Method::exact;
};

/// Scenario complexity s*: the smallest number of sampled behaviors whose windows
/// regenerate the abstraction's state set.
inline Complexity complexity(const std::vector<abstraction::Behavior>& behaviors, int ell, std::size_t exact_limit = 20)
{
    const auto r = min_cover(cover_instance(behaviors, ell), exact_limit);
    return {r.size(), r.exact ? Method::exact : Method::greedy_upper_bound};
}

}  // namespace ellcharge::certificate
