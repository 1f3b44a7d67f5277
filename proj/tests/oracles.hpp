#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// They are deliberately naive: explicit path enumeration, exhaustive subsets and
// high-precision root finding.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "ellcharge/abstraction/abstraction.hpp"
#include "ellcharge/verify/rwa.hpp"

namespace oracle {

using ellcharge::abstraction::Abstraction;
using ellcharge::abstraction::Behavior;
using ellcharge::abstraction::EllSequence;
using ellcharge::abstraction::Word;

inline constexpr int never = std::numeric_limits<int>::max();

/// Visits every path of at most `max_len` states starting at `s`. A path ends
/// early when `stop(state, depth)` says so or when the state has no successor.
inline void for_each_path(const Abstraction& abs, int s, int max_len,
                          const std::function<bool(int, int)>& stop,
                          const std::function<void(const std::vector<int>&)>& visit)
{
    std::vector<int> path{s};
    std::function<void()> rec = [&]() {
        const int cur = path.back();
        const int depth = static_cast<int>(path.size()) - 1;
        const auto [lo, hi] = abs.successors(cur);
        if (stop(cur, depth) || static_cast<int>(path.size()) == max_len || lo == hi) {
            visit(path);
            return;
        }
        for (int u = lo; u < hi; ++u) {
            path.push_back(u);
            rec();
            path.pop_back();
        }
    };
    rec();
}

/// Worst-case step at which a path from `s` reaches a state whose output satisfies
/// `hit`, while every earlier state satisfies `ok`; `never` when some path fails
/// within `horizon` steps.
inline int worst_hit(const Abstraction& abs, int s, int horizon, const std::function<bool(int)>& hit,
                     const std::function<bool(int)>& ok)
{
    int worst = 0;
    bool fail = false;
    for_each_path(
        abs, s, horizon + 1,
        [&](int st, int) { return hit(abs.output(st)) || !ok(abs.output(st)); },
        [&](const std::vector<int>& path) {
            int at = never;
            for (std::size_t k = 0; k < path.size(); ++k) {
                const int y = abs.output(path[k]);
                if (hit(y)) {
                    at = static_cast<int>(k);
                    break;
                }
                if (!ok(y)) break;
            }
            if (at == never) fail = true;
            else worst = std::max(worst, at);
        });
    return fail ? never : worst;
}

/// Per-state minimal budget for the reach-while-avoid game, -1 when losing.
inline std::vector<int> rwa_budgets(const Abstraction& abs, const ellcharge::verify::RwaSpec& spec)
{
    std::vector<int> out(abs.size(), -1);
    for (std::size_t s = 0; s < abs.size(); ++s) {
        const int w = worst_hit(
            abs, static_cast<int>(s), spec.horizon, [&](int y) { return spec.reached(y); },
            [&](int y) { return spec.safe[static_cast<std::size_t>(y)]; });
        if (w != never) out[s] = w;
    }
    return out;
}

inline std::optional<int> hitting_time(const Abstraction& abs, const ellcharge::verify::LabelSet& target, int cap)
{
    int worst = 0;
    for (int s : abs.initial()) {
        const int w = worst_hit(
            abs, s, cap, [&](int y) { return target[static_cast<std::size_t>(y)]; }, [](int) { return true; });
        if (w == never) return std::nullopt;
        worst = std::max(worst, w);
    }
    return worst;
}

/// Finite deterministic system x' = f(x) with output h(x).
struct DetSystem {
    std::vector<int> next;
    std::vector<int> out;
    int symbols = 1;

    [[nodiscard]] Word behavior(int x, int horizon) const
    {
        Word w;
        for (int i = 0; i < horizon; ++i) {
            w.push_back(out[static_cast<std::size_t>(x)]);
            x = next[static_cast<std::size_t>(x)];
        }
        return w;
    }
};

inline DetSystem random_system(std::mt19937_64& rng, int max_states, int max_symbols, int min_states = 1,
                               int min_symbols = 1)
{
    DetSystem s;
    const int n = std::uniform_int_distribution<int>(min_states, max_states)(rng);
    s.symbols = std::uniform_int_distribution<int>(min_symbols, max_symbols)(rng);
    std::uniform_int_distribution<int> st(0, n - 1);
    std::uniform_int_distribution<int> sy(0, s.symbols - 1);
    for (int i = 0; i < n; ++i) {
        s.next.push_back(st(rng));
        s.out.push_back(sy(rng));
    }
    return s;
}

/// Random abstraction over a small alphabet: a random subset of all windows with
/// random initial states and provenance ids equal to the state index.
inline Abstraction random_abstraction(std::mt19937_64& rng, int max_states, int ell, int alphabet, int min_states = 1)
{
    std::vector<EllSequence> all;
    const int total = [&] {
        int t = 1;
        for (int i = 0; i < ell; ++i) t *= alphabet;
        return t;
    }();
    for (int k = 0; k < total; ++k) {
        Word w(static_cast<std::size_t>(ell));
        int r = k;
        for (int i = ell - 1; i >= 0; --i) {
            w[static_cast<std::size_t>(i)] = r % alphabet;
            r /= alphabet;
        }
        all.push_back({w});
    }
    std::shuffle(all.begin(), all.end(), rng);
    const int n = std::uniform_int_distribution<int>(std::min(min_states, total), std::min(max_states, total))(rng);
    all.resize(static_cast<std::size_t>(n));
    std::vector<EllSequence> init;
    std::map<EllSequence, std::vector<std::uint64_t>> prov;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < all.size(); ++i)
        if (coin(rng) || init.empty()) {
            init.push_back(all[i]);
            prov[all[i]] = {static_cast<std::uint64_t>(i)};
        }
    return Abstraction::from_parts(ell, static_cast<std::size_t>(alphabet), all, init, prov);
}

inline ellcharge::verify::LabelSet random_labels(std::mt19937_64& rng, int alphabet, double p)
{
    std::bernoulli_distribution coin(p);
    ellcharge::verify::LabelSet s(static_cast<std::size_t>(alphabet));
    for (auto&& b : s) b = coin(rng);
    return s;
}

/// Minimum cover size over every subset of the sets.
inline std::size_t exhaustive_cover(std::size_t universe, const std::vector<std::vector<int>>& sets)
{
    const std::size_t m = sets.size();
    std::size_t best = m + 1;
    for (std::uint32_t mask = 0; mask < (1U << m); ++mask) {
        const auto k = static_cast<std::size_t>(__builtin_popcount(mask));
        if (k >= best) continue;
        std::vector<char> seen(universe, 0);
        for (std::size_t i = 0; i < m; ++i)
            if (mask >> i & 1U)
                for (int e : sets[i]) seen[static_cast<std::size_t>(e)] = 1;
        if (std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; })) best = k;
    }
    return best;
}

/// Halving map on [0, 1] with y0 on (1/4, 1] and y1 elsewhere; symbol 0 is y0.
inline Word halving_behavior(double x, int horizon)
{
    Word w;
    for (int i = 0; i < horizon; ++i) {
        w.push_back(x > 0.25 ? 0 : 1);
        x *= 0.5;
    }
    return w;
}

}  // namespace oracle
