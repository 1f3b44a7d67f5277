#pragma once

#include <algorithm>
#include <cstdint>
#include <fnmatch.h>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ellcharge/abstraction/abstraction.hpp"
#include "ellcharge/battery/labeling.hpp"

namespace ellcharge::verify {

using abstraction::Abstraction;
using abstraction::Alphabet;
using LabelSet = std::vector<bool>;  // indexed by symbol

/// Time-bounded reach-while-avoid specification over symbol indices.
struct RwaSpec {
    LabelSet goal;
    LabelSet safe;
    LabelSet init;
    int horizon = 1;

    void validate(std::size_t alphabet_size) const
    {
        if (goal.size() != alphabet_size || safe.size() != alphabet_size || init.size() != alphabet_size)
            throw ShapeError("spec predicates do not match the alphabet size");
        if (horizon < 0) throw DomainError("spec horizon must be nonnegative");
    }
    /// Goal symbols that are also safe; unsafe goal labels never count as reached.
    [[nodiscard]] bool reached(int y) const { return goal[static_cast<std::size_t>(y)] && safe[static_cast<std::size_t>(y)]; }
};

/// Symbols whose names match any of the shell-style patterns.
inline LabelSet match_globs(const Alphabet& a, const std::vector<std::string>& patterns)
{
    LabelSet out(a.size(), false);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (const auto& p : patterns)
            if (fnmatch(p.c_str(), a.symbol(static_cast<int>(i)).c_str(), 0) == 0) out[i] = true;
    return out;
}

/// Battery specification: goal = SOC symbol 't', safe = voltage and temperature 'a'.
inline RwaSpec battery_spec(int horizon)
{
    RwaSpec s;
    s.horizon = horizon;
    for (int i = 0; i < battery::OutputLabel::count; ++i) {
        const auto y = battery::OutputLabel::from_index(i);
        s.goal.push_back(y.goal());
        s.safe.push_back(y.safe());
        s.init.push_back(true);
    }
    return s;
}

inline nlohmann::json spec_to_json(const RwaSpec& s, const Alphabet& a)
{
    auto names = [&](const LabelSet& set) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < set.size(); ++i)
            if (set[i]) out.push_back(a.symbol(static_cast<int>(i)));
        return out;
    };
    return {{"schema_version", 1}, {"horizon", s.horizon}, {"goal", names(s.goal)}, {"safe", names(s.safe)},
            {"init", names(s.init)}};
}

/// Parses {schema_version, horizon, goal, safe, init}; entries are glob patterns.
inline RwaSpec spec_from_json(const nlohmann::json& j, const Alphabet& a)
{
    static const std::set<std::string> known{"schema_version", "horizon", "goal", "safe", "init"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ShapeError("unknown spec key '" + k + "'");
    if (j.value("schema_version", 0) != 1) throw ShapeError("spec schema_version must be 1");
    RwaSpec s;
    s.horizon = j.at("horizon").get<int>();
    s.goal = match_globs(a, j.at("goal").get<std::vector<std::string>>());
    s.safe = j.contains("safe") ? match_globs(a, j.at("safe").get<std::vector<std::string>>()) : LabelSet(a.size(), true);
    s.init = j.contains("init") ? match_globs(a, j.at("init").get<std::vector<std::string>>()) : LabelSet(a.size(), true);
    s.validate(a.size());
    return s;
}

struct VerificationResult {
    bool holds = false;
    int horizon = 0;
    std::vector<int> budget;  // minimal winning budget per state, -1 when losing
    std::vector<int> checked_initial;
    std::vector<int> counterexample_states;
    std::vector<std::uint64_t> counterexample_samples;

    [[nodiscard]] std::size_t n_winning() const
    {
        return static_cast<std::size_t>(std::count_if(budget.begin(), budget.end(), [](int b) { return b >= 0; }));
    }
};

namespace detail {

/// Minimal budgets of the universal bounded-reachability game. A state wins at
/// budget t if its output is in `target`, or if it is admissible, has a successor
/// and all successors win at t - 1.
inline std::vector<int> budgets(const Abstraction& abs, const std::vector<char>& target,
                                const std::vector<char>& admissible, int cap)
{
    const std::size_t n = abs.size();
    std::vector<int> b(n, -1);
    for (std::size_t s = 0; s < n; ++s)
        if (target[s]) b[s] = 0;
    for (int t = 1; t <= cap; ++t) {
        std::vector<int> fresh;
        for (std::size_t s = 0; s < n; ++s) {
            if (b[s] >= 0 || !admissible[s]) continue;
            const auto [lo, hi] = abs.successors(static_cast<int>(s));
            if (lo == hi) continue;
            bool all = true;
            for (int u = lo; u < hi && all; ++u) all = b[static_cast<std::size_t>(u)] >= 0;
            if (all) fresh.push_back(static_cast<int>(s));
        }
        if (fresh.empty()) break;
        for (int s : fresh) b[static_cast<std::size_t>(s)] = t;
    }
    return b;
}

}  // namespace detail

/// Backward induction over budgets 0..H on the nondeterministic abstraction.
inline VerificationResult rwa_check(const Abstraction& abs, const RwaSpec& spec)
{
    spec.validate(abs.alphabet_size());
    std::vector<char> target(abs.size());
    std::vector<char> admissible(abs.size());
    for (std::size_t s = 0; s < abs.size(); ++s) {
        const int y = abs.output(static_cast<int>(s));
        target[s] = spec.reached(y);
        admissible[s] = spec.safe[static_cast<std::size_t>(y)];
    }
    VerificationResult r;
    r.horizon = spec.horizon;
    r.budget = detail::budgets(abs, target, admissible, spec.horizon);
    std::set<std::uint64_t> ids;
    for (int s : abs.initial()) {
        if (!spec.init[static_cast<std::size_t>(abs.output(s))]) continue;
        r.checked_initial.push_back(s);
        if (r.budget[static_cast<std::size_t>(s)] < 0) {
            r.counterexample_states.push_back(s);
            const auto& p = abs.provenance(s);
            ids.insert(p.begin(), p.end());
        }
    }
    r.counterexample_samples.assign(ids.begin(), ids.end());
    r.holds = r.counterexample_states.empty();
    return r;
}

/// Smallest t <= cap such that every path from every initial state emits a target
/// symbol within t steps; nullopt when no such t exists.
inline std::optional<int> worst_case_hitting_time(const Abstraction& abs, const LabelSet& target, int cap)
{
    if (cap < 0) throw DomainError("hitting-time cap must be nonnegative");
    if (target.size() != abs.alphabet_size()) throw ShapeError("target set does not match the alphabet size");
    std::vector<char> tgt(abs.size());
    for (std::size_t s = 0; s < abs.size(); ++s) tgt[s] = target[static_cast<std::size_t>(abs.output(static_cast<int>(s)))];
    const auto b = detail::budgets(abs, tgt, std::vector<char>(abs.size(), 1), cap);
    int worst = 0;
    for (int s : abs.initial()) {
        if (b[static_cast<std::size_t>(s)] < 0) return std::nullopt;
        worst = std::max(worst, b[static_cast<std::size_t>(s)]);
    }
    return worst;
}

/// First index at which the word hits `target`, or nullopt.
inline std::optional<int> first_hit(const std::vector<int>& word, const LabelSet& target)
{
    for (std::size_t i = 0; i < word.size(); ++i)
        if (target[static_cast<std::size_t>(word[i])]) return static_cast<int>(i);
    return std::nullopt;
}

/// Direct RWA check of one label word: a safe goal symbol at some k <= H with all
/// earlier symbols safe.
inline bool trace_satisfies(const std::vector<int>& word, const RwaSpec& spec)
{
    const std::size_t last = std::min<std::size_t>(static_cast<std::size_t>(spec.horizon), word.size() - 1);
    for (std::size_t k = 0; k <= last && k < word.size(); ++k) {
        if (spec.reached(word[k])) return true;
        if (!spec.safe[static_cast<std::size_t>(word[k])]) return false;
    }
    return false;
}

/// Concrete sampled initial conditions behind failing initial states.
template <typename Registry>
auto extract_counterexamples(const VerificationResult& result, const Abstraction& abs, const Registry& registry)
{
    std::vector<typename Registry::mapped_type> out;
    if (result.holds) return out;
    std::set<std::uint64_t> ids;
    for (int s : result.counterexample_states) {
        const auto& p = abs.provenance(s);
        if (p.empty()) throw IntegrityError("failing initial state has no provenance");
        ids.insert(p.begin(), p.end());
    }
    for (auto id : ids) {
        const auto it = registry.find(id);
        if (it == registry.end()) throw IntegrityError("sample " + std::to_string(id) + " missing from the registry");
        out.push_back(it->second);
    }
    return out;
}

inline nlohmann::json to_json(const VerificationResult& r)
{
    std::map<int, int> hist;
    for (int b : r.budget)
        if (b >= 0) ++hist[b];
    nlohmann::json h = nlohmann::json::object();
    for (auto [b, n] : hist) h[std::to_string(b)] = n;
    return {{"schema_version", 1},
            {"kind", "ellcharge.verification"},
            {"holds", r.holds},
            {"horizon", r.horizon},
            {"n_initial", r.checked_initial.size()},
            {"n_winning", r.n_winning()},
            {"budgets_histogram", h},
            {"counterexample_states", r.counterexample_states},
            {"counterexample_sample_ids", r.counterexample_samples}};
}

}  // namespace ellcharge::verify
