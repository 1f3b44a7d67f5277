#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ellcharge/verify/rwa.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ellcharge;
using namespace ellcharge::verify;
using abstraction::build_salca;
using fixture::Y0;
using fixture::Y1;

namespace {

RwaSpec reach_y1(int horizon)
{
    RwaSpec s;
    s.goal = {false, true};
    s.safe = {true, true};
    s.init = {true, true};
    s.horizon = horizon;
    return s;
}

}  // namespace

TEST(Rwa, CoarseHalvingAbstractionFailsAtTheSelfLoop)
{
    const auto abs = build_salca(fixture::halving_behaviors(), 2, 2);
    const auto r = rwa_check(abs, reach_y1(4));
    EXPECT_FALSE(r.holds);
    ASSERT_EQ(r.counterexample_states.size(), 1U);
    EXPECT_EQ(abs.states()[static_cast<std::size_t>(r.counterexample_states[0])].window, (abstraction::Word{Y0, Y0}));
    EXPECT_EQ(r.counterexample_samples, (std::vector<std::uint64_t>{0}));
}

TEST(Rwa, FineHalvingAbstractionHolds)
{
    const auto abs = build_salca(fixture::halving_behaviors(), 3, 2);
    const auto r = rwa_check(abs, reach_y1(4));
    EXPECT_TRUE(r.holds);
    EXPECT_EQ(r.budget[static_cast<std::size_t>(abs.find({Y1, Y1, Y1}))], 0);
    EXPECT_EQ(r.budget[static_cast<std::size_t>(abs.find({Y0, Y1, Y1}))], 1);
    EXPECT_EQ(r.budget[static_cast<std::size_t>(abs.find({Y0, Y0, Y1}))], 2);
    EXPECT_FALSE(rwa_check(abs, reach_y1(1)).holds);
    EXPECT_TRUE(rwa_check(abs, reach_y1(2)).holds);
}

TEST(Rwa, UnsafeGoalSymbolsDoNotCount)
{
    const auto abs = build_salca(fixture::halving_behaviors(), 3, 2);
    auto spec = reach_y1(4);
    spec.safe = {true, false};
    const auto r = rwa_check(abs, spec);
    EXPECT_FALSE(r.holds);
    EXPECT_EQ(r.n_winning(), 0U);
}

TEST(Rwa, HorizonZeroAndNoGoal)
{
    const auto abs = build_salca(fixture::halving_behaviors(), 3, 2);
    auto spec = reach_y1(0);
    const auto r = rwa_check(abs, spec);
    EXPECT_EQ(r.counterexample_states.size(), 2U);  // y0y0y1 and y0y1y1
    spec.goal = {false, false};
    spec.horizon = 10;
    EXPECT_EQ(rwa_check(abs, spec).n_winning(), 0U);
}

TEST(Hitting, Examples)
{
    const auto fine = build_salca(fixture::halving_behaviors(), 3, 2);
    EXPECT_EQ(worst_case_hitting_time(fine, {false, true}, 10), 2);
    EXPECT_EQ(worst_case_hitting_time(fine, {true, true}, 10), 0);
    const auto coarse = build_salca(fixture::halving_behaviors(), 2, 2);
    EXPECT_EQ(worst_case_hitting_time(coarse, {false, true}, 50), std::nullopt);
    EXPECT_EQ(worst_case_hitting_time(fine, {false, true}, 1), std::nullopt);
    EXPECT_THROW(worst_case_hitting_time(fine, {true}, 3), ShapeError);
}

TEST(Rwa, RandomAbstractionsAgainstPathEnumeration)
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const int alphabet = std::uniform_int_distribution<int>(1, 3)(rng);
        const int ell = std::uniform_int_distribution<int>(2, 3)(rng);
        const auto abs = oracle::random_abstraction(rng, 12, ell, alphabet);
        RwaSpec spec;
        spec.goal = oracle::random_labels(rng, alphabet, 0.4);
        spec.safe = oracle::random_labels(rng, alphabet, 0.8);
        spec.init = oracle::random_labels(rng, alphabet, 0.8);
        spec.horizon = std::uniform_int_distribution<int>(0, 8)(rng);
        const auto r = rwa_check(abs, spec);
        const auto truth = oracle::rwa_budgets(abs, spec);
        EXPECT_EQ(r.budget, truth);
        bool holds = true;
        for (int s : abs.initial())
            if (spec.init[static_cast<std::size_t>(abs.output(s))] && truth[static_cast<std::size_t>(s)] < 0) holds = false;
        EXPECT_EQ(r.holds, holds);

        const auto target = oracle::random_labels(rng, alphabet, 0.5);
        const int cap = std::uniform_int_distribution<int>(0, 8)(rng);
        EXPECT_EQ(worst_case_hitting_time(abs, target, cap), oracle::hitting_time(abs, target, cap));
    }
}

TEST(Rwa, TraceReplay)
{
    auto spec = reach_y1(2);
    EXPECT_TRUE(trace_satisfies({Y0, Y0, Y1, Y1}, spec));
    spec.horizon = 1;
    EXPECT_FALSE(trace_satisfies({Y0, Y0, Y1, Y1}, spec));
    spec.horizon = 3;
    spec.safe = {false, true};
    EXPECT_FALSE(trace_satisfies({Y0, Y1}, spec));
    EXPECT_TRUE(trace_satisfies({Y1, Y0}, spec));
    EXPECT_EQ(first_hit({Y0, Y0, Y1}, {false, true}), 2);
    EXPECT_EQ(first_hit({Y0, Y0}, {false, true}), std::nullopt);
}

TEST(Counterexamples, ProvenanceLookup)
{
    // Samples 7 and 19 start in the losing window y0y0.
    std::vector<abstraction::Behavior> bs{{{Y0, Y0, Y1, Y1}, 7}, {{Y0, Y0, Y1, Y1}, 19}, {{Y0, Y1, Y1, Y1}, 3},
                                          {{Y1, Y1, Y1, Y1}, 4}};
    const auto abs = build_salca(bs, 2, 2);
    const auto r = rwa_check(abs, reach_y1(4));
    std::map<std::uint64_t, std::string> registry{{7, "a"}, {19, "b"}, {3, "c"}, {4, "d"}};
    EXPECT_EQ(extract_counterexamples(r, abs, registry), (std::vector<std::string>{"a", "b"}));
    registry.erase(19);
    EXPECT_THROW(extract_counterexamples(r, abs, registry), IntegrityError);
    EXPECT_TRUE(extract_counterexamples(rwa_check(abs, reach_y1(0)), abs, std::map<std::uint64_t, int>{{7, 0}, {19, 0}, {3, 0}}).size() == 3);
}

TEST(Counterexamples, ExactOnDeterministicInjectiveSystems)
{
    // With one symbol per state, windows determine the concrete trajectory, so the
    // extracted set equals the set of samples whose own word violates the specification.
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 6)(rng);
        oracle::DetSystem sys;
        sys.symbols = n;
        for (int i = 0; i < n; ++i) {
            sys.next.push_back(static_cast<int>(rng() % static_cast<unsigned>(n)));
            sys.out.push_back(i);
        }
        const int h = 10;
        const int ell = 2;
        std::vector<abstraction::Behavior> bs;
        std::map<std::uint64_t, abstraction::Word> registry;
        for (std::uint64_t i = 0; i < 40; ++i) {
            bs.push_back({sys.behavior(static_cast<int>(rng() % static_cast<unsigned>(n)), h), i});
            registry[i] = bs.back().word;
        }
        RwaSpec spec;
        spec.goal = oracle::random_labels(rng, n, 0.3);
        spec.safe = oracle::random_labels(rng, n, 0.8);
        spec.init.assign(static_cast<std::size_t>(n), true);
        spec.horizon = std::uniform_int_distribution<int>(0, h - ell)(rng);
        const auto abs = build_salca(bs, ell, static_cast<std::size_t>(n));
        const auto r = rwa_check(abs, spec);
        std::set<std::uint64_t> violating;
        for (const auto& b : bs)
            if (!trace_satisfies(b.word, spec)) violating.insert(b.source_id);
        EXPECT_EQ(std::set<std::uint64_t>(r.counterexample_samples.begin(), r.counterexample_samples.end()), violating);
        EXPECT_EQ(r.holds, violating.empty());
    }
}

TEST(SpecJson, GlobsAndRoundTrip)
{
    const abstraction::Alphabet a(battery::label_names());
    const auto spec = battery_spec(80);
    const auto back = spec_from_json(spec_to_json(spec, a), a);
    EXPECT_EQ(back.goal, spec.goal);
    EXPECT_EQ(back.safe, spec.safe);
    EXPECT_EQ(back.horizon, 80);
    const auto g = match_globs(a, {"t??"});
    EXPECT_EQ(std::count(g.begin(), g.end(), true), 4);
    EXPECT_EQ(match_globs(a, {"[g-t]??"}), match_globs(a, {"[g-t]*"}));
    EXPECT_THROW(spec_from_json({{"schema_version", 2}, {"horizon", 3}, {"goal", {"t*"}}}, a), ShapeError);
    EXPECT_THROW(spec_from_json({{"schema_version", 1}, {"horizon", 3}, {"goal", {"t*"}}, {"extra", 1}}, a), ShapeError);
}
