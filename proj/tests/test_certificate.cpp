#include <random>

#include <gtest/gtest.h>

#include "ellcharge/certificate/certificate.hpp"
#include "epsilon_oracle.hpp"
#include "oracles.hpp"

using namespace ellcharge;
using namespace ellcharge::certificate;

TEST(Epsilon, MatchesHighPrecisionRoot)
{
    struct Case {
        std::int64_t n, k;
        double beta;
    };
    for (auto c : {Case{100, 5, 1e-3}, Case{2000, 10, 1e-6}, Case{500, 0, 1e-2}, Case{50, 49, 1e-6},
                   Case{100000, 13, 1e-6}}) {
        const double ref = oracle::epsilon_reference(c.n, c.k, c.beta);
        EXPECT_NEAR(epsilon(c.n, c.k, c.beta) / ref, 1.0, 1e-6) << c.n << ' ' << c.k;
    }
}

TEST(Epsilon, ScenarioValue)
{
    const double e = epsilon(100000, 13, 1e-6);
    EXPECT_GE(e, 4.39e-4);
    EXPECT_LE(e, 4.49e-4);
}

TEST(Epsilon, Monotonicity)
{
    for (std::int64_t k = 0; k < 30; ++k) EXPECT_LT(epsilon(1000, k, 1e-6), epsilon(1000, k + 1, 1e-6));
    for (std::int64_t n : {100, 1000, 10000}) EXPECT_GT(epsilon(n, 5, 1e-6), epsilon(n * 2, 5, 1e-6));
    EXPECT_LT(epsilon(1000, 5, 1e-2), epsilon(1000, 5, 1e-6));
}

TEST(Epsilon, Edges)
{
    EXPECT_EQ(epsilon(10, 10, 1e-6), 1.0);
    EXPECT_THROW(epsilon(10, 11, 1e-6), DomainError);
    EXPECT_THROW(epsilon(0, 0, 1e-6), DomainError);
    EXPECT_THROW(epsilon(10, 2, 0.0), DomainError);
    EXPECT_THROW(epsilon(10, 2, 1.0), DomainError);
}

TEST(SetCover, SmallExample)
{
    const SetCoverInstance inst{3, {{0, 1}, {1, 2}, {0, 2}}};
    EXPECT_EQ(exact_cover(inst).size(), 2U);
    EXPECT_GE(greedy_cover(inst).size(), 2U);
    EXPECT_EQ(min_cover(inst).size(), 2U);
}

TEST(SetCover, RandomInstancesAgainstExhaustiveSearch)
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const auto m = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 12)(rng));
        const auto u = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 20)(rng));
        SetCoverInstance inst{u, std::vector<std::vector<int>>(m)};
        std::bernoulli_distribution coin(0.3);
        for (std::size_t e = 0; e < u; ++e) {
            bool placed = false;
            for (auto& s : inst.sets)
                if (coin(rng)) {
                    s.push_back(static_cast<int>(e));
                    placed = true;
                }
            if (!placed) inst.sets[rng() % m].push_back(static_cast<int>(e));
        }
        const auto truth = oracle::exhaustive_cover(u, inst.sets);
        const auto exact = exact_cover(inst);
        EXPECT_EQ(exact.size(), truth);
        EXPECT_TRUE(exact.exact);
        EXPECT_GE(greedy_cover(inst).size(), truth);
        std::vector<char> seen(u, 0);
        for (auto i : exact.chosen)
            for (int e : inst.sets[i]) seen[static_cast<std::size_t>(e)] = 1;
        EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](char c) { return c; }));
    }
}

TEST(Complexity, ThirteenDistinctTrajectoriesAmongManyDuplicates)
{
    // 13 behaviors over disjoint symbol blocks with 166 distinct 2-windows in total,
    // repeated to 10^5 samples.
    std::vector<abstraction::Behavior> base;
    for (int i = 0; i < 12; ++i) {
        abstraction::Word w;
        for (int k = 0; k < 14; ++k) w.push_back(i * 14 + k);
        base.push_back({w, 0});
    }
    abstraction::Word last;
    for (int k = 0; k < 14; ++k) last.push_back(12 * 14 + std::min(k, 9));
    base.push_back({last, 0});

    std::vector<abstraction::Behavior> all;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        all.push_back(base[i % base.size()]);
        all.back().source_id = i;
    }
    EXPECT_EQ(cover_instance(all, 2).universe, 166U);
    const auto c = complexity(all, 2);
    EXPECT_EQ(c.s_star, 13U);
    const auto cert = make_certificate(100000, 2, 14, 1e-6, c);
    EXPECT_GE(cert.epsilon, 4.39e-4);
    EXPECT_LE(cert.epsilon, 4.49e-4);
}

TEST(Complexity, SingleBehaviorAndMixedLengths)
{
    EXPECT_EQ(complexity({{{0, 1, 0, 1}, 0}}, 2).s_star, 1U);
    EXPECT_EQ(complexity({{{0, 1, 0, 1}, 0}, {{0, 1, 0, 1}, 1}}, 2).s_star, 1U);
    EXPECT_THROW(complexity({{{0, 1, 0}, 0}, {{0, 1}, 1}}, 2), ShapeError);
    EXPECT_THROW(complexity({}, 2), DomainError);
}

TEST(Certificate, ConsistencyAndJson)
{
    const auto cert = make_certificate(2000, 4, 80, 1e-6, {7, Method::exact}, "abc", "def");
    EXPECT_TRUE(cert.consistent());
    const auto back = certificate_from_json(nlohmann::json::parse(to_json(cert).dump()));
    EXPECT_EQ(back.n_samples, 2000);
    EXPECT_EQ(back.s_star, 7);
    EXPECT_EQ(back.method, Method::exact);
    EXPECT_DOUBLE_EQ(back.epsilon, cert.epsilon);
    EXPECT_EQ(back.abstraction_hash, "abc");
    EXPECT_TRUE(back.consistent());

    auto tampered = back;
    tampered.epsilon *= 0.5;
    EXPECT_FALSE(tampered.consistent());
    EXPECT_THROW(certificate_from_json({{"kind", "other"}}), ShapeError);
}
