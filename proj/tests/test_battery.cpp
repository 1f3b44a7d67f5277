#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "ellcharge/battery/dynamics.hpp"
#include "ellcharge/battery/labeling.hpp"
#include "ellcharge/battery/sampling.hpp"

using namespace ellcharge;
using namespace ellcharge::battery;

namespace {

CellState run_constant(const CellParameters& p, CellState s, double current, int steps, double dt)
{
    Envelope env;
    env.soc_goal = 1.1;  // never terminate on SOC
    env.v_max = 10.0;
    env.t_max_c = 200.0;
    for (int i = 0; i < steps; ++i) s = step(s, p, current, dt, env);
    return s;
}

OutputMeasurement at(double soc, double volt, double temp_c)
{
    OutputMeasurement z;
    z.soc = soc;
    z.volt = volt;
    z.temp = to_kelvin(temp_c);
    return z;
}

}  // namespace

TEST(Dynamics, ZeroCurrentAtEquilibriumIsStationary)
{
    auto [p, s] = make_standard_cell(0.5, 25.0);
    const auto next = step(s, p, 0.0, 15.0);
    EXPECT_NEAR(next.soc, s.soc, 1e-12);
    EXPECT_NEAR(next.temp, s.temp, 1e-12);
    EXPECT_EQ(next.q_loss, s.q_loss);
    EXPECT_NEAR(measure(next, p).volt, p.rest_ocv(0.5), 1e-9);
}

TEST(Dynamics, RestTemperatureDecaysTowardAmbient)
{
    auto [p, s] = make_standard_cell(0.5, 25.0);
    s.temp = p.t_amb + 10.0;
    const auto next = step(s, p, 0.0, 15.0);
    EXPECT_GT(next.temp, p.t_amb);
    EXPECT_LT(next.temp, p.t_amb + 10.0);
}

TEST(Dynamics, RestTemperatureContractsFromBothSides)
{
    for (double offset : {-8.0, -1.0, 3.0, 12.0}) {
        auto [p, s] = make_standard_cell(0.4, 25.0);
        s.temp = p.t_amb + offset;
        double gap = std::abs(offset);
        for (int i = 0; i < 40; ++i) {
            s = step(s, p, 0.0, 15.0);
            const double now = std::abs(s.temp - p.t_amb);
            EXPECT_LE(now, gap + 1e-12) << "offset " << offset << " step " << i;
            gap = now;
        }
    }
}

TEST(Dynamics, CoulombCountingMatchesIntegratedCurrent)
{
    // 1.5 A for 100 x 15 s moves 0.625 Ah into a 1.5 Ah cell.
    struct Case {
        double current;
        int steps;
    };
    for (auto c : {Case{1.5, 100}, Case{5.0, 20}}) {
        auto [p, s] = make_standard_cell(0.2, 25.0);
        const auto end = run_constant(p, s, c.current, c.steps, 15.0);
        const double charge_ah = c.current * c.steps * 15.0 / 3600.0;
        const double expected = charge_ah / p.q_eff();
        EXPECT_NEAR((end.soc - s.soc) / expected, 1.0, 0.005) << c.current << " A";
    }
}

TEST(Dynamics, AgeingIsMonotoneUnderCharging)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> amp(0.0, 10.0);
    for (int r = 0; r < 10; ++r) {
        auto [p, s] = sample_cell(1000 + static_cast<std::uint64_t>(r));
        Envelope env;
        for (int k = 0; k < 60 && s.terminal == Terminal::running; ++k) {
            const auto next = step(s, p, amp(rng), 15.0, env);
            EXPECT_GE(next.q_loss, s.q_loss);
            EXPECT_GE(next.delta_sei, s.delta_sei);
            s = next;
        }
    }
}

TEST(Dynamics, HalvingTheControlIntervalChangesLittle)
{
    auto [p, s] = make_standard_cell(0.2, 25.0);
    const auto coarse = run_constant(p, s, 3.0, 40, 15.0);
    const auto fine = run_constant(p, s, 3.0, 80, 7.5);
    EXPECT_NEAR(fine.soc / coarse.soc, 1.0, 0.01);
    EXPECT_NEAR(to_celsius(fine.temp) / to_celsius(coarse.temp), 1.0, 0.01);
    EXPECT_NEAR(fine.q_loss / coarse.q_loss, 1.0, 0.01);
}

TEST(Dynamics, CurrentOutsideRangeIsRejected)
{
    auto [p, s] = make_standard_cell(0.5, 25.0);
    EXPECT_THROW(step(s, p, -0.1, 15.0), DomainError);
    EXPECT_THROW(step(s, p, p.i_max + 1e-6, 15.0), DomainError);
    EXPECT_THROW(step(s, p, std::nan(""), 15.0), DomainError);
}

TEST(Dynamics, NonFiniteIntegrationNamesTheField)
{
    auto [p, s] = make_standard_cell(0.5, 25.0);
    p.r_th = 0.0;  // 0/0 in the thermal balance at ambient temperature
    try {
        (void)step(s, p, 0.0, 15.0);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        EXPECT_EQ(e.field(), "temp");
    }
}

TEST(Measure, RestVoltageAndSeiDrop)
{
    auto [p, s] = make_standard_cell(0.5, 25.0);
    const double soc_37 = soc_from_rest_voltage(p, 3.7);
    const auto rest = rest_state(p, soc_37, 25.0);
    EXPECT_NEAR(measure(rest, p).volt, 3.7, 1e-9);

    auto a = rest;
    a.i_prev = 2.0;
    auto b = a;
    b.delta_sei += 1e-8;
    const double expected = 2.0 / p.electrode_area * p.r_sei_per_m * 1e-8;
    EXPECT_NEAR(measure(b, p).volt - measure(a, p).volt, expected, 1e-12);

    a.k = 17;
    EXPECT_EQ(measure(a, p).k, 17);
}

TEST(Measure, OcvWindowCoversOperatingRange)
{
    const auto p = make_parameters({}, 1.0);
    EXPECT_LE(p.rest_ocv(0.0), 3.0);
    EXPECT_GE(p.rest_ocv(1.0), 4.2);
    for (double soc = 0.0; soc < 1.0; soc += 0.01) EXPECT_LT(p.rest_ocv(soc), p.rest_ocv(soc + 0.01));
}

TEST(Ocv, DataFilesMatchBuiltInCurves)
{
    const auto neg = OcvCurve::load(std::string(ELLCHARGE_DATA_DIR) + "/ocv_negative.txt");
    const auto pos = OcvCurve::load(std::string(ELLCHARGE_DATA_DIR) + "/ocv_positive.txt");
    for (double x = 0.0; x <= 1.0; x += 0.013) EXPECT_NEAR(neg(x), (*default_ocv_negative())(x), 1e-12);
    for (double x = 0.2; x <= 1.0; x += 0.011) EXPECT_NEAR(pos(x), (*default_ocv_positive())(x), 1e-12);
}

TEST(Ocv, MalformedTablesAreRejected)
{
    EXPECT_THROW(OcvCurve({0.0}, {1.0}), DomainError);
    EXPECT_THROW(OcvCurve({0.0, 0.0}, {1.0, 2.0}), DomainError);
    EXPECT_THROW(OcvCurve({0.0, 1.0}, {1.0, std::numeric_limits<double>::infinity()}), DomainError);
}

TEST(Labeling, Examples)
{
    EXPECT_EQ(label(at(0.95, 4.25, 30.0)).str(), "tba");
    EXPECT_EQ(label(at(0.90, 4.0, 30.0)).str(), "taa");
    EXPECT_EQ(label(at(0.90 - 1e-9, 4.0, 30.0)).str(), "saa");
    EXPECT_EQ(label(at(0.0, 3.0, 45.0)).str(), "aaa");
    EXPECT_EQ(label(at(0.5, 4.2, 45.0 + 1e-9)).str().substr(1), "ab");
}

TEST(Labeling, SocBinsAreLeftClosed)
{
    const double width = 0.9 / 19.0;
    for (int b = 0; b < 19; ++b) {
        const auto y = label(at(b * width + 1e-12, 3.7, 25.0));
        EXPECT_EQ(y.soc_sym, b);
    }
    EXPECT_EQ(label_names().size(), 80U);
    for (int i = 0; i < OutputLabel::count; ++i) EXPECT_EQ(OutputLabel::from_index(i).index(), i);
}

TEST(Sampling, DeterministicInSeed)
{
    const auto [p1, s1] = sample_cell(42);
    const auto [p2, s2] = sample_cell(42);
    EXPECT_TRUE(p1 == p2);
    EXPECT_EQ(s1.c_n, s2.c_n);
    EXPECT_EQ(s1.temp, s2.temp);
    const auto [p3, s3] = sample_cell(43);
    EXPECT_FALSE(p1 == p3);
}

TEST(Sampling, QualityScalersCentredOnOne)
{
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto [p, s] = sample_cell(static_cast<std::uint64_t>(i));
        EXPECT_GE(p.d_scale_n, 0.9);
        EXPECT_LE(p.d_scale_n, 1.1);
        sum += p.d_scale_n;
    }
    EXPECT_GE(sum / n, 0.995);
    EXPECT_LE(sum / n, 1.005);
}

TEST(Sampling, InitialOutputsInsideTheBox)
{
    InitialBox box{3.1, 3.4, 20.0, 22.0};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto [p, s] = sample_cell(seed, {box, {}});
        const auto z = measure(s, p);
        EXPECT_GE(z.volt, box.v_lo - 1e-9);
        EXPECT_LE(z.volt, box.v_hi + 1e-9);
        EXPECT_GE(z.temp_c(), box.t_lo_c - 1e-9);
        EXPECT_LE(z.temp_c(), box.t_hi_c + 1e-9);
        EXPECT_DOUBLE_EQ(p.t_amb, s.temp);
    }
}

TEST(Sampling, PristineHealthGivesPristineSei)
{
    const auto [p, s] = sample_cell(5, {{}, 1.0});
    EXPECT_DOUBLE_EQ(p.soh, 1.0);
    EXPECT_DOUBLE_EQ(p.delta_sei_init, constants::delta_sei_pristine);
    EXPECT_DOUBLE_EQ(s.delta_sei, constants::delta_sei_pristine);
    const auto [q, t] = sample_cell(5, {{}, 0.9});
    EXPECT_GT(q.delta_sei_init, constants::delta_sei_pristine);
}

TEST(Sampling, OutOfRangeParametersAreRejected)
{
    EXPECT_THROW(make_parameters({}, 0.8), DomainError);
    Quality bad;
    bad.h_scale = 1.2;
    EXPECT_THROW(make_parameters(bad, 1.0), DomainError);
    const auto p = make_parameters({}, 1.0);
    EXPECT_THROW(soc_from_rest_voltage(p, 5.0), SamplingError);
}
