#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>

#include "ellcharge/battery/dynamics.hpp"

namespace ellcharge::battery {

/// Axis-aligned box of initial output measurements (V, degC).
struct InitialBox {
    double v_lo = 2.8;
    double v_hi = 4.0;
    double t_lo_c = 17.0;
    double t_hi_c = 32.0;

    friend bool operator==(const InitialBox&, const InitialBox&) = default;
};

struct Quality {
    double d_scale_n = 1.0;
    double d_scale_p = 1.0;
    double brugg_scale_n = 1.0;
    double brugg_scale_p = 1.0;
    double h_scale = 1.0;
};

/// SEI thickness that accounts for the lithium lost from a pristine cell, with the
/// lost charge spread uniformly over the negative-electrode interface.
inline double initial_sei_thickness(const CellParameters& p)
{
    using namespace constants;
    const double q_now = p.soh * p.q_nom;  // Ah
    const double lost_mol = q_now * (1.0 - p.soh) * 3600.0 / faraday / sei_electrons;
    return delta_sei_pristine + lost_mol * p.v_bar_sei / p.electrode_area;
}

/// Inverts the rest OCV relation by bisection on SOC.
inline double soc_from_rest_voltage(const CellParameters& p, double volt)
{
    double lo = 0.0;
    double hi = 1.0;
    if (volt < p.rest_ocv(lo) || volt > p.rest_ocv(hi))
        throw SamplingError("rest voltage outside the OCV range of the cell");
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        (p.rest_ocv(mid) < volt ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Cell at rest with uniform concentration profiles at `soc`.
inline CellState rest_state(const CellParameters& p, double soc, double temp_c)
{
    CellState s;
    s.c_n.assign(static_cast<std::size_t>(p.n_radial), p.theta_n(soc) * p.c_max_n);
    s.c_p.assign(static_cast<std::size_t>(p.n_radial), p.theta_p(soc) * p.c_max_p);
    s.temp = to_kelvin(temp_c);
    s.delta_sei = p.delta_sei_init;
    s.soc = soc_from_profile(s, p);
    return s;
}

/// Parameters for a given quality and SOH with everything else nominal. Ambient
/// temperature is set to the initial cell temperature.
inline CellParameters make_parameters(const Quality& q, double soh, double t_amb_c = 25.0)
{
    CellParameters p;
    p.d_scale_n = q.d_scale_n;
    p.d_scale_p = q.d_scale_p;
    p.brugg_scale_n = q.brugg_scale_n;
    p.brugg_scale_p = q.brugg_scale_p;
    p.h_scale = q.h_scale;
    p.soh = soh;
    p.t_plus = soh * constants::t_plus_nominal;
    p.delta_sei_init = initial_sei_thickness(p);
    p.t_amb = to_kelvin(t_amb_c);
    p.validate();
    return p;
}

/// Pristine cell of nominal quality at the given SOC and temperature.
inline std::pair<CellParameters, CellState> make_standard_cell(double soc = 0.01, double temp_c = 25.0)
{
    auto p = make_parameters({}, 1.0, temp_c);
    auto s = rest_state(p, soc, temp_c);
    return {std::move(p), std::move(s)};
}

struct SamplingOptions {
    InitialBox box{};
    std::optional<double> soh;  // forces the SOH instead of drawing it
};

namespace detail {
inline double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi)
{
    std::normal_distribution<double> dist(mean, sd);
    for (;;) {
        const double x = dist(rng);
        if (x >= lo && x <= hi) return x;
    }
}
}  // namespace detail

/// Draws one random cell: quality scalers from N(1, 0.03) truncated to [0.9, 1.1],
/// SOH uniform on [0.85, 1], and the initial (V, T) uniform on the box. Pure in the
/// seed.
inline std::pair<CellParameters, CellState> sample_cell(std::uint64_t seed, const SamplingOptions& opt = {})
{
    std::mt19937_64 rng(seed);
    Quality q;
    q.h_scale = detail::truncated_normal(rng, 1.0, 0.03, 0.9, 1.1);
    q.d_scale_n = detail::truncated_normal(rng, 1.0, 0.03, 0.9, 1.1);
    q.d_scale_p = detail::truncated_normal(rng, 1.0, 0.03, 0.9, 1.1);
    q.brugg_scale_n = detail::truncated_normal(rng, 1.0, 0.03, 0.9, 1.1);
    q.brugg_scale_p = detail::truncated_normal(rng, 1.0, 0.03, 0.9, 1.1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double soh_draw = 0.85 + 0.15 * unit(rng);
    const double v0 = opt.box.v_lo + (opt.box.v_hi - opt.box.v_lo) * unit(rng);
    const double t0 = opt.box.t_lo_c + (opt.box.t_hi_c - opt.box.t_lo_c) * unit(rng);
    const double soh = opt.soh.value_or(soh_draw);

    auto p = make_parameters(q, soh, t0);
    const double soc0 = soc_from_rest_voltage(p, v0);
    auto s = rest_state(p, soc0, t0);
    return {std::move(p), std::move(s)};
}

}  // namespace ellcharge::battery
