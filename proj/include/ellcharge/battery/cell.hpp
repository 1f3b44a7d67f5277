#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ellcharge/battery/ocv.hpp"
#include "ellcharge/errors.hpp"

namespace ellcharge::battery {

namespace constants {
inline constexpr double faraday = 96485.33212;   // C/mol
inline constexpr double gas = 8.314462618;       // J/(mol K)
inline constexpr double t_ref = 298.15;          // K
inline constexpr double zero_celsius = 273.15;   // K
inline constexpr double sei_electrons = 2.0;     // electrons per SEI formula unit
inline constexpr double t_plus_nominal = 0.2594;
inline constexpr double delta_sei_pristine = 5.0e-9;  // m
}  // namespace constants

inline double to_kelvin(double celsius) noexcept { return celsius + constants::zero_celsius; }
inline double to_celsius(double kelvin) noexcept { return kelvin - constants::zero_celsius; }

/// Physical parameters of one simulated cell. Immutable after sampling; safe to
/// share read-only between workers.
struct CellParameters {
    double q_nom = 1.5;  // pristine nominal capacity (Ah); the usable capacity is q_eff()
    int n_radial = 10;

    // manufacturing-quality scalers
    double d_scale_n = 1.0;
    double d_scale_p = 1.0;
    double brugg_scale_n = 1.0;
    double brugg_scale_p = 1.0;
    double h_scale = 1.0;

    double soh = 1.0;
    double t_plus = constants::t_plus_nominal;
    double delta_sei_init = constants::delta_sei_pristine;  // m

    // SEI side reaction
    double r_sei_per_m = 0.9e4;    // Ohm m^2 per m of SEI
    double u_sei = 0.4;            // V
    double j0_sei_ref = 2.0e-9;    // A/m^2 at t_ref
    double e_act_sei = 6.0e4;      // J/mol
    double v_bar_sei = 9.585e-5;   // m^3/mol

    // solid diffusion
    double e_act_dn = 17447.0;  // J/mol
    double e_act_dp = 12084.0;  // J/mol
    double radius_n = 5.0e-6;   // m
    double radius_p = 4.0e-6;   // m
    double diff_n_ref = 2.5e-13;  // m^2/s
    double diff_p_ref = 1.6e-13;  // m^2/s
    double c_max_n = 33133.0;   // mol/m^3
    double c_max_p = 63104.0;   // mol/m^3
    double theta_n_empty = 0.03;
    double theta_n_full = 0.90;
    double theta_p_empty = 0.90;
    double theta_p_full = 0.27;

    // interfacial kinetics
    double electrode_area = 1.0;  // m^2; converts every cell current into an area-specific one
    double j0_n_ref = 3.6;        // A/m^2 at theta = 0.5, t_ref
    double j0_p_ref = 9.6;
    double e_act_j0_n = 35000.0;
    double e_act_j0_p = 17800.0;

    // lumped electrolyte/contact resistance
    double r_electrolyte_n = 1.05e-3;  // Ohm
    double r_electrolyte_p = 1.05e-3;
    double r_separator = 0.7e-3;
    double r_contact = 0.7e-3;
    double e_act_electrolyte = 17000.0;
    double porosity = 0.3;
    double bruggeman_nominal = 1.5;
    double transference_kappa = 0.5;

    // lumped thermal model
    double m_cp = 45.0;       // J/K
    double r_th = 5.0;        // K/W
    double t_amb = constants::t_ref;  // K

    std::shared_ptr<const OcvCurve> ocv_n = default_ocv_negative();
    std::shared_ptr<const OcvCurve> ocv_p = default_ocv_positive();

    double i_max = 10.0;      // A
    double substep = 1.0;     // s, upper bound on the internal integration step

    [[nodiscard]] double q_eff() const noexcept { return soh * q_nom; }

    [[nodiscard]] double theta_n(double soc) const noexcept
    {
        return theta_n_empty + soc * (theta_n_full - theta_n_empty);
    }
    [[nodiscard]] double theta_p(double soc) const noexcept
    {
        return theta_p_empty + soc * (theta_p_full - theta_p_empty);
    }

    /// Rest voltage at a uniform lithiation corresponding to `soc`.
    [[nodiscard]] double rest_ocv(double soc) const
    {
        return (*ocv_p)(theta_p(soc)) - (*ocv_n)(theta_n(soc));
    }

    /// Throws DomainError when an invariant is violated.
    void validate() const
    {
        auto in_quality = [](double s) { return s >= 0.9 && s <= 1.1; };
        if (!(q_nom > 0)) throw DomainError("q_nom must be positive");
        if (n_radial < 3) throw DomainError("n_radial must be at least 3");
        if (!(i_max > 0)) throw DomainError("i_max must be positive");
        if (!(m_cp > 0)) throw DomainError("m_cp must be positive");
        if (!(r_th > 0)) throw DomainError("r_th must be positive");
        if (!(in_quality(d_scale_n) && in_quality(d_scale_p) && in_quality(brugg_scale_n) &&
              in_quality(brugg_scale_p) && in_quality(h_scale)))
            throw DomainError("quality scalers must lie in [0.9, 1.1]");
        if (!(soh >= 0.85 && soh <= 1.0)) throw DomainError("soh must lie in [0.85, 1]");
        if (!(delta_sei_init >= 0)) throw DomainError("delta_sei_init must be nonnegative");
        if (!ocv_n || !ocv_p) throw DomainError("OCV curves missing");
    }

    friend bool operator==(const CellParameters& a, const CellParameters& b);
};

inline bool operator==(const CellParameters& a, const CellParameters& b)
{
    auto same_curve = [](const std::shared_ptr<const OcvCurve>& x, const std::shared_ptr<const OcvCurve>& y) {
        return x == y || (x && y && *x == *y);
    };
    return a.q_nom == b.q_nom && a.n_radial == b.n_radial && a.d_scale_n == b.d_scale_n &&
           a.d_scale_p == b.d_scale_p && a.brugg_scale_n == b.brugg_scale_n && a.brugg_scale_p == b.brugg_scale_p &&
           a.h_scale == b.h_scale && a.soh == b.soh && a.t_plus == b.t_plus && a.delta_sei_init == b.delta_sei_init &&
           a.r_sei_per_m == b.r_sei_per_m && a.u_sei == b.u_sei && a.j0_sei_ref == b.j0_sei_ref &&
           a.e_act_sei == b.e_act_sei && a.v_bar_sei == b.v_bar_sei && a.e_act_dn == b.e_act_dn &&
           a.e_act_dp == b.e_act_dp && a.radius_n == b.radius_n && a.radius_p == b.radius_p &&
           a.diff_n_ref == b.diff_n_ref && a.diff_p_ref == b.diff_p_ref && a.c_max_n == b.c_max_n &&
           a.c_max_p == b.c_max_p && a.theta_n_empty == b.theta_n_empty && a.theta_n_full == b.theta_n_full &&
           a.theta_p_empty == b.theta_p_empty && a.theta_p_full == b.theta_p_full &&
           a.electrode_area == b.electrode_area && a.j0_n_ref == b.j0_n_ref && a.j0_p_ref == b.j0_p_ref &&
           a.e_act_j0_n == b.e_act_j0_n && a.e_act_j0_p == b.e_act_j0_p && a.r_electrolyte_n == b.r_electrolyte_n &&
           a.r_electrolyte_p == b.r_electrolyte_p && a.r_separator == b.r_separator && a.r_contact == b.r_contact &&
           a.e_act_electrolyte == b.e_act_electrolyte && a.porosity == b.porosity &&
           a.bruggeman_nominal == b.bruggeman_nominal && a.transference_kappa == b.transference_kappa &&
           a.m_cp == b.m_cp && a.r_th == b.r_th && a.t_amb == b.t_amb && same_curve(a.ocv_n, b.ocv_n) &&
           same_curve(a.ocv_p, b.ocv_p) && a.i_max == b.i_max && a.substep == b.substep;
}

enum class Terminal : std::uint8_t { running, goal, unsafe, timeout };

inline const char* to_string(Terminal t) noexcept
{
    switch (t) {
    case Terminal::running: return "running";
    case Terminal::goal: return "goal";
    case Terminal::unsafe: return "unsafe";
    case Terminal::timeout: return "timeout";
    }
    return "?";
}

/// Dynamic state of one cell.
struct CellState {
    std::int64_t k = 0;
    double soc = 0.0;
    double temp = constants::t_ref;  // K
    double q_loss = 0.0;             // Ah
    double delta_sei = constants::delta_sei_pristine;  // m
    std::vector<double> c_n;         // mol/m^3, centre to surface
    std::vector<double> c_p;
    double i_prev = 0.0;             // A, charging positive
    double i_sei = 0.0;              // A, side-reaction share of i_prev
    Terminal terminal = Terminal::running;

    friend bool operator==(const CellState&, const CellState&) = default;
};

/// Limits that decide when an episode ends.
struct Envelope {
    double soc_goal = 0.9;
    double v_max = 4.2;     // V
    double t_max_c = 45.0;  // degC
    std::int64_t max_steps = 0;  // 0 disables the timeout
};

/// The measurable output tuple (k, SOC, V, T, I_prev).
struct OutputMeasurement {
    std::int64_t k = 0;
    double soc = 0.0;
    double volt = 0.0;
    double temp = constants::t_ref;  // K
    double i_prev = 0.0;

    [[nodiscard]] double temp_c() const noexcept { return to_celsius(temp); }
    friend bool operator==(const OutputMeasurement&, const OutputMeasurement&) = default;
};

}  // namespace ellcharge::battery
