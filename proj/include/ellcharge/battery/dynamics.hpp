#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ellcharge/battery/cell.hpp"

namespace ellcharge::battery {

namespace detail {

inline double arrhenius(double e_act, double temp) noexcept
{
    return std::exp(e_act / constants::gas * (1.0 / constants::t_ref - 1.0 / temp));
}

inline double thermal_voltage(double temp) noexcept { return constants::gas * temp / constants::faraday; }

/// Normalised shell volumes of an equal-width radial grid (they sum to 1/3).
inline std::vector<double> shell_volumes(int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        v[static_cast<std::size_t>(i)] = (hi * hi * hi - lo * lo * lo) / 3.0;
    }
    return v;
}

inline double mean_stoichiometry(std::span<const double> conc, double c_max)
{
    const auto vol = shell_volumes(static_cast<int>(conc.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < conc.size(); ++i) acc += vol[i] * conc[i];
    return 3.0 * acc / c_max;
}

/// One backward-Euler step of spherical diffusion on the normalised radius with a
/// prescribed rate of change of the mean stoichiometry. Conserves the
/// volume-weighted mean exactly.
inline void diffuse(std::vector<double>& conc, double c_max, double inv_tau, double mean_rate, double h)
{
    const int n = static_cast<int>(conc.size());
    const double dr = 1.0 / n;
    const auto vol = shell_volumes(n);
    std::vector<double> lower(conc.size(), 0.0);
    std::vector<double> diag(conc.size(), 0.0);
    std::vector<double> upper(conc.size(), 0.0);
    std::vector<double> rhs(conc.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double theta = conc[u] / c_max;
        diag[u] = vol[u] / h;
        rhs[u] = vol[u] / h * theta;
        if (i > 0) {
            const double face = static_cast<double>(i) / n;
            const double g = inv_tau * face * face / dr;
            diag[u] += g;
            lower[u] = -g;
        }
        if (i + 1 < n) {
            const double face = static_cast<double>(i + 1) / n;
            const double g = inv_tau * face * face / dr;
            diag[u] += g;
            upper[u] = -g;
        }
    }
    rhs.back() += mean_rate / 3.0;

    // Thomas algorithm
    for (std::size_t i = 1; i < conc.size(); ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> theta(conc.size());
    theta.back() = rhs.back() / diag.back();
    for (std::size_t i = conc.size() - 1; i-- > 0;) theta[i] = (rhs[i] - upper[i] * theta[i + 1]) / diag[i];
    for (std::size_t i = 0; i < conc.size(); ++i) conc[i] = theta[i] * c_max;
}

inline double exchange_density(double j0_ref, double e_act, double theta, double temp) noexcept
{
    const double occ = std::clamp(theta, 1e-6, 1.0 - 1e-6);
    return j0_ref * arrhenius(e_act, temp) * 2.0 * std::sqrt(occ * (1.0 - occ));
}

struct Electrochem {
    double ocv = 0.0;      // U_p - U_n at the particle surfaces
    double u_n = 0.0;
    double eta_n = 0.0;    // negative while charging
    double eta_p = 0.0;
    double ohmic = 0.0;    // V
    double sei_drop = 0.0; // V
    [[nodiscard]] double volt() const noexcept { return ocv + eta_p - eta_n + ohmic + sei_drop; }
};

inline double ohmic_resistance(const CellParameters& p, double temp) noexcept
{
    auto tortuosity = [&](double scale) { return std::pow(p.porosity, -p.bruggeman_nominal * (scale - 1.0)); };
    const double r_el = p.r_electrolyte_n * tortuosity(p.brugg_scale_n) +
                        p.r_electrolyte_p * tortuosity(p.brugg_scale_p) + p.r_separator;
    const double transport = 1.0 + p.transference_kappa * (1.0 - p.t_plus);
    // electrolyte conductivity rises with temperature
    return r_el * transport / arrhenius(p.e_act_electrolyte, temp) + p.r_contact;
}

inline Electrochem electrochem(const CellParameters& p, double theta_n_surf, double theta_p_surf, double temp,
                               double current, double i_intercalation, double delta_sei)
{
    Electrochem e;
    const double vt = thermal_voltage(temp);
    e.u_n = (*p.ocv_n)(theta_n_surf);
    e.ocv = (*p.ocv_p)(theta_p_surf) - e.u_n;
    const double j_n = i_intercalation / p.electrode_area;
    const double j_p = current / p.electrode_area;
    e.eta_n = -2.0 * vt * std::asinh(j_n / (2.0 * exchange_density(p.j0_n_ref, p.e_act_j0_n, theta_n_surf, temp)));
    e.eta_p = 2.0 * vt * std::asinh(j_p / (2.0 * exchange_density(p.j0_p_ref, p.e_act_j0_p, theta_p_surf, temp)));
    e.ohmic = current * ohmic_resistance(p, temp);
    e.sei_drop = current / p.electrode_area * p.r_sei_per_m * delta_sei;
    return e;
}

inline void require_finite(double v, const char* field)
{
    if (!std::isfinite(v)) throw IntegrationError(field, "value became non-finite");
}

}  // namespace detail

/// Terminal voltage and the rest of the output tuple. Pure in its arguments.
inline OutputMeasurement measure(const CellState& s, const CellParameters& p)
{
    if (s.c_n.empty() || s.c_p.empty()) throw DomainError("cell state has no concentration profile");
    const auto e = detail::electrochem(p, s.c_n.back() / p.c_max_n, s.c_p.back() / p.c_max_p, s.temp, s.i_prev,
                                       s.i_prev - s.i_sei, s.delta_sei);
    OutputMeasurement z;
    z.k = s.k;
    z.soc = s.soc;
    z.volt = e.volt();
    z.temp = s.temp;
    z.i_prev = s.i_prev;
    detail::require_finite(z.volt, "volt");
    return z;
}

/// SOC from the mean negative-electrode stoichiometry.
inline double soc_from_profile(const CellState& s, const CellParameters& p)
{
    const double theta = detail::mean_stoichiometry(s.c_n, p.c_max_n);
    return std::clamp((theta - p.theta_n_empty) / (p.theta_n_full - p.theta_n_empty), 0.0, 1.0);
}

/// Evaluates the termination flags on a successor state.
inline Terminal classify(const CellState& s, const OutputMeasurement& z, const Envelope& env)
{
    if (z.volt > env.v_max || z.temp_c() > env.t_max_c) return Terminal::unsafe;
    if (s.soc >= env.soc_goal) return Terminal::goal;
    if (env.max_steps > 0 && s.k >= env.max_steps) return Terminal::timeout;
    return Terminal::running;
}

/// Advances the cell by one control interval of length `dt` at constant `current`.
///
/// Internally the interval is split into equal substeps no longer than
/// `p.substep`. Each substep solves the radial diffusion implicitly, evaluates the
/// SEI side current from the previous substep's intercalation current, and
/// integrates the lumped thermal balance explicitly. The side reaction only runs
/// while charging.
inline CellState step(const CellState& state, const CellParameters& p, double current, double dt,
                      const Envelope& env = {})
{
    if (!(current >= 0.0 && current <= p.i_max))
        throw DomainError("charging current outside [0, i_max]");
    if (state.terminal != Terminal::running) throw DomainError("cannot step a terminated cell");
    if (!(dt > 0.0)) throw DomainError("dt must be positive");

    using namespace constants;
    CellState s = state;
    const int sub = std::max(1, static_cast<int>(std::ceil(dt / p.substep - 1e-9)));
    const double h = dt / sub;
    const double q_coulomb = 3600.0 * p.q_eff();
    const double win_n = p.theta_n_full - p.theta_n_empty;
    const double win_p = p.theta_p_empty - p.theta_p_full;
    double i_sei = current > 0.0 ? s.i_sei : 0.0;

    for (int it = 0; it < sub; ++it) {
        const double temp = s.temp;
        const double theta_n_surf = s.c_n.back() / p.c_max_n;
        const double theta_p_surf = s.c_p.back() / p.c_max_p;

        if (current > 0.0) {
            // side-reaction overpotential with the lagged intercalation current
            const auto lag = detail::electrochem(p, theta_n_surf, theta_p_surf, temp, current, current - i_sei,
                                                 s.delta_sei);
            const double r_sei = p.r_sei_per_m * s.delta_sei;
            const double phi = lag.u_n + lag.eta_n + current / p.electrode_area * r_sei;
            const double eta_sei = phi - p.u_sei - current / p.electrode_area * r_sei;
            const double j_sei = p.j0_sei_ref * detail::arrhenius(p.e_act_sei, temp) *
                                 std::exp(-eta_sei / detail::thermal_voltage(temp));
            i_sei = std::min(j_sei * p.electrode_area, current);
        } else {
            i_sei = 0.0;
        }
        const double i_int = current - i_sei;

        const double tau_n = p.diff_n_ref * p.d_scale_n * detail::arrhenius(p.e_act_dn, temp) / (p.radius_n * p.radius_n);
        const double tau_p = p.diff_p_ref * p.d_scale_p * detail::arrhenius(p.e_act_dp, temp) / (p.radius_p * p.radius_p);
        detail::diffuse(s.c_n, p.c_max_n, tau_n, i_int * win_n / q_coulomb, h);
        detail::diffuse(s.c_p, p.c_max_p, tau_p, -current * win_p / q_coulomb, h);

        s.q_loss += i_sei * h / 3600.0;
        s.delta_sei += i_sei / p.electrode_area * h * p.v_bar_sei / (sei_electrons * faraday);

        const auto e = detail::electrochem(p, s.c_n.back() / p.c_max_n, s.c_p.back() / p.c_max_p, temp, current,
                                           i_int, s.delta_sei);
        const double heat = std::abs(current * (e.volt() - e.ocv));
        s.temp = temp + h / p.m_cp * ((p.t_amb - temp) * p.h_scale / p.r_th + heat);
    }

    s.k = state.k + 1;
    s.i_prev = current;
    s.i_sei = i_sei;
    s.soc = soc_from_profile(s, p);

    // Temperature feeds every rate, so it is checked first to name the root cause.
    detail::require_finite(s.temp, "temp");
    for (double c : s.c_n) detail::require_finite(c, "c_n");
    for (double c : s.c_p) detail::require_finite(c, "c_p");
    detail::require_finite(s.q_loss, "q_loss");
    detail::require_finite(s.delta_sei, "delta_sei");
    detail::require_finite(s.soc, "soc");

    s.terminal = classify(s, measure(s, p), env);
    return s;
}

}  // namespace ellcharge::battery
