#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ellcharge/battery/dynamics.hpp"
#include "ellcharge/protocols/trace.hpp"

namespace ellcharge::protocols {

struct CcCvConfig {
    double i_cc = 3.5;       // A
    double v_cv = 4.2;       // V
    double i_cutoff = 0.05;  // A
    double soc_stop = 0.9;
    double v_tolerance = 1e-3;  // V, CV hold band [v_cv - tol, v_cv]
    std::int64_t max_steps = 5000;

    void validate(const battery::CellParameters& p, const battery::Envelope& env = {}) const
    {
        if (!(i_cutoff > 0 && i_cutoff < i_cc && i_cc <= p.i_max))
            throw DomainError("CC-CV requires 0 < i_cutoff < i_cc <= i_max");
        if (!(v_cv <= env.v_max)) throw DomainError("CC-CV setpoint above the safety voltage");
        if (!(soc_stop > 0 && soc_stop <= 1)) throw DomainError("soc_stop must lie in (0, 1]");
    }
};

/// Summary numbers of one CC-CV run.
struct CcCvMetrics {
    double t_charge_min = 0.0;
    double t_max_c = 0.0;
    double q_loss_mah = 0.0;
};

inline CcCvMetrics metrics(const Trace& tr)
{
    return {tr.duration_s() / 60.0, tr.max_temp_c(), 1000.0 * tr.q_loss_gain()};
}

/// Constant-current phase until the next step would exceed `v_cv`, then per-step
/// bisection on the current so the voltage stays within [v_cv - tol, v_cv]. Stops
/// at `soc_stop`, when the CV current falls below `i_cutoff`, or on a safety
/// violation.
inline Trace run_ccv(const std::pair<battery::CellParameters, battery::CellState>& cell, const CcCvConfig& cfg,
                     double dt = 15.0, battery::Envelope env = {})
{
    const auto& [p, s0] = cell;
    cfg.validate(p, env);
    if (s0.terminal != battery::Terminal::running) throw DomainError("CC-CV needs a running cell");
    env.soc_goal = cfg.soc_stop;
    env.max_steps = s0.k + cfg.max_steps;
    const battery::LabelThresholds th{env.soc_goal, env.v_max, env.t_max_c};

    Trace tr;
    tr.dt = dt;
    tr.samples.push_back(make_sample(s0, p, th));
    battery::CellState s = s0;
    bool cv = false;

    while (s.terminal == battery::Terminal::running) {
        double current = cfg.i_cc;
        battery::CellState next;
        if (!cv) {
            next = battery::step(s, p, current, dt, env);
            if (battery::measure(next, p).volt > cfg.v_cv) cv = true;
        }
        if (cv) {
            double lo = 0.0;
            double hi = cfg.i_cc;
            auto volt_at = [&](double i) {
                auto n = battery::step(s, p, i, dt, env);
                return std::pair{battery::measure(n, p).volt, std::move(n)};
            };
            auto [v_lo, n_lo] = volt_at(lo);
            if (v_lo > cfg.v_cv) throw ProtocolError("CV hold cannot be bracketed: rest voltage above setpoint");
            if (v_lo >= cfg.v_cv - cfg.v_tolerance) {
                current = lo;
                next = std::move(n_lo);
            } else {
                bool found = false;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    auto [v_mid, n_mid] = volt_at(mid);
                    if (v_mid > cfg.v_cv) {
                        hi = mid;
                    } else if (v_mid < cfg.v_cv - cfg.v_tolerance) {
                        lo = mid;
                    } else {
                        current = mid;
                        next = std::move(n_mid);
                        found = true;
                        break;
                    }
                }
                if (!found) throw ProtocolError("CV bisection did not converge");
            }
            if (current < cfg.i_cutoff) break;
        }
        s = std::move(next);
        auto sample = make_sample(s, p, th);
        sample.cv_phase = cv;
        tr.samples.push_back(sample);
        tr.currents.push_back(current);
    }
    tr.terminal = s.terminal;  // running here means the CV current hit i_cutoff
    return tr;
}

}  // namespace ellcharge::protocols
