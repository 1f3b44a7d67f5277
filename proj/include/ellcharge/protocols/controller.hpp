#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ellcharge/battery/dynamics.hpp"
#include "ellcharge/battery/sampling.hpp"
#include "ellcharge/learner/policy.hpp"
#include "ellcharge/learner/reward.hpp"
#include "ellcharge/protocols/trace.hpp"

namespace ellcharge::protocols {

/// Axis-aligned rectangle over initial (V [V], T [degC]).
struct Rect {
    double v_lo = 0.0;
    double v_hi = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;

    [[nodiscard]] double area() const noexcept { return (v_hi - v_lo) * (t_hi - t_lo); }
    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Left-closed membership; the upper edge counts only where it lies on the outer
/// boundary of `box`.
inline bool contains(const Rect& r, double v, double t, const battery::InitialBox& box) noexcept
{
    const bool in_v = v >= r.v_lo && (v < r.v_hi || (v == r.v_hi && r.v_hi == box.v_hi));
    const bool in_t = t >= r.t_lo && (t < r.t_hi || (t == r.t_hi && r.t_hi == box.t_hi_c));
    return in_v && in_t;
}

/// Policy family indexed by a rectangular partition of the initial output box.
struct SwitchedController {
    battery::InitialBox box{};
    std::vector<Rect> partition;
    std::vector<learner::Policy> policies;

    [[nodiscard]] std::size_t size() const noexcept { return partition.size(); }
};

/// Index of the rectangle containing the initial measurement.
inline std::size_t select_index(const SwitchedController& ctrl, const battery::OutputMeasurement& z0)
{
    if (ctrl.partition.size() != ctrl.policies.size())
        throw ShapeError("switched controller needs one policy per rectangle");
    const double v = z0.volt;
    const double t = z0.temp_c();
    for (std::size_t i = 0; i < ctrl.partition.size(); ++i)
        if (contains(ctrl.partition[i], v, t, ctrl.box)) return i;
    throw CoverageError("initial measurement outside every partition rectangle");
}

inline const learner::Policy& select_policy(const SwitchedController& ctrl, const battery::OutputMeasurement& z0)
{
    return ctrl.policies[select_index(ctrl, z0)];
}

/// Closed-loop run options.
struct RolloutOptions {
    double dt = 15.0;
    battery::Envelope env{};
    learner::RewardConfig reward{};
};

/// Fixes the policy from the initial measurement and closes the loop for
/// `horizon` steps or until a goal/unsafe terminal. `word` holds the labels of the
/// first `horizon` samples, padded with the terminal label.
inline Trace rollout(const std::pair<battery::CellParameters, battery::CellState>& cell,
                     const SwitchedController& ctrl, int horizon, const RolloutOptions& opt = {})
{
    if (horizon < 1) throw DomainError("rollout horizon must be at least 1");
    const auto& [p, s0] = cell;
    const battery::LabelThresholds th{opt.env.soc_goal, opt.env.v_max, opt.env.t_max_c};
    Trace tr;
    tr.dt = opt.dt;
    tr.samples.push_back(make_sample(s0, p, th));
    const auto& policy = select_policy(ctrl, tr.samples.front().z);

    battery::CellState s = s0;
    for (int i = 0; i < horizon && s.terminal == battery::Terminal::running; ++i) {
        const double current = policy.act(tr.samples.back().z);
        auto next = battery::step(s, p, current, opt.dt, opt.env);
        tr.currents.push_back(current);
        tr.rewards.push_back(learner::reward(s, next, opt.dt, opt.reward));
        s = std::move(next);
        tr.samples.push_back(make_sample(s, p, th));
    }
    tr.terminal = s.terminal;

    tr.word.reserve(static_cast<std::size_t>(horizon));
    for (int i = 0; i < horizon; ++i) {
        const std::size_t at = std::min<std::size_t>(static_cast<std::size_t>(i), tr.samples.size() - 1);
        tr.word.push_back(tr.samples[at].y.index());
    }
    return tr;
}

}  // namespace ellcharge::protocols
