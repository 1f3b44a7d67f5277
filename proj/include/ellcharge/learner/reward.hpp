#pragma once

#include <string>

#include <json.hpp>

#include "ellcharge/battery/cell.hpp"
#include "ellcharge/errors.hpp"
#include "ellcharge/io/config.hpp"

namespace ellcharge::learner {

/// Reward shaping weights. ΔSOC is dimensionless, ΔQ_l is in Ah, and the time
/// penalty is λ2_time·Δt with Δt in hours. `literal_fast_term` switches to the
/// +λ2·(k+1) form instead of the penalty.
struct RewardConfig {
    double lambda1 = 1.0e2;
    double lambda2 = 1.0e5;       // weight of the literal k+1 term
    double lambda2_time = 1000.0;  // 1/h, per-step time penalty weight
    double lambda3 = 2.0e4;       // 1/Ah
    double r_succ = 1.0e3;
    double r_fail = -1.0e3;
    bool literal_fast_term = false;

    void validate() const
    {
        if (!(r_succ > 0.0 && r_fail < 0.0)) throw DomainError("reward requires r_succ > 0 > r_fail");
    }
    friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

inline nlohmann::json to_json(const RewardConfig& c)
{
    return {{"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"lambda2_time_per_h", c.lambda2_time},
            {"lambda3_per_Ah", c.lambda3},
            {"r_succ", c.r_succ},
            {"r_fail", c.r_fail},
            {"literal_fast_term", c.literal_fast_term}};
}

inline RewardConfig reward_config_from_json(const nlohmann::json& j)
{
    RewardConfig c;
    io::Fields f(j, "reward");
    f.get("lambda1", c.lambda1);
    f.get("lambda2", c.lambda2);
    f.get("lambda2_time_per_h", c.lambda2_time);
    f.get("lambda3_per_Ah", c.lambda3);
    f.get("r_succ", c.r_succ);
    f.get("r_fail", c.r_fail);
    f.get("literal_fast_term", c.literal_fast_term);
    f.finish();
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("reward: ") + e.what());
    }
    return c;
}

/// Per-step time penalty magnitude for a control interval of `dt` seconds.
inline double time_penalty(double dt) noexcept { return dt / 3600.0; }

/// Reward of the transition prev -> next lasting `dt` seconds. The episode ends
/// whenever next.terminal is goal or unsafe.
inline double reward(const battery::CellState& prev, const battery::CellState& next, double dt,
                     const RewardConfig& cfg)
{
    double r = cfg.lambda1 * (next.soc - prev.soc);
    if (cfg.literal_fast_term)
        r += cfg.lambda2 * static_cast<double>(prev.k + 1);
    else
        r -= cfg.lambda2_time * time_penalty(dt);
    r += cfg.lambda3 * -(next.q_loss - prev.q_loss);
    if (next.terminal == battery::Terminal::unsafe)
        r += cfg.r_fail;
    else if (next.terminal == battery::Terminal::goal)
        r += cfg.r_succ;
    return r;
}

[[nodiscard]] inline bool ends_episode(battery::Terminal t) noexcept
{
    return t == battery::Terminal::goal || t == battery::Terminal::unsafe;
}

}  // namespace ellcharge::learner
