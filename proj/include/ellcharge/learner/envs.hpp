#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "ellcharge/battery/dynamics.hpp"
#include "ellcharge/battery/sampling.hpp"
#include "ellcharge/learner/reward.hpp"
#include "ellcharge/learner/sac.hpp"

namespace ellcharge::learner {

/// Charging episodes on randomly sampled cells whose initial (V, T) lies in a
/// region of the initial box.
class BatteryEnv {
public:
    BatteryEnv(battery::InitialBox region, RewardConfig reward = {}, battery::Envelope env = {}, double dt = 15.0)
        : region_(region), reward_(reward), env_(env), dt_(dt)
    {
        reward_.validate();
    }

    battery::OutputMeasurement reset(std::uint64_t seed)
    {
        battery::SamplingOptions opt;
        opt.box = region_;
        std::tie(params_, state_) = battery::sample_cell(seed, opt);
        return battery::measure(state_, params_);
    }

    EnvStep step(double current)
    {
        auto next = battery::step(state_, params_, current, dt_, env_);
        EnvStep r;
        r.reward = reward(state_, next, dt_, reward_);
        r.done = ends_episode(next.terminal);
        r.truncated = next.terminal == battery::Terminal::timeout;
        state_ = std::move(next);
        r.z = battery::measure(state_, params_);
        return r;
    }

    [[nodiscard]] double i_max() const noexcept { return params_.i_max; }
    [[nodiscard]] const battery::CellState& state() const noexcept { return state_; }

private:
    battery::InitialBox region_;
    RewardConfig reward_;
    battery::Envelope env_;
    double dt_;
    battery::CellParameters params_{};
    battery::CellState state_{};
};

/// Toy "reach the SOC band fast" task: SOC grows linearly with the current, each
/// step costs a fixed time penalty, and reaching the band pays a bonus. Ageing
/// plays no role.
class ToyChargeEnv {
public:
    explicit ToyChargeEnv(double i_max = 10.0, int max_steps = 60) : i_max_(i_max), max_steps_(max_steps) {}

    battery::OutputMeasurement reset(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        z_ = {};
        z_.soc = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
        z_.volt = 3.4 + z_.soc;
        z_.temp = battery::to_kelvin(25.0);
        return z_;
    }

    EnvStep step(double current)
    {
        EnvStep r;
        const double before = z_.soc;
        z_.soc = std::min(1.0, z_.soc + 0.04 * current / i_max_);
        z_.volt = 3.4 + z_.soc;
        z_.i_prev = current;
        ++z_.k;
        r.reward = 10.0 * (z_.soc - before) - 1.0;
        if (z_.soc >= 0.9) {
            r.reward += 10.0;
            r.done = true;
        }
        r.truncated = !r.done && z_.k >= max_steps_;
        r.z = z_;
        return r;
    }

    [[nodiscard]] double i_max() const noexcept { return i_max_; }

private:
    double i_max_;
    int max_steps_;
    battery::OutputMeasurement z_{};
};

}  // namespace ellcharge::learner
