#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ellcharge/battery/cell.hpp"

namespace ellcharge::battery {

/// Finite label of an output measurement: 20 SOC symbols, and one safety bit each
/// for voltage and temperature.
struct OutputLabel {
    static constexpr int soc_symbols = 20;
    static constexpr int count = soc_symbols * 2 * 2;

    std::uint8_t soc_sym = 0;  // 0..19 -> 'a'..'t'
    std::uint8_t v_sym = 0;    // 0 -> 'a' (V <= V_max), 1 -> 'b'
    std::uint8_t t_sym = 0;    // 0 -> 'a' (T <= T_max), 1 -> 'b'

    [[nodiscard]] int index() const noexcept { return soc_sym * 4 + v_sym * 2 + t_sym; }

    static OutputLabel from_index(int i) noexcept
    {
        return {static_cast<std::uint8_t>(i / 4), static_cast<std::uint8_t>((i / 2) % 2),
                static_cast<std::uint8_t>(i % 2)};
    }

    [[nodiscard]] std::string str() const
    {
        return {static_cast<char>('a' + soc_sym), static_cast<char>('a' + v_sym), static_cast<char>('a' + t_sym)};
    }

    [[nodiscard]] bool goal() const noexcept { return soc_sym == soc_symbols - 1; }
    [[nodiscard]] bool safe() const noexcept { return v_sym == 0 && t_sym == 0; }

    friend bool operator==(const OutputLabel&, const OutputLabel&) = default;
};

/// Thresholds of the partitioning map. SOC bins are left-closed, right-open; the
/// goal bin is [soc_goal, 1]; safety symbols use <=.
struct LabelThresholds {
    double soc_goal = 0.9;
    double v_max = 4.2;
    double t_max_c = 45.0;
};

inline OutputLabel label(const OutputMeasurement& z, const LabelThresholds& th = {})
{
    OutputLabel y;
    if (z.soc >= th.soc_goal) {
        y.soc_sym = OutputLabel::soc_symbols - 1;
    } else {
        const double width = th.soc_goal / (OutputLabel::soc_symbols - 1);
        const double bin = std::floor(std::max(z.soc, 0.0) / width);
        y.soc_sym = static_cast<std::uint8_t>(std::clamp(bin, 0.0, double(OutputLabel::soc_symbols - 2)));
    }
    y.v_sym = z.volt <= th.v_max ? 0 : 1;
    y.t_sym = z.temp_c() <= th.t_max_c ? 0 : 1;
    return y;
}

/// Names of all labels in index order ("aaa", "aab", ...).
inline std::vector<std::string> label_names()
{
    std::vector<std::string> names;
    names.reserve(OutputLabel::count);
    for (int i = 0; i < OutputLabel::count; ++i) names.push_back(OutputLabel::from_index(i).str());
    return names;
}

}  // namespace ellcharge::battery
