#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ellcharge/battery/labeling.hpp"

namespace ellcharge::protocols {

/// One logged sample of a closed-loop run.
struct TraceSample {
    battery::OutputMeasurement z;
    battery::OutputLabel y;
    double q_loss = 0.0;     // Ah
    double delta_sei = 0.0;  // m
    bool cv_phase = false;
};

/// A simulated run: samples[0] is the initial condition, samples[i+1] follows
/// currents[i].
struct Trace {
    double dt = 15.0;
    std::vector<TraceSample> samples;
    std::vector<double> currents;
    std::vector<double> rewards;
    battery::Terminal terminal = battery::Terminal::running;
    std::vector<int> word;  // fixed-length label word (empty unless produced by rollout)

    [[nodiscard]] std::size_t transitions() const noexcept { return currents.size(); }
    [[nodiscard]] double duration_s() const noexcept { return dt * static_cast<double>(currents.size()); }
    [[nodiscard]] double max_temp_c() const
    {
        double m = -1e300;
        for (const auto& s : samples) m = std::max(m, s.z.temp_c());
        return m;
    }
    [[nodiscard]] double q_loss_gain() const
    {
        return samples.empty() ? 0.0 : samples.back().q_loss - samples.front().q_loss;
    }
    [[nodiscard]] bool has_cv_phase() const
    {
        return std::any_of(samples.begin(), samples.end(), [](const TraceSample& s) { return s.cv_phase; });
    }
};

inline TraceSample make_sample(const battery::CellState& s, const battery::CellParameters& p,
                               const battery::LabelThresholds& th = {})
{
    TraceSample t;
    t.z = battery::measure(s, p);
    t.y = battery::label(t.z, th);
    t.q_loss = s.q_loss;
    t.delta_sei = s.delta_sei;
    return t;
}

/// Writes the trace log CSV: k,t_s,soc,volt_V,temp_C,i_A,q_loss_Ah,delta_sei_m,label.
/// `i_A` is the current applied during the interval that ended at the sample.
inline void write_trace_csv(std::ostream& out, const Trace& tr)
{
    out << "k,t_s,soc,volt_V,temp_C,i_A,q_loss_Ah,delta_sei_m,label\n";
    std::ostringstream row;
    row << std::setprecision(10);
    for (const auto& s : tr.samples) {
        row.str("");
        row << s.z.k << ',' << static_cast<double>(s.z.k) * tr.dt << ',' << s.z.soc << ',' << s.z.volt << ','
            << s.z.temp_c() << ',' << s.z.i_prev << ',' << s.q_loss << ',' << s.delta_sei << ',' << s.y.str()
            << '\n';
        out << row.str();
    }
}

}  // namespace ellcharge::protocols
