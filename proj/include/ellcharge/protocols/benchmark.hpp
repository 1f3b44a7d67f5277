#pragma once

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <utility>
#include <vector>

#include "ellcharge/protocols/cccv.hpp"

namespace ellcharge::protocols {

/// Averages over the cells of one sweep point.
struct SweepPoint {
    double i_cc = 0.0;
    double t_charge_min = 0.0;
    double t_max_c = 0.0;
    double q_loss_mah = 0.0;
};

struct TrendReport {
    bool t_charge_nonincreasing = false;
    bool t_max_nondecreasing = false;
    bool q_loss_interior_minimum = false;
    std::size_t q_loss_argmin = 0;

    [[nodiscard]] bool all() const noexcept
    {
        return t_charge_nonincreasing && t_max_nondecreasing && q_loss_interior_minimum;
    }
};

using Cell = std::pair<battery::CellParameters, battery::CellState>;

/// Runs CC-CV for every current of `grid` (sorted ascending) on every cell.
inline std::vector<SweepPoint> benchmark_ccv(std::vector<double> grid, const std::vector<Cell>& cells,
                                             CcCvConfig base = {}, double dt = 15.0)
{
    if (grid.empty()) throw DomainError("empty current grid");
    if (cells.empty()) throw DomainError("benchmark needs at least one cell");
    std::sort(grid.begin(), grid.end());
    std::vector<SweepPoint> out;
    for (double i : grid) {
        SweepPoint pt;
        pt.i_cc = i;
        auto cfg = base;
        cfg.i_cc = i;
        cfg.i_cutoff = std::min(cfg.i_cutoff, 0.5 * i);
        for (const auto& c : cells) {
            const auto m = metrics(run_ccv(c, cfg, dt));
            pt.t_charge_min += m.t_charge_min;
            pt.t_max_c += m.t_max_c;
            pt.q_loss_mah += m.q_loss_mah;
        }
        const double n = static_cast<double>(cells.size());
        pt.t_charge_min /= n;
        pt.t_max_c /= n;
        pt.q_loss_mah /= n;
        out.push_back(pt);
    }
    return out;
}

inline TrendReport trends(const std::vector<SweepPoint>& pts)
{
    TrendReport r;
    if (pts.empty()) return r;
    r.t_charge_nonincreasing = true;
    r.t_max_nondecreasing = true;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        r.t_charge_nonincreasing &= pts[i].t_charge_min <= pts[i - 1].t_charge_min;
        r.t_max_nondecreasing &= pts[i].t_max_c >= pts[i - 1].t_max_c;
    }
    const auto it = std::min_element(pts.begin(), pts.end(),
                                     [](const auto& a, const auto& b) { return a.q_loss_mah < b.q_loss_mah; });
    r.q_loss_argmin = static_cast<std::size_t>(it - pts.begin());
    r.q_loss_interior_minimum = r.q_loss_argmin > 0 && r.q_loss_argmin + 1 < pts.size();
    return r;
}

/// CSV `i_cc_A,t_charge_min,t_max_C,q_loss_mAh`.
inline void write_benchmark_csv(std::ostream& out, const std::vector<SweepPoint>& pts)
{
    out << "i_cc_A,t_charge_min,t_max_C,q_loss_mAh\n" << std::setprecision(10);
    for (const auto& p : pts) out << p.i_cc << ',' << p.t_charge_min << ',' << p.t_max_c << ',' << p.q_loss_mah << '\n';
}

}  // namespace ellcharge::protocols
