#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ellcharge/errors.hpp"

namespace ellcharge::battery {

/// Open-circuit potential as a tabulated function of stoichiometry, evaluated
/// with monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson). Outside
/// the table the curve continues linearly with the end slopes.
class OcvCurve {
public:
    OcvCurve(std::vector<double> stoich, std::vector<double> volts)
        : x_(std::move(stoich)), y_(std::move(volts))
    {
        if (x_.size() != y_.size() || x_.size() < 2)
            throw DomainError("OCV table needs at least two (stoichiometry, volts) pairs");
        for (std::size_t i = 1; i < x_.size(); ++i) {
            if (!(x_[i] > x_[i - 1]))
                throw DomainError("OCV table stoichiometry must be strictly increasing");
        }
        for (double v : y_) {
            if (!std::isfinite(v)) throw DomainError("OCV table contains a non-finite potential");
        }
        build_slopes();
    }

    /// Reads a whitespace-separated two-column file. Lines starting with '#' are ignored.
    static OcvCurve load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw DomainError("cannot open OCV file '" + path + "'");
        std::vector<double> xs;
        std::vector<double> ys;
        std::string line;
        while (std::getline(in, line)) {
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            std::istringstream row(line);
            double x = 0.0;
            double y = 0.0;
            if (!(row >> x >> y)) throw DomainError("malformed OCV line: '" + line + "'");
            xs.push_back(x);
            ys.push_back(y);
        }
        return OcvCurve(std::move(xs), std::move(ys));
    }

    [[nodiscard]] double operator()(double x) const noexcept
    {
        if (x <= x_.front()) return y_.front() + m_.front() * (x - x_.front());
        if (x >= x_.back()) return y_.back() + m_.back() * (x - x_.back());
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
    }

    [[nodiscard]] const std::vector<double>& stoichiometry() const noexcept { return x_; }
    [[nodiscard]] const std::vector<double>& potential() const noexcept { return y_; }
    [[nodiscard]] bool monotone_decreasing() const noexcept
    {
        for (std::size_t i = 1; i < y_.size(); ++i) {
            if (!(y_[i] < y_[i - 1])) return false;
        }
        return true;
    }

    friend bool operator==(const OcvCurve& a, const OcvCurve& b) { return a.x_ == b.x_ && a.y_ == b.y_; }

private:
    void build_slopes()
    {
        const std::size_t n = x_.size();
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_.assign(n, 0.0);
        m_.front() = d.front();
        m_.back() = d.back();
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0.0) {
                m_[i] = 0.0;
            } else {
                // weighted harmonic mean keeps each cubic piece monotone
                const double h0 = x_[i] - x_[i - 1];
                const double h1 = x_[i + 1] - x_[i];
                const double w1 = 2 * h1 + h0;
                const double w2 = h1 + 2 * h0;
                m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
    }

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;
};

namespace detail {

inline double graphite_potential(double x)
{
    return 1.9793 * std::exp(-39.3631 * x) + 0.2482 - 0.0909 * std::tanh(29.8538 * (x - 0.1234)) -
           0.04478 * std::tanh(14.9159 * (x - 0.2769)) - 0.0205 * std::tanh(30.4444 * (x - 0.6103));
}

// Layered-oxide fit with an added steep rise near full delithiation, so the
// full-cell curve bends upward above ~95 % SOC.
inline double layered_oxide_potential(double y)
{
    return -0.8090 * y + 4.4875 - 0.0428 * std::tanh(18.5138 * (y - 0.5542)) -
           17.7326 * std::tanh(15.7890 * (y - 0.3117)) + 17.5842 * std::tanh(15.9308 * (y - 0.3120)) +
           0.22 * std::exp(-(y - 0.27) / 0.025) - 0.09;
}

template <typename F>
OcvCurve tabulate(F&& f, double lo, double hi, std::size_t points)
{
    std::vector<double> xs(points);
    std::vector<double> ys(points);
    for (std::size_t i = 0; i < points; ++i) {
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        ys[i] = f(xs[i]);
    }
    return {std::move(xs), std::move(ys)};
}

}  // namespace detail

/// Synthetic graphite curve on stoichiometry [0, 1].
inline std::shared_ptr<const OcvCurve> default_ocv_negative()
{
    static const auto curve =
        std::make_shared<const OcvCurve>(detail::tabulate(detail::graphite_potential, 0.0, 1.0, 201));
    return curve;
}

/// Synthetic layered-oxide curve on stoichiometry [0.2, 1].
inline std::shared_ptr<const OcvCurve> default_ocv_positive()
{
    static const auto curve =
        std::make_shared<const OcvCurve>(detail::tabulate(detail::layered_oxide_potential, 0.2, 1.0, 201));
    return curve;
}

}  // namespace ellcharge::battery
