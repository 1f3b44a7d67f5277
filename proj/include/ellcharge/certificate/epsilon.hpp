#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ellcharge/errors.hpp"

namespace ellcharge::certificate {

namespace detail {
inline double log_binom(double n, double k) noexcept
{
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}
}  // namespace detail

/// Wait-and-judge scenario risk bound: ε(k) = 1 - t where t ∈ (0, 1) solves
///   β/(N+1) Σ_{m=k}^{N} C(m,k) t^{m-k} = C(N,k) t^{N-k}.
/// Both sides are evaluated in the log domain and the root is bracketed in ε.
inline double epsilon(std::int64_t n, std::int64_t k, double beta)
{
    if (n < 1) throw DomainError("epsilon needs at least one sample");
    if (k < 0 || k > n) throw DomainError("epsilon requires 0 <= k <= n");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
    if (k == n) return 1.0;

    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);
    std::vector<double> log_c(static_cast<std::size_t>(n - k + 1));
    for (std::int64_t m = k; m <= n; ++m)
        log_c[static_cast<std::size_t>(m - k)] = detail::log_binom(static_cast<double>(m), kd);
    const double log_lead = std::log(beta) - std::log(nd + 1.0);
    const double log_rhs_c = detail::log_binom(nd, kd);

    // g(eps) = log LHS - log RHS; positive near eps = 1 (t -> 0), negative at eps = 0.
    std::vector<double> terms(log_c.size());
    auto g = [&](double eps) {
        const double log_t = std::log1p(-eps);
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < log_c.size(); ++j) {
            terms[j] = log_c[j] + static_cast<double>(j) * log_t;
            top = std::max(top, terms[j]);
        }
        double sum = 0.0;
        for (double v : terms) sum += std::exp(v - top);
        return log_lead + top + std::log(sum) - (log_rhs_c + (nd - kd) * log_t);
    };

    double lo = 0.0;  // g(lo) < 0
    double hi = 1.0;  // g(hi) > 0
    const double g_lo = std::log(beta) - std::log(kd + 1.0);
    if (!(g_lo < 0.0)) throw NumericError("epsilon root not bracketed");
    // shrink hi away from 1 so log(t) stays finite
    hi = 1.0 - 1e-300;
    if (!(g(hi) > 0.0)) {
        hi = 1.0 - 1e-15;
        if (!(g(hi) > 0.0)) throw NumericError("epsilon root not bracketed");
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (g(mid) > 0.0 ? hi : lo) = mid;
        if (hi - lo <= 1e-13 * hi) break;
    }
    return std::min(1.0, hi);
}

}  // namespace ellcharge::certificate
