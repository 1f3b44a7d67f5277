#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>

#include <json.hpp>

#include "ellcharge/certificate/epsilon.hpp"
#include "ellcharge/certificate/set_cover.hpp"

namespace ellcharge::certificate {

/// PAC guarantee record: with confidence 1 - beta, a fresh behavior's windows lie
/// in the abstraction with probability at least 1 - epsilon.
struct ScenarioCertificate {
    std::int64_t n_samples = 0;
    int ell = 0;
    int horizon = 0;
    double beta = 1e-6;
    std::int64_t s_star = 0;
    Method method = Method::exact;
    double epsilon = 1.0;
    std::string abstraction_hash;
    std::string spec_hash;
    std::string created_at;

    /// Field ranges plus agreement of epsilon with its recomputation.
    [[nodiscard]] bool consistent(double rel_tol = 1e-9) const
    {
        if (n_samples < 1 || s_star < 1 || s_star > n_samples) return false;
        if (!(beta > 0 && beta < 1) || !(epsilon > 0 && epsilon <= 1)) return false;
        const double again = certificate::epsilon(n_samples, s_star, beta);
        return std::abs(again - epsilon) <= rel_tol * again;
    }

    [[nodiscard]] std::string statement() const
    {
        return "with confidence >= 1 - " + std::to_string(beta) + ", P(behavior in abstraction) >= 1 - " +
               std::to_string(epsilon);
    }
};

inline std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline ScenarioCertificate make_certificate(std::int64_t n, int ell, int horizon, double beta, const Complexity& c,
                                            std::string abstraction_hash = {}, std::string spec_hash = {})
{
    ScenarioCertificate cert;
    cert.n_samples = n;
    cert.ell = ell;
    cert.horizon = horizon;
    cert.beta = beta;
    cert.s_star = static_cast<std::int64_t>(c.s_star);
    cert.method = c.method;
    cert.epsilon = epsilon(n, cert.s_star, beta);
    cert.abstraction_hash = std::move(abstraction_hash);
    cert.spec_hash = std::move(spec_hash);
    cert.created_at = utc_now();
    return cert;
}

inline nlohmann::json to_json(const ScenarioCertificate& c)
{
    return {{"schema_version", 1},   {"kind", "ellcharge.certificate"},
            {"n", c.n_samples},      {"ell", c.ell},
            {"horizon", c.horizon},  {"beta", c.beta},
            {"s_star", c.s_star},    {"method", to_string(c.method)},
            {"epsilon", c.epsilon},  {"abstraction_hash", c.abstraction_hash},
            {"spec_hash", c.spec_hash}, {"created_at", c.created_at}};
}

inline ScenarioCertificate certificate_from_json(const nlohmann::json& j)
{
    if (j.value("kind", "") != "ellcharge.certificate" || j.value("schema_version", 0) != 1)
        throw ShapeError("not a version-1 certificate");
    ScenarioCertificate c;
    c.n_samples = j.at("n").get<std::int64_t>();
    c.ell = j.at("ell").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.beta = j.at("beta").get<double>();
    c.s_star = j.at("s_star").get<std::int64_t>();
    c.method = method_from_string(j.at("method").get<std::string>());
    c.epsilon = j.at("epsilon").get<double>();
    c.abstraction_hash = j.value("abstraction_hash", "");
    c.spec_hash = j.value("spec_hash", "");
    c.created_at = j.value("created_at", "");
    return c;
}

}  // namespace ellcharge::certificate
