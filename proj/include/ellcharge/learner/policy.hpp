#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "ellcharge/battery/cell.hpp"
#include "ellcharge/learner/nn.hpp"

namespace ellcharge::learner {

inline constexpr int observation_size = 5;

/// Affine input normalisation for (k, SOC, V, T [degC], I_prev): x = (z - offset) / scale.
struct Normalizer {
    std::array<double, observation_size> offset{0.0, 0.5, 3.6, 30.0, 5.0};
    std::array<double, observation_size> scale{100.0, 0.5, 0.6, 15.0, 5.0};

    [[nodiscard]] Vector apply(const battery::OutputMeasurement& z) const
    {
        const std::array<double, observation_size> raw{static_cast<double>(z.k), z.soc, z.volt, z.temp_c(),
                                                       z.i_prev};
        Vector x(observation_size);
        for (int i = 0; i < observation_size; ++i) x[i] = (raw[i] - offset[i]) / scale[i];
        return x;
    }

    friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Maps an unbounded pre-activation to [0, i_max].
inline double squash(double u, double i_max) noexcept { return i_max * 0.5 * (std::tanh(u) + 1.0); }

/// Output-feedback charging policy. The actor emits (mean, log_std) of a Gaussian
/// in pre-squash space; act() uses the mean only.
class Policy {
public:
    Policy() = default;
    Policy(Mlp actor, Normalizer norm, double i_max) : actor_(std::move(actor)), norm_(norm), i_max_(i_max)
    {
        if (actor_.input_size() != observation_size || actor_.output_size() != 2)
            throw ShapeError("policy actor must map 5 inputs to (mean, log_std)");
    }

    /// Zero-initialised actor with the given hidden sizes.
    static Policy zeros(std::vector<int> hidden = {64, 64}, double i_max = 10.0)
    {
        std::vector<int> sizes{observation_size};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(2);
        return Policy(Mlp(sizes, Activation::tanh), {}, i_max);
    }

    /// Policy that always applies `current`.
    static Policy constant(double current, double i_max = 10.0, std::vector<int> hidden = {4})
    {
        auto pol = zeros(std::move(hidden), i_max);
        const double frac = std::clamp(current / i_max, 0.0, 1.0);
        double u = 0.0;
        if (frac <= 0.0) u = -40.0;
        else if (frac >= 1.0) u = 40.0;
        else u = std::atanh(2.0 * frac - 1.0);
        pol.actor_.layers().back().b[0] = u;
        return pol;
    }

    [[nodiscard]] double pre_squash(const battery::OutputMeasurement& z) const
    {
        return actor_.forward(norm_.apply(z))(0, 0);
    }

    [[nodiscard]] double act(const battery::OutputMeasurement& z) const { return squash(pre_squash(z), i_max_); }

    [[nodiscard]] const Mlp& actor() const noexcept { return actor_; }
    [[nodiscard]] Mlp& actor() noexcept { return actor_; }
    [[nodiscard]] const Normalizer& normalizer() const noexcept { return norm_; }
    [[nodiscard]] double i_max() const noexcept { return i_max_; }
    [[nodiscard]] const std::string& config_hash() const noexcept { return config_hash_; }
    void set_config_hash(std::string h) { config_hash_ = std::move(h); }

    friend bool operator==(const Policy& a, const Policy& b)
    {
        return a.actor_ == b.actor_ && a.norm_ == b.norm_ && a.i_max_ == b.i_max_;
    }

private:
    Mlp actor_;
    Normalizer norm_;
    double i_max_ = 10.0;
    std::string config_hash_;
};

inline nlohmann::json mlp_to_json(const Mlp& net)
{
    nlohmann::json j;
    j["sizes"] = net.sizes();
    j["activation"] = net.activation() == Activation::tanh ? "tanh" : "relu";
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        std::vector<double> w(static_cast<std::size_t>(l.w.size()));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c)
                w[static_cast<std::size_t>(r * l.w.cols() + c)] = l.w(r, c);
        layers.push_back({{"rows", l.w.rows()}, {"cols", l.w.cols()}, {"w", w},
                          {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j)
{
    const auto act = j.at("activation").get<std::string>();
    if (act != "tanh" && act != "relu") throw ShapeError("unknown activation '" + act + "'");
    Mlp net(j.at("sizes").get<std::vector<int>>(), act == "tanh" ? Activation::tanh : Activation::relu);
    const auto& layers = j.at("layers");
    if (layers.size() != net.layers().size()) throw ShapeError("layer count does not match sizes");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = net.layers()[i];
        const auto w = layers[i].at("w").get<std::vector<double>>();
        const auto b = layers[i].at("b").get<std::vector<double>>();
        if (layers[i].at("rows").get<Eigen::Index>() != l.w.rows() ||
            layers[i].at("cols").get<Eigen::Index>() != l.w.cols() ||
            w.size() != static_cast<std::size_t>(l.w.size()) || b.size() != static_cast<std::size_t>(l.b.size()))
            throw ShapeError("layer tensor shape mismatch");
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = w[static_cast<std::size_t>(r * l.w.cols() + c)];
        for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b[r] = b[static_cast<std::size_t>(r)];
    }
    if (!net.finite()) throw ShapeError("non-finite weights in checkpoint");
    return net;
}

/// Self-describing checkpoint: layer shapes, weights, normalisation and squashing range.
inline nlohmann::json to_json(const Policy& p)
{
    return {{"schema_version", 1},
            {"kind", "ellcharge.policy"},
            {"actor", mlp_to_json(p.actor())},
            {"norm_offset", p.normalizer().offset},
            {"norm_scale", p.normalizer().scale},
            {"squash", {{"low_A", 0.0}, {"high_A", p.i_max()}}},
            {"train_config_hash", p.config_hash()}};
}

inline Policy policy_from_json(const nlohmann::json& j)
{
    if (j.value("kind", "") != "ellcharge.policy" || j.value("schema_version", 0) != 1)
        throw ShapeError("not a version-1 policy checkpoint");
    Normalizer n;
    n.offset = j.at("norm_offset").get<std::array<double, observation_size>>();
    n.scale = j.at("norm_scale").get<std::array<double, observation_size>>();
    Policy p(mlp_from_json(j.at("actor")), n, j.at("squash").at("high_A").get<double>());
    p.set_config_hash(j.value("train_config_hash", ""));
    return p;
}

}  // namespace ellcharge::learner
