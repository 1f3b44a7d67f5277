#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ellcharge/io/config.hpp"
#include "ellcharge/io/hash.hpp"
#include "ellcharge/learner/nn.hpp"
#include "ellcharge/learner/policy.hpp"

namespace ellcharge::learner {

struct TrainConfig {
    std::int64_t total_steps = 200'000;
    std::int64_t replay_capacity = 200'000;
    int batch_size = 256;
    double gamma = 0.99;
    double tau = 0.005;
    double lr_actor = 3e-4;
    double lr_critic = 3e-4;
    double lr_alpha = 3e-4;
    double init_alpha = 0.1;
    bool auto_alpha = true;
    double target_entropy = -1.0;
    double reward_scale = 0.01;
    std::vector<int> hidden{64, 64};
    std::int64_t start_steps = 1000;    // uniform-random exploration before using the actor
    std::int64_t update_after = 500;
    int updates_per_step = 1;
    int max_episode_steps = 80;
    double control_interval_s = 15.0;
    std::int64_t eval_every = 0;  // 0 disables periodic evaluation logging
    std::uint64_t seed = 1;

    void validate() const
    {
        if (total_steps < 0 || replay_capacity < 1 || batch_size < 1 || updates_per_step < 1 ||
            max_episode_steps < 1 || start_steps < 0 || update_after < 0 || eval_every < 0)
            throw DomainError("training sizes must be positive");
        if (!(gamma > 0 && gamma < 1) || !(tau > 0 && tau <= 1)) throw DomainError("gamma and tau must lie in (0, 1)");
        if (!(lr_actor > 0 && lr_critic > 0 && lr_alpha > 0 && init_alpha >= 0 && reward_scale > 0))
            throw DomainError("learning rates and scales must be positive");
        if (control_interval_s != 15.0) throw DomainError("control interval is fixed to the 15 s environment step");
        if (hidden.empty()) throw DomainError("at least one hidden layer is required");
        for (int h : hidden)
            if (h < 1) throw DomainError("hidden sizes must be positive");
    }
};

inline nlohmann::json to_json(const TrainConfig& c)
{
    return {{"total_steps", c.total_steps},   {"replay_capacity", c.replay_capacity},
            {"batch_size", c.batch_size},     {"gamma", c.gamma},
            {"tau", c.tau},                   {"lr_actor", c.lr_actor},
            {"lr_critic", c.lr_critic},       {"lr_alpha", c.lr_alpha},
            {"init_alpha", c.init_alpha},     {"auto_alpha", c.auto_alpha},
            {"target_entropy", c.target_entropy}, {"reward_scale", c.reward_scale},
            {"hidden", c.hidden},             {"start_steps", c.start_steps},
            {"update_after", c.update_after}, {"updates_per_step", c.updates_per_step},
            {"max_episode_steps", c.max_episode_steps}, {"control_interval_s", c.control_interval_s},
            {"eval_every", c.eval_every},     {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j)
{
    TrainConfig c;
    io::Fields f(j, "training");
    f.get("total_steps", c.total_steps);
    f.get("replay_capacity", c.replay_capacity);
    f.get("batch_size", c.batch_size);
    f.get("gamma", c.gamma);
    f.get("tau", c.tau);
    f.get("lr_actor", c.lr_actor);
    f.get("lr_critic", c.lr_critic);
    f.get("lr_alpha", c.lr_alpha);
    f.get("init_alpha", c.init_alpha);
    f.get("auto_alpha", c.auto_alpha);
    f.get("target_entropy", c.target_entropy);
    f.get("reward_scale", c.reward_scale);
    f.get("hidden", c.hidden);
    f.get("start_steps", c.start_steps);
    f.get("update_after", c.update_after);
    f.get("updates_per_step", c.updates_per_step);
    f.get("max_episode_steps", c.max_episode_steps);
    f.get("control_interval_s", c.control_interval_s);
    f.get("eval_every", c.eval_every);
    f.get("seed", c.seed);
    f.finish();
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("training: ") + e.what());
    }
    return c;
}

/// Budget that fits a desk run: small networks, 100k environment steps.
inline TrainConfig desk_train_config()
{
    TrainConfig c;
    c.total_steps = 100'000;
    c.replay_capacity = 100'000;
    c.batch_size = 64;
    c.hidden = {32, 32};
    return c;
}

/// Divergence during training; carries the last finite policy.
class DivergenceError : public TrainingError {
public:
    DivergenceError(const std::string& what, nlohmann::json checkpoint)
        : TrainingError(what), checkpoint_(std::move(checkpoint)) {}
    [[nodiscard]] const nlohmann::json& checkpoint() const noexcept { return checkpoint_; }

private:
    nlohmann::json checkpoint_;
};

/// One environment transition as seen by the learner.
struct EnvStep {
    battery::OutputMeasurement z;
    double reward = 0.0;
    bool done = false;       // goal or failure, no bootstrapping
    bool truncated = false;  // time limit, bootstrapping continues
};

template <typename E>
concept Environment = requires(E e, std::uint64_t seed, double current) {
    { e.reset(seed) } -> std::convertible_to<battery::OutputMeasurement>;
    { e.step(current) } -> std::convertible_to<EnvStep>;
    { e.i_max() } -> std::convertible_to<double>;
};

/// SplitMix64 finaliser, used to derive independent seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
{
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Training episode seeds live in the lower half of the seed space; fresh
/// verification draws use the upper half.
inline std::uint64_t training_seed(std::uint64_t base, std::uint64_t episode) noexcept
{
    return mix_seed(base, episode) & ~(std::uint64_t{1} << 63);
}

struct Batch {
    Matrix obs;       // d x B
    Matrix act;       // 1 x B, squashed action in (-1, 1)
    Vector rew;       // B
    Matrix next_obs;  // d x B
    Vector done;      // B, 1 if terminal
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int obs_dim)
        : cap_(capacity), obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
          next_(obs_dim, static_cast<Eigen::Index>(capacity)), act_(static_cast<Eigen::Index>(capacity)),
          rew_(static_cast<Eigen::Index>(capacity)), done_(static_cast<Eigen::Index>(capacity))
    {
    }

    void add(const Vector& o, double a, double r, const Vector& o2, bool done)
    {
        const auto i = static_cast<Eigen::Index>(head_);
        obs_.col(i) = o;
        next_.col(i) = o2;
        act_[i] = a;
        rew_[i] = r;
        done_[i] = done ? 1.0 : 0.0;
        head_ = (head_ + 1) % cap_;
        size_ = std::min(size_ + 1, cap_);
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }

    Batch sample(std::mt19937_64& rng, int n) const
    {
        std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
        Batch b{Matrix(obs_.rows(), n), Matrix(1, n), Vector(n), Matrix(obs_.rows(), n), Vector(n)};
        for (int j = 0; j < n; ++j) {
            const auto i = static_cast<Eigen::Index>(pick(rng));
            b.obs.col(j) = obs_.col(i);
            b.next_obs.col(j) = next_.col(i);
            b.act(0, j) = act_[i];
            b.rew[j] = rew_[i];
            b.done[j] = done_[i];
        }
        return b;
    }

private:
    std::size_t cap_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    Matrix obs_;
    Matrix next_;
    Vector act_;
    Vector rew_;
    Vector done_;
};

inline constexpr double log_std_min = -5.0;
inline constexpr double log_std_max = 1.0;
inline constexpr double squash_eps = 1e-6;

/// Reparameterised actions a = tanh(mean + std * xi) with their log-densities.
struct ActionSample {
    Matrix act;   // 1 x B
    Vector logp;  // B
};

namespace detail {
inline double bounded_log_std(double raw) noexcept
{
    return log_std_min + 0.5 * (log_std_max - log_std_min) * (std::tanh(raw) + 1.0);
}
inline constexpr double half_log_two_pi = 0.91893853320467274178;
}  // namespace detail

inline ActionSample sample_actions(const Mlp& actor, const Matrix& obs, const Matrix& xi, MlpCache* cache = nullptr)
{
    const Matrix out = actor.forward(obs, cache);
    ActionSample s{Matrix(1, obs.cols()), Vector(obs.cols())};
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
        const double ls = detail::bounded_log_std(out(1, j));
        const double u = out(0, j) + std::exp(ls) * xi(0, j);
        const double a = std::tanh(u);
        s.act(0, j) = a;
        s.logp[j] = -0.5 * xi(0, j) * xi(0, j) - ls - detail::half_log_two_pi - std::log(1.0 - a * a + squash_eps);
    }
    return s;
}

inline Matrix critic_input(const Matrix& obs, const Matrix& act)
{
    Matrix x(obs.rows() + 1, obs.cols());
    x.topRows(obs.rows()) = obs;
    x.bottomRows(1) = act;
    return x;
}

/// Mean of 0.5 (Q(s, a) - y)^2; gradients are added into `g`.
inline double critic_loss(const Mlp& q, const Matrix& obs, const Matrix& act, const Vector& y, MlpGrads* g)
{
    MlpCache cache;
    const Matrix pred = q.forward(critic_input(obs, act), &cache);
    const double n = static_cast<double>(obs.cols());
    const Matrix diff = pred - y.transpose();
    if (g) q.backward(cache, diff / n, g);
    return 0.5 * diff.squaredNorm() / n;
}

/// Mean of alpha log pi(a|s) - min(Q1, Q2)(s, a) over reparameterised actions with
/// frozen noise `xi`; actor gradients are added into `g`.
inline double actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2, const Matrix& obs, const Matrix& xi,
                         double alpha, MlpGrads* g, Vector* logp_out = nullptr)
{
    MlpCache ac;
    const auto s = sample_actions(actor, obs, xi, &ac);
    const Matrix out = actor.forward(obs);
    MlpCache c1;
    MlpCache c2;
    const Matrix in = critic_input(obs, s.act);
    const Matrix v1 = q1.forward(in, &c1);
    const Matrix v2 = q2.forward(in, &c2);
    const auto B = obs.cols();
    const double n = static_cast<double>(B);
    double loss = 0.0;
    Matrix sel1 = Matrix::Zero(1, B);
    Matrix sel2 = Matrix::Zero(1, B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const bool first = v1(0, j) <= v2(0, j);
        loss += alpha * s.logp[j] - (first ? v1(0, j) : v2(0, j));
        (first ? sel1 : sel2)(0, j) = 1.0;
    }
    loss /= n;
    if (logp_out) *logp_out = s.logp;
    if (!g) return loss;

    // dQ/da through whichever critic was the minimum
    const Matrix gin1 = q1.backward(c1, sel1, nullptr);
    const Matrix gin2 = q2.backward(c2, sel2, nullptr);
    const auto arow = obs.rows();
    Matrix gout(2, B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const double a = s.act(0, j);
        const double dq_da = gin1(arow, j) + gin2(arow, j);
        const double da_du = 1.0 - a * a;
        const double dlogp_du = 2.0 * a * da_du / (1.0 - a * a + squash_eps);
        const double dl_du = (alpha * dlogp_du - dq_da * da_du) / n;
        const double ls = detail::bounded_log_std(out(1, j));
        const double dl_dls = (-alpha / n) + dl_du * std::exp(ls) * xi(0, j);
        const double th = std::tanh(out(1, j));
        gout(0, j) = dl_du;
        gout(1, j) = dl_dls * 0.5 * (log_std_max - log_std_min) * (1.0 - th * th);
    }
    actor.backward(ac, gout, g);
    return loss;
}

/// J(log alpha) = -log alpha * mean(log pi + target_entropy).
inline double alpha_loss(double log_alpha, const Vector& logp, double target_entropy, double* grad)
{
    const double m = (logp.array() + target_entropy).mean();
    if (grad) *grad = -m;
    return -log_alpha * m;
}

/// Soft actor-critic with twin critics, Polyak targets and automatic temperature.
class SacAgent {
public:
    SacAgent(TrainConfig cfg, double i_max, Normalizer norm = {})
        : cfg_(std::move(cfg)), norm_(norm), i_max_(i_max), rng_(cfg_.seed),
          buffer_(static_cast<std::size_t>(cfg_.replay_capacity), observation_size)
    {
        cfg_.validate();
        std::vector<int> a{observation_size};
        a.insert(a.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        a.push_back(2);
        std::vector<int> q{observation_size + 1};
        q.insert(q.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        q.push_back(1);
        actor_ = Mlp(a, Activation::tanh);
        q1_ = Mlp(q, Activation::tanh);
        q2_ = Mlp(q, Activation::tanh);
        std::mt19937_64 init(mix_seed(cfg_.seed, 0xac7));
        actor_.init(init, 0.01);
        q1_.init(init);
        q2_.init(init);
        q1_t_ = q1_;
        q2_t_ = q2_;
        opt_actor_ = Adam(actor_, cfg_.lr_actor);
        opt_q1_ = Adam(q1_, cfg_.lr_critic);
        opt_q2_ = Adam(q2_, cfg_.lr_critic);
        opt_alpha_ = ScalarAdam(cfg_.lr_alpha);
        log_alpha_ = std::log(std::max(cfg_.init_alpha, 1e-300));
        if (cfg_.init_alpha == 0.0) log_alpha_ = -std::numeric_limits<double>::infinity();
    }

    [[nodiscard]] Policy policy() const
    {
        Policy p(actor_, norm_, i_max_);
        p.set_config_hash(io::content_hash(to_json(cfg_).dump()));
        return p;
    }

    [[nodiscard]] double alpha() const noexcept { return std::exp(log_alpha_); }
    [[nodiscard]] const Mlp& actor() const noexcept { return actor_; }
    [[nodiscard]] const Mlp& q1() const noexcept { return q1_; }
    [[nodiscard]] const Mlp& q2() const noexcept { return q2_; }
    [[nodiscard]] const TrainConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const Normalizer& normalizer() const noexcept { return norm_; }
    [[nodiscard]] std::int64_t episodes() const noexcept { return episodes_; }

    /// One gradient step on critics, actor and temperature.
    void update(const Batch& b)
    {
        const auto B = b.obs.cols();
        const double alpha = this->alpha();
        Matrix xi(1, B);
        for (Eigen::Index j = 0; j < B; ++j) xi(0, j) = normal_(rng_);
        const auto next = sample_actions(actor_, b.next_obs, xi);
        const Matrix in = critic_input(b.next_obs, next.act);
        const Matrix t1 = q1_t_.forward(in);
        const Matrix t2 = q2_t_.forward(in);
        Vector y(B);
        for (Eigen::Index j = 0; j < B; ++j) {
            const double soft = std::min(t1(0, j), t2(0, j)) - (alpha > 0 ? alpha * next.logp[j] : 0.0);
            y[j] = b.rew[j] + cfg_.gamma * (1.0 - b.done[j]) * soft;
        }
        auto g1 = q1_.zero_grads();
        auto g2 = q2_.zero_grads();
        last_critic_loss_ = critic_loss(q1_, b.obs, b.act, y, &g1) + critic_loss(q2_, b.obs, b.act, y, &g2);
        opt_q1_.step(q1_, g1);
        opt_q2_.step(q2_, g2);

        for (Eigen::Index j = 0; j < B; ++j) xi(0, j) = normal_(rng_);
        auto ga = actor_.zero_grads();
        Vector logp;
        last_actor_loss_ = actor_loss(actor_, q1_, q2_, b.obs, xi, alpha, &ga, &logp);
        opt_actor_.step(actor_, ga);

        if (cfg_.auto_alpha) {
            double grad = 0.0;
            alpha_loss(log_alpha_, logp, cfg_.target_entropy, &grad);
            opt_alpha_.step(log_alpha_, grad);
            log_alpha_ = std::clamp(log_alpha_, -20.0, 5.0);
        }
        q1_t_.soft_update(q1_, cfg_.tau);
        q2_t_.soft_update(q2_, cfg_.tau);

        if (!std::isfinite(last_critic_loss_) || !std::isfinite(last_actor_loss_) || !actor_.finite() ||
            !q1_.finite() || !q2_.finite())
            throw DivergenceError("non-finite loss during training", to_json(last_good_));
    }

    /// Runs `total_steps` environment steps with interleaved updates.
    template <Environment Env>
    void train(Env& env)
    {
        last_good_ = policy();
        if (cfg_.total_steps == 0) return;
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        auto z = env.reset(training_seed(cfg_.seed, static_cast<std::uint64_t>(episodes_)));
        int ep_steps = 0;
        for (std::int64_t t = 0; t < cfg_.total_steps; ++t) {
            const Vector x = norm_.apply(z);
            double a = 0.0;
            if (t < cfg_.start_steps) {
                a = unif(rng_);
            } else {
                Matrix xi(1, 1);
                xi(0, 0) = normal_(rng_);
                a = sample_actions(actor_, x, xi).act(0, 0);
            }
            const double current = std::clamp(i_max_ * 0.5 * (a + 1.0), 0.0, i_max_);
            const EnvStep res = env.step(current);
            buffer_.add(x, a, res.reward * cfg_.reward_scale, norm_.apply(res.z), res.done);
            z = res.z;
            ++ep_steps;
            if (res.done || res.truncated || ep_steps >= cfg_.max_episode_steps) {
                ++episodes_;
                z = env.reset(training_seed(cfg_.seed, static_cast<std::uint64_t>(episodes_)));
                ep_steps = 0;
            }
            if (t >= cfg_.update_after && buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
                for (int u = 0; u < cfg_.updates_per_step; ++u) update(buffer_.sample(rng_, cfg_.batch_size));
                if ((t & 1023) == 0) last_good_ = policy();
            }
        }
    }

private:
    TrainConfig cfg_;
    Normalizer norm_;
    double i_max_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    ReplayBuffer buffer_;
    Mlp actor_, q1_, q2_, q1_t_, q2_t_;
    Adam opt_actor_, opt_q1_, opt_q2_;
    ScalarAdam opt_alpha_;
    double log_alpha_ = 0.0;
    std::int64_t episodes_ = 0;
    double last_critic_loss_ = 0.0;
    double last_actor_loss_ = 0.0;
    Policy last_good_;
};

/// Trains from scratch and returns the deterministic mean-action policy.
template <Environment Env>
Policy train(Env& env, const TrainConfig& cfg, Normalizer norm = {})
{
    SacAgent agent(cfg, env.i_max(), norm);
    agent.train(env);
    return agent.policy();
}

/// Sum of rewards of one deterministic episode.
template <Environment Env>
double evaluate_return(Env& env, const Policy& pol, std::uint64_t seed, int max_steps)
{
    auto z = env.reset(seed);
    double total = 0.0;
    for (int i = 0; i < max_steps; ++i) {
        const auto r = env.step(pol.act(z));
        total += r.reward;
        z = r.z;
        if (r.done || r.truncated) break;
    }
    return total;
}

}  // namespace ellcharge::learner
