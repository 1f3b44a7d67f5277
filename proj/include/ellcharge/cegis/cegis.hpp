#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ellcharge/abstraction/abstraction.hpp"
#include "ellcharge/battery/labeling.hpp"
#include "ellcharge/battery/sampling.hpp"
#include "ellcharge/certificate/certificate.hpp"
#include "ellcharge/io/config.hpp"
#include "ellcharge/io/files.hpp"
#include "ellcharge/io/hash.hpp"
#include "ellcharge/learner/envs.hpp"
#include "ellcharge/learner/sac.hpp"
#include "ellcharge/parallel.hpp"
#include "ellcharge/protocols/controller.hpp"
#include "ellcharge/verify/rwa.hpp"

namespace ellcharge::cegis {

namespace fs = std::filesystem;
using protocols::Rect;

/// Grid cells along voltage (gv) and temperature (gt).
struct GridShape {
    int gv = 1;
    int gt = 1;
    friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Uniform gv x gt tiling of the box; index = row(T) * gv + col(V).
inline std::vector<Rect> make_partition(int m, GridShape shape, const battery::InitialBox& box = {})
{
    if (shape.gv < 1 || shape.gt < 1 || shape.gv * shape.gt != m)
        throw DomainError("grid shape " + std::to_string(shape.gv) + "x" + std::to_string(shape.gt) +
                          " does not multiply to " + std::to_string(m));
    const double dv = (box.v_hi - box.v_lo) / shape.gv;
    const double dt = (box.t_hi_c - box.t_lo_c) / shape.gt;
    // Outer edges are taken from the box itself so that boundary membership is exact.
    auto edge = [](double lo, double hi, double d, int i, int n) { return i == n ? hi : lo + d * i; };
    std::vector<Rect> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int r = 0; r < shape.gt; ++r)
        for (int c = 0; c < shape.gv; ++c)
            out.push_back({edge(box.v_lo, box.v_hi, dv, c, shape.gv), edge(box.v_lo, box.v_hi, dv, c + 1, shape.gv),
                           edge(box.t_lo_c, box.t_hi_c, dt, r, shape.gt),
                           edge(box.t_lo_c, box.t_hi_c, dt, r + 1, shape.gt)});
    return out;
}

inline bool inside(const Rect& inner, const Rect& outer, double tol = 1e-9)
{
    return inner.v_lo >= outer.v_lo - tol && inner.v_hi <= outer.v_hi + tol && inner.t_lo >= outer.t_lo - tol &&
           inner.t_hi <= outer.t_hi + tol;
}

/// For each new region, the unique old region containing it; nullopt if the
/// partitions do not nest.
inline std::optional<std::vector<std::size_t>> parents(const std::vector<Rect>& fine, const std::vector<Rect>& coarse)
{
    std::vector<std::size_t> out;
    for (const auto& f : fine) {
        std::size_t hits = 0;
        std::size_t at = 0;
        for (std::size_t i = 0; i < coarse.size(); ++i)
            if (inside(f, coarse[i])) {
                ++hits;
                at = i;
            }
        if (hits != 1) return std::nullopt;
        out.push_back(at);
    }
    return out;
}

struct CegisConfig {
    std::int64_t n_traj = 2000;
    int ell = 4;
    int horizon = 80;
    double beta = 1e-6;
    std::vector<int> schedule{1, 8, 16};
    std::vector<GridShape> shapes{{1, 1}, {4, 2}, {4, 4}};
    int max_iterations = 3;
    bool refine_failing_only = false;
    std::uint64_t seed = 1;
    unsigned jobs = 0;  // 0 = hardware parallelism; never part of the content hash
    battery::InitialBox box{};
    learner::TrainConfig train = learner::desk_train_config();
    learner::RewardConfig reward{};

    void validate() const
    {
        if (n_traj < 1) throw ConfigError("n_traj must be positive");
        if (ell < 2 || ell > horizon) throw ConfigError("ell must satisfy 2 <= ell <= horizon");
        if (!(beta > 0 && beta < 1)) throw ConfigError("beta must lie in (0, 1)");
        if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
        if (schedule.empty() || schedule.front() != 1) throw ConfigError("partition schedule must start at 1");
        for (std::size_t i = 1; i < schedule.size(); ++i)
            if (schedule[i] <= schedule[i - 1]) throw ConfigError("partition schedule must be strictly increasing");
        if (shapes.size() != schedule.size()) throw ConfigError("one grid shape per schedule entry is required");
        for (std::size_t i = 0; i < schedule.size(); ++i)
            if (shapes[i].gv < 1 || shapes[i].gt < 1 || shapes[i].gv * shapes[i].gt != schedule[i])
                throw ConfigError("grid shape " + std::to_string(i) + " does not multiply to its schedule entry");
        if (static_cast<std::size_t>(max_iterations) > schedule.size())
            throw ConfigError("max_iterations exceeds the partition schedule length");
        if (!(box.v_lo < box.v_hi && box.t_lo_c < box.t_hi_c)) throw ConfigError("initial box is empty");
        try {
            train.validate();
            reward.validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
};

inline nlohmann::json to_json(const CegisConfig& c)
{
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& s : c.shapes) shapes.push_back({s.gv, s.gt});
    return {{"n_traj", c.n_traj},
            {"ell", c.ell},
            {"horizon", c.horizon},
            {"beta", c.beta},
            {"schedule", c.schedule},
            {"grid_shapes", shapes},
            {"max_iterations", c.max_iterations},
            {"refine_failing_only", c.refine_failing_only},
            {"seed", c.seed},
            {"initial_box", {{"v_lo_V", c.box.v_lo}, {"v_hi_V", c.box.v_hi}, {"t_lo_C", c.box.t_lo_c}, {"t_hi_C", c.box.t_hi_c}}},
            {"training", learner::to_json(c.train)},
            {"reward", learner::to_json(c.reward)}};
}

inline CegisConfig cegis_config_from_json(const nlohmann::json& j)
{
    CegisConfig c;
    io::Fields f(j, "cegis");
    f.get("n_traj", c.n_traj);
    f.get("ell", c.ell);
    f.get("horizon", c.horizon);
    f.get("beta", c.beta);
    f.get("schedule", c.schedule);
    if (f.has("grid_shapes")) {
        c.shapes.clear();
        for (const auto& s : f.child("grid_shapes")) {
            if (!s.is_array() || s.size() != 2) throw ConfigError("cegis.grid_shapes entries must be [gv, gt]");
            c.shapes.push_back({s[0].get<int>(), s[1].get<int>()});
        }
    }
    f.get("max_iterations", c.max_iterations);
    f.get("refine_failing_only", c.refine_failing_only);
    f.get("seed", c.seed);
    if (f.has("initial_box")) {
        io::Fields b(f.child("initial_box"), "cegis.initial_box");
        b.get("v_lo_V", c.box.v_lo);
        b.get("v_hi_V", c.box.v_hi);
        b.get("t_lo_C", c.box.t_lo_c);
        b.get("t_hi_C", c.box.t_hi_c);
        b.finish();
    }
    if (f.has("training")) c.train = learner::train_config_from_json(f.child("training"));
    if (f.has("reward")) c.reward = learner::reward_config_from_json(f.child("reward"));
    f.finish();
    c.validate();
    return c;
}

/// One verification rollout, reduced to what the loop needs.
struct Sample {
    std::uint64_t id = 0;
    std::uint64_t seed = 0;
    double v0 = 0.0;    // V
    double t0_c = 0.0;  // degC
    std::size_t region = 0;
    std::string terminal;
    abstraction::Word word;
};

/// Learner and simulator the loop is parameterised over.
struct Hooks {
    abstraction::Alphabet alphabet;
    std::function<learner::Policy(const Rect& region, std::uint64_t train_seed)> learn;
    /// Must fill v0, t0_c, region, terminal and a word of exactly `horizon` symbols.
    std::function<Sample(std::uint64_t seed, const protocols::SwitchedController& ctrl, int horizon)> simulate;
};

/// SAC on the battery environment restricted to each region, and closed-loop
/// rollouts on freshly sampled cells.
inline Hooks battery_hooks(const CegisConfig& cfg)
{
    Hooks h;
    h.alphabet = abstraction::Alphabet(battery::label_names());
    h.learn = [train = cfg.train, reward = cfg.reward](const Rect& r, std::uint64_t seed) {
        learner::BatteryEnv env(battery::InitialBox{r.v_lo, r.v_hi, r.t_lo, r.t_hi}, reward);
        auto tc = train;
        tc.seed = seed;
        learner::SacAgent agent(tc, env.i_max());
        try {
            agent.train(env);
        } catch (const learner::DivergenceError& e) {
            return learner::policy_from_json(e.checkpoint());
        }
        return agent.policy();
    };
    h.simulate = [reward = cfg.reward](std::uint64_t seed, const protocols::SwitchedController& ctrl, int horizon) {
        battery::SamplingOptions so;
        so.box = ctrl.box;
        const auto cell = battery::sample_cell(seed, so);
        protocols::RolloutOptions ro;
        ro.reward = reward;
        const auto tr = protocols::rollout(cell, ctrl, horizon, ro);
        Sample s;
        s.v0 = tr.samples.front().z.volt;
        s.t0_c = tr.samples.front().z.temp_c();
        s.region = protocols::select_index(ctrl, tr.samples.front().z);
        s.terminal = battery::to_string(tr.terminal);
        s.word = tr.word;
        return s;
    };
    return h;
}

/// Seed of the training run for region `r` of iteration `j` (lower seed half).
inline std::uint64_t region_train_seed(std::uint64_t base, int j, std::size_t r)
{
    return learner::training_seed(learner::mix_seed(base, 0x7a11), learner::mix_seed(static_cast<std::uint64_t>(j), r));
}

/// Seed of verification draw `i` of iteration `j` (upper seed half).
inline std::uint64_t verification_seed(std::uint64_t base, int j, std::uint64_t i)
{
    return learner::mix_seed(learner::mix_seed(base, 0x5eed0000ULL + static_cast<std::uint64_t>(j)), i) |
           (std::uint64_t{1} << 63);
}

/// Budget the abstraction can witness: paths of an H-long word visit H - ell + 1
/// windows, so budgets beyond H - ell would rest on unobserved steps.
inline int check_horizon(int spec_horizon, int word_length, int ell)
{
    return std::max(0, std::min(spec_horizon, word_length - ell));
}

struct IterationRecord {
    int iteration = 0;
    int m = 1;
    GridShape shape{};
    std::vector<Rect> partition;
    bool nested = true;
    std::vector<std::size_t> retrained;
    std::string controller_id;
    std::int64_t n_traj = 0;
    std::size_t n_states = 0;
    std::size_t n_initial = 0;
    std::size_t n_edges = 0;
    std::size_t s_star = 0;
    certificate::Method method = certificate::Method::exact;
    double epsilon = 1.0;
    int check_horizon = 0;
    bool holds = false;
    std::size_t n_counterexample_states = 0;
    std::vector<std::uint64_t> counterexample_ids;
    std::vector<std::pair<double, double>> counterexample_points;  // (V0, T0)
    std::map<std::string, std::string> artifacts;                  // relative path -> hash
};

struct CegisRecord {
    std::string config_hash;
    std::string spec_hash;
    std::string status = "running";  // running | certified | synthesis-failed
    std::vector<IterationRecord> iterations;
};

inline nlohmann::json to_json(const Rect& r) { return {r.v_lo, r.v_hi, r.t_lo, r.t_hi}; }

inline Rect rect_from_json(const nlohmann::json& j)
{
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

inline nlohmann::json to_json(const IterationRecord& it)
{
    nlohmann::json part = nlohmann::json::array();
    for (const auto& r : it.partition) part.push_back(to_json(r));
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [v, t] : it.counterexample_points) pts.push_back({v, t});
    return {{"iteration", it.iteration},
            {"m", it.m},
            {"grid_shape", {it.shape.gv, it.shape.gt}},
            {"partition", part},
            {"nested", it.nested},
            {"retrained", it.retrained},
            {"controller_id", it.controller_id},
            {"n_traj", it.n_traj},
            {"n_states", it.n_states},
            {"n_initial", it.n_initial},
            {"n_edges", it.n_edges},
            {"s_star", it.s_star},
            {"s_star_method", certificate::to_string(it.method)},
            {"epsilon", it.epsilon},
            {"check_horizon", it.check_horizon},
            {"holds", it.holds},
            {"n_counterexample_states", it.n_counterexample_states},
            {"n_counterexamples", it.counterexample_ids.size()},
            {"counterexample_ids", it.counterexample_ids},
            {"counterexample_points", pts},
            {"artifacts", it.artifacts}};
}

inline IterationRecord iteration_from_json(const nlohmann::json& j)
{
    IterationRecord it;
    it.iteration = j.at("iteration").get<int>();
    it.m = j.at("m").get<int>();
    it.shape = {j.at("grid_shape").at(0).get<int>(), j.at("grid_shape").at(1).get<int>()};
    for (const auto& r : j.at("partition")) it.partition.push_back(rect_from_json(r));
    it.nested = j.at("nested").get<bool>();
    it.retrained = j.at("retrained").get<std::vector<std::size_t>>();
    it.controller_id = j.at("controller_id").get<std::string>();
    it.n_traj = j.at("n_traj").get<std::int64_t>();
    it.n_states = j.at("n_states").get<std::size_t>();
    it.n_initial = j.at("n_initial").get<std::size_t>();
    it.n_edges = j.at("n_edges").get<std::size_t>();
    it.s_star = j.at("s_star").get<std::size_t>();
    it.method = certificate::method_from_string(j.at("s_star_method").get<std::string>());
    it.epsilon = j.at("epsilon").get<double>();
    it.check_horizon = j.at("check_horizon").get<int>();
    it.holds = j.at("holds").get<bool>();
    it.n_counterexample_states = j.at("n_counterexample_states").get<std::size_t>();
    it.counterexample_ids = j.at("counterexample_ids").get<std::vector<std::uint64_t>>();
    for (const auto& p : j.at("counterexample_points"))
        it.counterexample_points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    it.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    return it;
}

inline nlohmann::json to_json(const CegisRecord& r)
{
    nlohmann::json its = nlohmann::json::array();
    for (const auto& it : r.iterations) its.push_back(to_json(it));
    return {{"schema_version", 1},       {"kind", "ellcharge.cegis_record"}, {"config_hash", r.config_hash},
            {"spec_hash", r.spec_hash}, {"status", r.status},               {"iterations", its}};
}

inline CegisRecord record_from_json(const nlohmann::json& j)
{
    if (j.value("kind", "") != "ellcharge.cegis_record" || j.value("schema_version", 0) != 1)
        throw IntegrityError("not a version-1 CEGIS record");
    try {
        CegisRecord r;
        r.config_hash = j.at("config_hash").get<std::string>();
        r.spec_hash = j.at("spec_hash").get<std::string>();
        r.status = j.at("status").get<std::string>();
        for (const auto& it : j.at("iterations")) r.iterations.push_back(iteration_from_json(it));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed CEGIS record: ") + e.what());
    }
}

/// Hash identifying a switched controller: partition plus every policy.
inline std::string controller_id(const protocols::SwitchedController& c)
{
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < c.size(); ++i) j.push_back({to_json(c.partition[i]), learner::to_json(c.policies[i])});
    return io::content_hash(j.dump());
}

// ---- trace files -----------------------------------------------------------

inline std::string traces_csv(const std::vector<Sample>& samples, const abstraction::Alphabet& a)
{
    std::ostringstream out;
    out.precision(17);
    out << "sample_id,seed,v0_V,t0_C,region,terminal,word\n";
    for (const auto& s : samples) {
        out << s.id << ',' << s.seed << ',' << s.v0 << ',' << s.t0_c << ',' << s.region << ',' << s.terminal << ',';
        for (std::size_t k = 0; k < s.word.size(); ++k) out << (k ? " " : "") << a.symbol(s.word[k]);
        out << '\n';
    }
    return out.str();
}

inline std::vector<Sample> parse_traces_csv(const std::string& text, const abstraction::Alphabet& a)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "sample_id,seed,v0_V,t0_C,region,terminal,word")
        throw IntegrityError("trace file has an unexpected header");
    std::vector<Sample> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::string col;
        std::istringstream ls(line);
        while (std::getline(ls, col, ',')) cols.push_back(col);
        if (cols.size() != 7) throw IntegrityError("trace row with " + std::to_string(cols.size()) + " columns");
        Sample s;
        try {
            s.id = std::stoull(cols[0]);
            s.seed = std::stoull(cols[1]);
            s.v0 = std::stod(cols[2]);
            s.t0_c = std::stod(cols[3]);
            s.region = std::stoull(cols[4]);
            s.terminal = cols[5];
            std::istringstream ws(cols[6]);
            for (std::string sym; ws >> sym;) s.word.push_back(a.index_of(sym));
        } catch (const std::exception& e) {
            throw IntegrityError(std::string("bad trace row: ") + e.what());
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---- the loop --------------------------------------------------------------

struct RunOptions {
    std::optional<fs::path> dir;  // persist artifacts here when set
    bool resume = false;          // continue from the record in `dir`
    std::function<void(const std::string&)> log;
};

struct CegisResult {
    bool certified = false;
    protocols::SwitchedController controller;
    std::optional<certificate::ScenarioCertificate> certificate;
    CegisRecord record;
    abstraction::Abstraction abstraction;  // of the last iteration
    verify::VerificationResult verification;
    std::vector<Sample> samples;          // of the last iteration
    std::vector<Sample> counterexamples;  // of the last iteration
};

namespace detail {

inline std::string iter_dir(int j) { return "iter_" + std::to_string(j); }
inline std::string policy_path(int j, std::size_t r)
{
    return iter_dir(j) + "/policies/region_" + std::to_string(r) + ".json";
}

/// Writes text under root/rel and records its hash.
inline void put(const fs::path& root, const std::string& rel, const std::string& text, IterationRecord& it)
{
    io::write_text(root / rel, text);
    it.artifacts[rel] = io::content_hash(text);
}

inline void put_gzip(const fs::path& root, const std::string& rel, const std::string& text, IterationRecord& it)
{
    io::write_gzip(root / rel, text);
    it.artifacts[rel] = io::content_hash(text);
}

/// Reads an artifact and checks it against the recorded hash.
inline std::string fetch(const fs::path& root, const std::string& rel, const IterationRecord& it)
{
    const auto h = it.artifacts.find(rel);
    if (h == it.artifacts.end()) throw IntegrityError("record lists no artifact " + rel);
    std::string text;
    try {
        text = rel.ends_with(".gz") ? io::read_gzip(root / rel) : io::read_text(root / rel);
    } catch (const Error& e) {
        throw IntegrityError("cannot read " + rel + ": " + e.what());
    }
    if (io::content_hash(text) != h->second) throw IntegrityError("artifact " + rel + " does not match its hash");
    return text;
}

inline nlohmann::json parse(const std::string& text, const std::string& what)
{
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(what + " is not valid JSON: " + e.what());
    }
}

inline protocols::SwitchedController load_controller(const fs::path& root, const IterationRecord& it,
                                                     const battery::InitialBox& box)
{
    protocols::SwitchedController c;
    c.box = box;
    c.partition = it.partition;
    for (std::size_t r = 0; r < it.partition.size(); ++r) {
        const auto rel = policy_path(it.iteration, r);
        try {
            c.policies.push_back(learner::policy_from_json(parse(fetch(root, rel, it), rel)));
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError(rel + ": " + e.what());
        }
    }
    if (controller_id(c) != it.controller_id) throw IntegrityError("controller id mismatch in " + iter_dir(it.iteration));
    return c;
}

}  // namespace detail

/// Loads the last iteration's samples from a run directory, checking hashes.
inline std::vector<Sample> load_samples(const fs::path& dir, const IterationRecord& it, const abstraction::Alphabet& a)
{
    return parse_traces_csv(detail::fetch(dir, detail::iter_dir(it.iteration) + "/traces.csv.gz", it), a);
}

/// Counterexample-guided loop: learn one policy per region, verify the switched
/// controller on fresh samples, refine the partition where it fails.
inline CegisResult run(const CegisConfig& cfg, const verify::RwaSpec& spec, const Hooks& hooks,
                       const RunOptions& opt = {})
{
    cfg.validate();
    spec.validate(hooks.alphabet.size());
    auto say = [&](const std::string& msg) {
        if (opt.log) opt.log(msg);
    };
    const auto cfg_json = to_json(cfg);
    const auto spec_json = verify::spec_to_json(spec, hooks.alphabet);

    CegisResult res;
    res.record.config_hash = io::content_hash(cfg_json.dump());
    res.record.spec_hash = io::content_hash(spec_json.dump());

    const bool persist = opt.dir.has_value();
    const fs::path root = persist ? *opt.dir : fs::path{};
    int start = 0;
    std::vector<std::pair<double, double>> last_points;

    if (persist && opt.resume && fs::exists(root / "record.json")) {
        auto rec = record_from_json(detail::parse(io::read_text(root / "record.json"), "record.json"));
        if (rec.config_hash != res.record.config_hash) throw IntegrityError("run directory belongs to another config");
        if (rec.spec_hash != res.record.spec_hash) throw IntegrityError("run directory belongs to another spec");
        for (std::size_t k = 0; k < rec.iterations.size(); ++k)
            if (rec.iterations[k].iteration != static_cast<int>(k)) throw IntegrityError("record iterations out of order");
        res.record = rec;
        if (!rec.iterations.empty()) {
            const auto& last = rec.iterations.back();
            res.controller = detail::load_controller(root, last, cfg.box);
            res.samples = load_samples(root, last, hooks.alphabet);
            auto [abs, alpha] = abstraction::abstraction_from_json(
                detail::parse(detail::fetch(root, detail::iter_dir(last.iteration) + "/abstraction.json", last),
                              "abstraction.json"));
            if (!(alpha == hooks.alphabet)) throw IntegrityError("stored abstraction uses another alphabet");
            res.abstraction = std::move(abs);
            auto check = spec;
            check.horizon = last.check_horizon;
            res.verification = verify::rwa_check(res.abstraction, check);
            if (res.verification.holds != last.holds) throw IntegrityError("stored verification outcome does not replay");
            last_points = last.counterexample_points;
            start = last.iteration + 1;
        }
        if (rec.status == "certified") {
            const auto cert = certificate::certificate_from_json(detail::parse(io::read_text(root / "certificate.json"),
                                                                                 "certificate.json"));
            const auto& arts = rec.iterations.back().artifacts;
            const auto h = arts.find(detail::iter_dir(start - 1) + "/abstraction.json");
            if (!cert.consistent() || h == arts.end() || cert.abstraction_hash != h->second)
                throw IntegrityError("certificate does not match the stored abstraction");
            res.certificate = cert;
            res.certified = true;
            say("run already certified");
            return res;
        }
        if (rec.status == "synthesis-failed") {
            say("run already finished without a certificate");
            return res;
        }
        say("resuming at iteration " + std::to_string(start));
    } else if (persist) {
        fs::create_directories(root);
        io::write_json(root / "config.json", {{"schema_version", 1}, {"kind", "ellcharge.cegis_config"}, {"cegis", cfg_json}});
        io::write_json(root / "spec.json", spec_json);
    }

    for (int j = start; j < cfg.max_iterations; ++j) {
        IterationRecord it;
        it.iteration = j;
        it.m = cfg.schedule[static_cast<std::size_t>(j)];
        it.shape = cfg.shapes[static_cast<std::size_t>(j)];
        it.partition = make_partition(it.m, it.shape, cfg.box);
        it.n_traj = cfg.n_traj;

        // Step 4: one agent per region; failing-only mode keeps policies of parents
        // without counterexamples.
        std::vector<learner::Policy> pols(it.partition.size());
        std::vector<char> retrain(it.partition.size(), 1);
        if (j > 0) {
            const auto par = parents(it.partition, res.controller.partition);
            it.nested = par.has_value();
            if (cfg.refine_failing_only && par) {
                std::vector<char> failing(res.controller.size(), 0);
                for (const auto& [v, t] : last_points)
                    for (std::size_t r = 0; r < res.controller.size(); ++r)
                        if (protocols::contains(res.controller.partition[r], v, t, cfg.box)) failing[r] = 1;
                for (std::size_t r = 0; r < pols.size(); ++r) {
                    retrain[r] = failing[(*par)[r]];
                    if (!retrain[r]) pols[r] = res.controller.policies[(*par)[r]];
                }
            }
        }
        for (std::size_t r = 0; r < pols.size(); ++r)
            if (retrain[r]) it.retrained.push_back(r);
        say("iteration " + std::to_string(j) + ": training " + std::to_string(it.retrained.size()) + " of " +
            std::to_string(pols.size()) + " regional policies");
        parallel_for(it.retrained.size(), cfg.jobs, [&](std::size_t k) {
            const auto r = it.retrained[k];
            pols[r] = hooks.learn(it.partition[r], region_train_seed(cfg.seed, j, r));
        });
        protocols::SwitchedController ctrl{cfg.box, it.partition, std::move(pols)};
        it.controller_id = controller_id(ctrl);

        // Step 1: fresh verification draws.
        const auto n = static_cast<std::size_t>(cfg.n_traj);
        std::vector<Sample> samples(n);
        parallel_for(n, cfg.jobs, [&](std::size_t i) {
            const auto seed = verification_seed(cfg.seed, j, i);
            auto s = hooks.simulate(seed, ctrl, cfg.horizon);
            if (s.word.size() != static_cast<std::size_t>(cfg.horizon))
                throw ShapeError("simulator returned a word of length " + std::to_string(s.word.size()));
            s.id = i;
            s.seed = seed;
            samples[i] = std::move(s);
        });

        // Build: per-worker builders joined sequentially.
        const std::size_t chunks = std::min<std::size_t>(resolve_jobs(cfg.jobs), n);
        std::vector<abstraction::AbstractionBuilder> parts(chunks, abstraction::AbstractionBuilder(hooks.alphabet.size(), cfg.ell));
        parallel_for(chunks, cfg.jobs, [&](std::size_t c) {
            for (std::size_t i = c; i < n; i += chunks) parts[c].add({samples[i].word, samples[i].id});
        });
        for (std::size_t c = 1; c < chunks; ++c) parts[0].merge(parts[c]);
        auto abs = parts[0].finish();
        std::vector<abstraction::Behavior> behaviors;
        behaviors.reserve(n);
        for (const auto& s : samples) behaviors.push_back({s.word, s.id});
        const auto cx = certificate::complexity(behaviors, cfg.ell);
        it.n_states = abs.size();
        it.n_initial = abs.initial().size();
        it.n_edges = abs.edge_count();
        it.s_star = cx.s_star;
        it.method = cx.method;
        it.epsilon = certificate::epsilon(cfg.n_traj, static_cast<std::int64_t>(cx.s_star), cfg.beta);

        // Step 2: verify.
        auto check = spec;
        check.horizon = check_horizon(spec.horizon, cfg.horizon, cfg.ell);
        it.check_horizon = check.horizon;
        auto vr = verify::rwa_check(abs, check);
        it.holds = vr.holds;
        it.n_counterexample_states = vr.counterexample_states.size();

        // Step 3: concrete counterexamples behind failing initial windows.
        std::map<std::uint64_t, Sample> registry;
        for (const auto& s : samples) registry.emplace(s.id, s);
        auto cex = verify::extract_counterexamples(vr, abs, registry);
        for (const auto& s : cex) {
            it.counterexample_ids.push_back(s.id);
            it.counterexample_points.emplace_back(s.v0, s.t0_c);
        }
        say("iteration " + std::to_string(j) + ": " + std::to_string(it.n_states) + " states, s*=" +
            std::to_string(it.s_star) + ", " + (vr.holds ? "holds" : std::to_string(cex.size()) + " counterexamples"));

        const auto abs_json = abstraction::to_json(abs, hooks.alphabet);
        const auto abs_text = abs_json.dump(2) + "\n";
        if (persist) {
            for (std::size_t r = 0; r < ctrl.size(); ++r)
                detail::put(root, detail::policy_path(j, r), learner::to_json(ctrl.policies[r]).dump() + "\n", it);
            detail::put_gzip(root, detail::iter_dir(j) + "/traces.csv.gz", traces_csv(samples, hooks.alphabet), it);
            detail::put(root, detail::iter_dir(j) + "/abstraction.json", abs_text, it);
            detail::put(root, detail::iter_dir(j) + "/verification.json", verify::to_json(vr).dump(2) + "\n", it);
        } else {
            it.artifacts[detail::iter_dir(j) + "/abstraction.json"] = io::content_hash(abs_text);
        }

        res.record.iterations.push_back(std::move(it));
        const auto& done = res.record.iterations.back();
        res.controller = std::move(ctrl);
        res.abstraction = std::move(abs);
        res.verification = std::move(vr);
        res.samples = std::move(samples);
        res.counterexamples = std::move(cex);
        last_points = done.counterexample_points;

        if (done.holds) {
            res.certified = true;
            res.certificate = certificate::make_certificate(cfg.n_traj, cfg.ell, cfg.horizon, cfg.beta, cx,
                                                            done.artifacts.at(detail::iter_dir(j) + "/abstraction.json"),
                                                            res.record.spec_hash);
            res.record.status = "certified";
            if (persist) io::write_json(root / "certificate.json", certificate::to_json(*res.certificate));
        } else if (j + 1 == cfg.max_iterations) {
            res.record.status = "synthesis-failed";
        }
        // The record is written last, so an interrupted iteration is simply redone.
        if (persist) io::write_json(root / "record.json", to_json(res.record));
        if (res.certified) break;
    }
    return res;
}

/// Battery pipeline with the default hooks and no persistence.
inline CegisResult run(const CegisConfig& cfg, const verify::RwaSpec& spec)
{
    return run(cfg, spec, battery_hooks(cfg));
}

}  // namespace ellcharge::cegis
