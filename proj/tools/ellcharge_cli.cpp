// Command-line front end: simulate, benchmark-ccv, train, verify, cegis, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ellcharge/battery/labeling.hpp"
#include "ellcharge/battery/sampling.hpp"
#include "ellcharge/cegis/cegis.hpp"
#include "ellcharge/io/config.hpp"
#include "ellcharge/io/files.hpp"
#include "ellcharge/learner/envs.hpp"
#include "ellcharge/protocols/benchmark.hpp"
#include "ellcharge/protocols/cccv.hpp"
#include "ellcharge/protocols/controller.hpp"
#include "ellcharge/verify/rwa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ellcharge;

namespace {

constexpr int exit_config = 2;
constexpr int exit_simulation = 3;
constexpr int exit_no_certificate = 4;

/// Failure during a run (as opposed to a bad configuration).
struct RunFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 0;
    std::string out;
};

json load_config(const Globals& g)
{
    if (g.config.empty()) return json{{"schema_version", 1}};
    json j;
    try {
        j = json::parse(io::read_text(g.config));
    } catch (const json::exception& e) {
        throw ConfigError(g.config + ": " + e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    io::Fields f(j, "config");
    int version = 0;
    f.get("schema_version", version);
    if (version != 1) throw ConfigError("config schema_version must be 1");
    f.ignore({"simulate", "benchmark", "train", "training", "reward", "verification", "cegis"});
    f.finish();
    return j;
}

const json& section(const json& cfg, const char* key)
{
    static const json empty = json::object();
    return cfg.contains(key) ? cfg.at(key) : empty;
}

fs::path out_dir(const Globals& g, const char* fallback)
{
    return g.out.empty() ? fs::path(fallback) : fs::path(g.out);
}

battery::InitialBox read_box(const json& j, const std::string& where)
{
    battery::InitialBox b;
    io::Fields f(j, where);
    f.get("v_lo_V", b.v_lo);
    f.get("v_hi_V", b.v_hi);
    f.get("t_lo_C", b.t_lo_c);
    f.get("t_hi_C", b.t_hi_c);
    f.finish();
    if (!(b.v_lo < b.v_hi && b.t_lo_c < b.t_hi_c)) throw ConfigError(where + ": empty box");
    return b;
}

// ---- simulate ----------------------------------------------------------------

struct CellChoice {
    std::string kind = "standard";  // standard | sampled
    double soc0 = 0.01;
    double temp0_c = 25.0;
};

protocols::Cell make_cell(const CellChoice& c, std::uint64_t seed)
{
    if (c.kind == "sampled") return battery::sample_cell(seed);
    return battery::make_standard_cell(c.soc0, c.temp0_c);
}

int cmd_simulate(const Globals& g)
{
    const auto cfg = load_config(g);
    io::Fields f(section(cfg, "simulate"), "simulate");
    std::string protocol = "ccv";
    CellChoice cell;
    protocols::CcCvConfig ccv;
    double current = 0.0;
    std::int64_t steps = 240;
    std::string policy_file;
    double dt = 15.0;
    f.get("protocol", protocol);
    if (f.has("cell")) {
        io::Fields c(f.child("cell"), "simulate.cell");
        c.get("kind", cell.kind);
        c.get("soc0", cell.soc0);
        c.get("temp0_C", cell.temp0_c);
        c.finish();
        if (cell.kind != "standard" && cell.kind != "sampled")
            throw ConfigError("simulate.cell.kind must be 'standard' or 'sampled'");
    }
    f.get("i_cc_A", ccv.i_cc);
    f.get("v_cv_V", ccv.v_cv);
    f.get("i_cutoff_A", ccv.i_cutoff);
    f.get("soc_stop", ccv.soc_stop);
    f.get("current_A", current);
    f.get("steps", steps);
    f.get("policy_file", policy_file);
    f.get("dt_s", dt);
    f.finish();
    if (protocol != "ccv" && protocol != "constant-current" && protocol != "policy-file")
        throw ConfigError("simulate.protocol must be ccv, constant-current or policy-file");
    if (!(dt > 0)) throw ConfigError("simulate.dt_s must be positive");
    if (steps < 1) throw ConfigError("simulate.steps must be positive");
    if (protocol == "policy-file" && policy_file.empty()) throw ConfigError("simulate.policy_file is required");

    std::optional<learner::Policy> policy;
    if (protocol == "policy-file") {
        try {
            policy = learner::policy_from_json(io::read_json(policy_file));
        } catch (const std::exception& e) {
            throw ConfigError("policy file: " + std::string(e.what()));
        }
    }

    protocols::Trace tr;
    try {
        const auto c = make_cell(cell, g.seed.value_or(1));
        if (protocol == "ccv") {
            tr = protocols::run_ccv(c, ccv, dt);
        } else if (protocol == "constant-current") {
            const auto& [p, s0] = c;
            battery::Envelope env;
            env.max_steps = s0.k + steps;
            tr.dt = dt;
            tr.samples.push_back(protocols::make_sample(s0, p));
            auto s = s0;
            while (s.terminal == battery::Terminal::running) {
                s = battery::step(s, p, current, dt, env);
                tr.samples.push_back(protocols::make_sample(s, p));
                tr.currents.push_back(current);
            }
            tr.terminal = s.terminal;
        } else {
            // One region covering every initial condition.
            const battery::InitialBox all{-1e9, 1e9, -1e9, 1e9};
            protocols::SwitchedController ctrl{all, {{all.v_lo, all.v_hi, all.t_lo_c, all.t_hi_c}}, {*policy}};
            protocols::RolloutOptions ro;
            ro.dt = dt;
            tr = protocols::rollout(c, ctrl, static_cast<int>(steps), ro);
        }
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    } catch (const Error& e) {
        throw RunFailure(e.what());
    }

    const auto dir = out_dir(g, ".");
    fs::create_directories(dir);
    std::ostringstream csv;
    protocols::write_trace_csv(csv, tr);
    io::write_text(dir / "trace.csv", csv.str());
    std::cout << "terminal=" << battery::to_string(tr.terminal) << " steps=" << tr.transitions()
              << " trace=" << (dir / "trace.csv").string() << "\n";
    return 0;
}

// ---- benchmark-ccv -------------------------------------------------------------

int cmd_benchmark(const Globals& g)
{
    const auto cfg = load_config(g);
    io::Fields f(section(cfg, "benchmark"), "benchmark");
    std::vector<double> grid{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int n_sampled = 0;
    CellChoice cell;
    protocols::CcCvConfig base;
    double dt = 15.0;
    f.get("i_cc_grid_A", grid);
    f.get("sampled_cells", n_sampled);
    f.get("soc0", cell.soc0);
    f.get("temp0_C", cell.temp0_c);
    f.get("soc_stop", base.soc_stop);
    f.get("i_cutoff_A", base.i_cutoff);
    f.get("dt_s", dt);
    f.finish();
    if (grid.empty()) throw ConfigError("benchmark.i_cc_grid_A is empty");
    if (n_sampled < 0) throw ConfigError("benchmark.sampled_cells must be nonnegative");

    std::vector<protocols::Cell> cells;
    if (n_sampled == 0) {
        cells.push_back(battery::make_standard_cell(cell.soc0, cell.temp0_c));
    } else {
        const auto seed = g.seed.value_or(1);
        for (int i = 0; i < n_sampled; ++i) cells.push_back(battery::sample_cell(learner::mix_seed(seed, i)));
    }
    std::vector<protocols::SweepPoint> pts;
    try {
        pts = protocols::benchmark_ccv(grid, cells, base, dt);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    } catch (const Error& e) {
        throw RunFailure(e.what());
    }
    const auto tr = protocols::trends(pts);

    const auto dir = out_dir(g, ".");
    fs::create_directories(dir);
    std::ostringstream csv;
    protocols::write_benchmark_csv(csv, pts);
    io::write_text(dir / "benchmark.csv", csv.str());
    const json summary{{"schema_version", 1},
                       {"kind", "ellcharge.benchmark_summary"},
                       {"points", pts.size()},
                       {"cells", cells.size()},
                       {"t_charge_nonincreasing", tr.t_charge_nonincreasing},
                       {"t_max_nondecreasing", tr.t_max_nondecreasing},
                       {"q_loss_interior_minimum", tr.q_loss_interior_minimum},
                       {"q_loss_argmin_A", pts[tr.q_loss_argmin].i_cc}};
    io::write_json(dir / "summary.json", summary);
    std::cout << csv.str();
    auto flag = [](bool b) { return b ? "pass" : "fail"; };
    std::cout << "t_charge_nonincreasing=" << flag(tr.t_charge_nonincreasing)
              << " t_max_nondecreasing=" << flag(tr.t_max_nondecreasing)
              << " q_loss_interior_minimum=" << flag(tr.q_loss_interior_minimum) << "\n";
    return 0;
}

// ---- train -----------------------------------------------------------------------

int cmd_train(const Globals& g)
{
    const auto cfg = load_config(g);
    auto tc = cfg.contains("training") ? learner::train_config_from_json(cfg.at("training")) : learner::TrainConfig{};
    const auto rc = cfg.contains("reward") ? learner::reward_config_from_json(cfg.at("reward")) : learner::RewardConfig{};
    battery::InitialBox box;
    int eval_episodes = 20;
    io::Fields f(section(cfg, "train"), "train");
    if (f.has("initial_box")) box = read_box(f.child("initial_box"), "train.initial_box");
    f.get("eval_episodes", eval_episodes);
    f.finish();
    if (eval_episodes < 0) throw ConfigError("train.eval_episodes must be nonnegative");
    if (g.seed) tc.seed = *g.seed;

    learner::BatteryEnv env(box, rc);
    learner::Policy pol;
    try {
        learner::SacAgent agent(tc, env.i_max());
        agent.train(env);
        pol = agent.policy();
    } catch (const learner::DivergenceError& e) {
        std::cerr << "warning: " << e.what() << "; keeping the last finite policy\n";
        pol = learner::policy_from_json(e.checkpoint());
    } catch (const Error& e) {
        throw RunFailure(e.what());
    }
    const auto dir = out_dir(g, ".");
    fs::create_directories(dir);
    io::write_json(dir / "policy.json", learner::to_json(pol));

    std::ostringstream csv;
    csv << "episode,seed,return\n" << std::setprecision(10);
    double mean = 0.0;
    for (int e = 0; e < eval_episodes; ++e) {
        const auto seed = cegis::verification_seed(tc.seed, -1, static_cast<std::uint64_t>(e));
        const double r = learner::evaluate_return(env, pol, seed, tc.max_episode_steps);
        csv << e << ',' << seed << ',' << r << '\n';
        mean += r / eval_episodes;
    }
    io::write_text(dir / "evaluation.csv", csv.str());
    std::cout << "policy=" << (dir / "policy.json").string() << " mean_return=" << mean << "\n";
    return 0;
}

// ---- verify ----------------------------------------------------------------------

int cmd_verify(const Globals& g, const std::string& abs_path, const std::string& spec_path,
               const std::vector<std::string>& hitting)
{
    abstraction::Abstraction abs;
    abstraction::Alphabet alpha;
    verify::RwaSpec spec;
    try {
        std::tie(abs, alpha) = abstraction::abstraction_from_json(io::read_json(abs_path));
        spec = verify::spec_from_json(io::read_json(spec_path), alpha);
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const auto r = verify::rwa_check(abs, spec);
    auto j = verify::to_json(r);
    std::vector<std::string> windows;
    for (int s : r.counterexample_states) windows.push_back(abstraction::window_string(abs.states()[static_cast<std::size_t>(s)], alpha, " "));
    j["counterexample_windows"] = windows;
    std::cout << "holds=" << (r.holds ? "true" : "false") << " states=" << abs.size()
              << " initial=" << r.checked_initial.size() << " counterexamples=" << r.counterexample_states.size() << "\n";
    for (const auto& w : windows) std::cout << "counterexample " << w << "\n";
    if (!hitting.empty()) {
        const auto target = verify::match_globs(alpha, hitting);
        const auto t = verify::worst_case_hitting_time(abs, target, spec.horizon);
        j["hitting"] = {{"target", hitting}, {"cap", spec.horizon}};
        j["hitting"]["steps"] = t ? json(*t) : json(nullptr);
        std::cout << "hitting=" << (t ? std::to_string(*t) : std::string("none")) << "\n";
    }
    if (!g.out.empty()) {
        fs::create_directories(g.out);
        io::write_json(fs::path(g.out) / "verification.json", j);
    }
    return 0;
}

// ---- cegis -----------------------------------------------------------------------

std::string certificate_line(const certificate::ScenarioCertificate& c, std::size_t states)
{
    std::ostringstream s;
    s << std::setprecision(6) << "eps=" << c.epsilon << " beta=" << c.beta << " s_star=" << c.s_star
      << " states=" << states;
    return s.str();
}

/// Spec for the battery alphabet from the "verification" section, defaulting to
/// goal SOC symbol 't' with safe voltage and temperature within H steps.
verify::RwaSpec read_spec(const json& cfg, const abstraction::Alphabet& alpha, int horizon)
{
    if (!cfg.contains("verification")) return verify::battery_spec(horizon);
    auto j = cfg.at("verification");
    if (!j.is_object()) throw ConfigError("verification must be an object");
    j["schema_version"] = 1;
    if (!j.contains("horizon")) j["horizon"] = horizon;
    try {
        return verify::spec_from_json(j, alpha);
    } catch (const Error& e) {
        throw ConfigError(std::string("verification: ") + e.what());
    }
}

int cmd_cegis(const Globals& g, const std::string& resume)
{
    json cfg;
    fs::path dir;
    if (!resume.empty()) {
        dir = resume;
        if (!fs::exists(dir / "config.json")) throw RunFailure("not a run directory: " + resume);
        try {
            const auto stored = io::read_json(dir / "config.json");
            cfg = {{"schema_version", 1}, {"cegis", stored.at("cegis")}};
            if (fs::exists(dir / "spec.json")) {
                auto s = io::read_json(dir / "spec.json");
                s.erase("schema_version");
                cfg["verification"] = s;
            }
        } catch (const std::exception& e) {
            throw RunFailure(std::string("corrupted run directory: ") + e.what());
        }
    } else {
        cfg = load_config(g);
        dir = out_dir(g, "cegis_run");
    }
    cegis::CegisConfig cc;
    verify::RwaSpec spec;
    const abstraction::Alphabet alpha(battery::label_names());
    try {
        cc = cegis::cegis_config_from_json(section(cfg, "cegis"));
        spec = read_spec(cfg, alpha, cc.horizon);
    } catch (const ConfigError& e) {
        if (!resume.empty()) throw RunFailure(std::string("corrupted run directory: ") + e.what());
        throw;
    }
    if (g.seed && resume.empty()) cc.seed = *g.seed;
    cc.jobs = g.jobs;
    const auto hooks = cegis::battery_hooks(cc);
    if (resume.empty() && fs::exists(dir / "record.json"))
        throw ConfigError("output directory already holds a run; use --resume");

    cegis::RunOptions opt;
    opt.dir = dir;
    opt.resume = !resume.empty();
    opt.log = [](const std::string& m) { std::cerr << m << "\n"; };
    cegis::CegisResult res;
    try {
        res = cegis::run(cc, spec, hooks, opt);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw RunFailure(e.what());
    }
    if (!res.certified) {
        std::cout << "synthesis-failed iterations=" << res.record.iterations.size()
                  << " counterexamples=" << res.counterexamples.size() << "\n";
        return exit_no_certificate;
    }
    std::cout << certificate_line(*res.certificate, res.abstraction.size()) << "\n";
    return 0;
}

// ---- report ----------------------------------------------------------------------

int cmd_report(const Globals& g, const std::string& run_dir)
{
    const fs::path dir = run_dir;
    cegis::CegisRecord rec;
    try {
        rec = cegis::record_from_json(cegis::detail::parse(io::read_text(dir / "record.json"), "record.json"));
    } catch (const Error& e) {
        throw RunFailure(e.what());
    }
    const abstraction::Alphabet alpha(battery::label_names());
    std::ostringstream csv;
    csv << std::setprecision(10)
        << "iteration,m,grid_v,grid_t,nested,retrained,n_states,n_initial,n_edges,s_star,s_star_method,epsilon,"
           "check_horizon,holds,n_counterexamples\n";
    for (const auto& it : rec.iterations) {
        for (const auto& [rel, hash] : it.artifacts) (void)cegis::detail::fetch(dir, rel, it);
        csv << it.iteration << ',' << it.m << ',' << it.shape.gv << ',' << it.shape.gt << ',' << it.nested << ','
            << it.retrained.size() << ',' << it.n_states << ',' << it.n_initial << ',' << it.n_edges << ','
            << it.s_star << ',' << certificate::to_string(it.method) << ',' << it.epsilon << ',' << it.check_horizon
            << ',' << it.holds << ',' << it.counterexample_ids.size() << '\n';
    }
    json summary{{"schema_version", 1}, {"kind", "ellcharge.report"}, {"status", rec.status},
                 {"iterations", rec.iterations.size()}};
    std::cout << csv.str() << "status=" << rec.status << "\n";
    if (!rec.iterations.empty()) {
        const auto& last = rec.iterations.back();
        const auto rel = "iter_" + std::to_string(last.iteration) + "/abstraction.json";
        auto [abs, a] = abstraction::abstraction_from_json(cegis::detail::parse(cegis::detail::fetch(dir, rel, last), rel));
        json hits = json::object();
        for (const std::string pat : {"[g-t]??", "[o-t]??"}) {
            const auto t = verify::worst_case_hitting_time(abs, verify::match_globs(a, {pat}), last.check_horizon);
            hits[pat] = t ? json(*t) : json(nullptr);
            std::cout << "hitting " << pat << " = " << (t ? std::to_string(*t) : std::string("none")) << "\n";
        }
        summary["hitting_steps"] = hits;
        if (rec.status == "certified") {
            const auto cert = certificate::certificate_from_json(io::read_json(dir / "certificate.json"));
            if (!cert.consistent() || cert.abstraction_hash != last.artifacts.at(rel))
                throw RunFailure("certificate does not match the stored abstraction");
            summary["certificate"] = certificate::to_json(cert);
            std::cout << certificate_line(cert, abs.size()) << "\n";
        }
    }
    const auto out = g.out.empty() ? dir : fs::path(g.out);
    fs::create_directories(out);
    io::write_text(out / "report.csv", csv.str());
    io::write_json(out / "report.json", summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ellcharge: learned battery charging with data-driven certificates"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "JSON configuration file");
    auto* seed_opt = app.add_option("--seed", seed, "base random seed");
    app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)");
    app.add_option("--out", g.out, "output directory");

    auto* sim = app.add_subcommand("simulate", "run one cell under a protocol and write trace.csv");
    auto* bench = app.add_subcommand("benchmark-ccv", "sweep the CC-CV current and check trends");
    auto* train = app.add_subcommand("train", "train one SAC charging policy");
    auto* ver = app.add_subcommand("verify", "re-verify a stored abstraction against a spec");
    std::string abs_path, spec_path;
    std::vector<std::string> hitting;
    ver->add_option("abstraction", abs_path, "abstraction.json")->required();
    ver->add_option("spec", spec_path, "spec.json")->required();
    ver->add_option("--hitting", hitting, "label globs for a worst-case hitting-time query");
    auto* cg = app.add_subcommand("cegis", "run the counterexample-guided synthesis loop");
    std::string resume;
    cg->add_option("--resume", resume, "continue the run stored in this directory");
    auto* rep = app.add_subcommand("report", "summarise and integrity-check a CEGIS run directory");
    std::string run_dir;
    rep->add_option("run_dir", run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    if (seed_opt->count()) g.seed = seed;

    try {
        if (*sim) return cmd_simulate(g);
        if (*bench) return cmd_benchmark(g);
        if (*train) return cmd_train(g);
        if (*ver) return cmd_verify(g, abs_path, spec_path, hitting);
        if (*cg) return cmd_cegis(g, resume);
        if (*rep) return cmd_report(g, run_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const RunFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_simulation;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_simulation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_simulation;
    }
    return 0;
}
