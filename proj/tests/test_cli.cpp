#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ellcharge/abstraction/abstraction.hpp"
#include "ellcharge/io/files.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ellcharge;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("ellcharge_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    Result run(const std::string& args)
    {
        const auto log = dir / "stdout.txt";
        const std::string cmd = std::string(ELLCHARGE_CLI) + " " + args + " > " + log.string() + " 2> " +
                                (dir / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = io::read_text(log);
        return r;
    }

    fs::path write(const std::string& name, const json& j)
    {
        const auto p = dir / name;
        io::write_json(p, j);
        return p;
    }

    /// Rows of a CSV file as string cells keyed by the header.
    static std::vector<std::map<std::string, std::string>> csv(const fs::path& p)
    {
        std::istringstream in(io::read_text(p));
        std::string line;
        std::getline(in, line);
        std::vector<std::string> head;
        std::istringstream hs(line);
        for (std::string c; std::getline(hs, c, ',');) head.push_back(c);
        std::vector<std::map<std::string, std::string>> rows;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::map<std::string, std::string> row;
            std::size_t k = 0;
            for (std::string c; std::getline(ls, c, ',');) row[head.at(k++)] = c;
            rows.push_back(row);
        }
        return rows;
    }
};

}  // namespace

TEST_F(Cli, SimulateZeroCurrentKeepsCharge)
{
    const auto cfg = write("cfg.json", {{"schema_version", 1},
                                        {"simulate", {{"protocol", "constant-current"}, {"current_A", 0.0}, {"steps", 10}}}});
    const auto r = run("--config " + cfg.string() + " --out " + (dir / "o").string() + " simulate");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rows = csv(dir / "o" / "trace.csv");
    ASSERT_EQ(rows.size(), 11U);
    for (const auto& row : rows) EXPECT_EQ(row.at("soc"), rows.front().at("soc"));
}

TEST_F(Cli, SimulateCcCvHoldsTheVoltage)
{
    const auto cfg = write("cfg.json", {{"schema_version", 1},
                                        {"simulate", {{"protocol", "ccv"}, {"i_cc_A", 5.0}, {"soc_stop", 1.0}}}});
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + dir.string() + " simulate").code, 0);
    const auto rows = csv(dir / "trace.csv");
    // A hold segment: consecutive rows pinned near 4.2 V while the current falls below 5 A.
    int held = 0;
    for (const auto& row : rows) {
        const double v = std::stod(row.at("volt_V"));
        const double i = std::stod(row.at("i_A"));
        if (i < 5.0 - 1e-9 && i > 0.0) {
            EXPECT_NEAR(v, 4.2, 1e-3 + 1e-9);
            ++held;
        }
    }
    EXPECT_GT(held, 2);
}

TEST_F(Cli, SimulateRejectsMalformedConfig)
{
    const auto p = dir / "bad.json";
    io::write_text(p, "{\"schema_version\": 1, \"simulate\": {\"protocol\": ");
    EXPECT_EQ(run("--config " + p.string() + " --out " + (dir / "o").string() + " simulate").code, 2);
    EXPECT_FALSE(fs::exists(dir / "o" / "trace.csv"));

    const auto unknown = write("unknown.json", {{"schema_version", 1}, {"simulate", {{"voltage", 3}}}});
    EXPECT_EQ(run("--config " + unknown.string() + " --out " + (dir / "o").string() + " simulate").code, 2);
    const auto version = write("version.json", {{"schema_version", 2}});
    EXPECT_EQ(run("--config " + version.string() + " --out " + (dir / "o").string() + " simulate").code, 2);
    EXPECT_FALSE(fs::exists(dir / "o" / "trace.csv"));
    EXPECT_EQ(run("--no-such-flag simulate").code, 2);
}

TEST_F(Cli, BenchmarkDefaultTrends)
{
    const auto r = run("--out " + dir.string() + " benchmark-ccv");
    ASSERT_EQ(r.code, 0);
    const auto summary = io::read_json(dir / "summary.json");
    EXPECT_TRUE(summary.at("t_charge_nonincreasing").get<bool>());
    EXPECT_TRUE(summary.at("t_max_nondecreasing").get<bool>());
    EXPECT_TRUE(summary.at("q_loss_interior_minimum").get<bool>());
    EXPECT_EQ(csv(dir / "benchmark.csv").size(), 10U);
}

TEST_F(Cli, BenchmarkGridEdgeCases)
{
    const auto empty = write("empty.json", {{"schema_version", 1}, {"benchmark", {{"i_cc_grid_A", json::array()}}}});
    EXPECT_EQ(run("--config " + empty.string() + " --out " + (dir / "e").string() + " benchmark-ccv").code, 2);
    const auto one = write("one.json", {{"schema_version", 1}, {"benchmark", {{"i_cc_grid_A", {4.0}}}}});
    ASSERT_EQ(run("--config " + one.string() + " --out " + (dir / "o").string() + " benchmark-ccv").code, 0);
    EXPECT_EQ(csv(dir / "o" / "benchmark.csv").size(), 1U);
    EXPECT_EQ(io::read_json(dir / "o" / "summary.json").at("points").get<int>(), 1);
}

TEST_F(Cli, VerifyHalvingFixtures)
{
    const abstraction::Alphabet a({"y0", "y1"});
    const auto coarse = write("coarse.json", abstraction::to_json(abstraction::build_salca(fixture::halving_behaviors(), 2, 2), a));
    const auto fine = write("fine.json", abstraction::to_json(abstraction::build_salca(fixture::halving_behaviors(), 3, 2), a));
    const auto spec = write("spec.json", {{"schema_version", 1}, {"horizon", 4}, {"goal", {"y1"}}});

    auto r = run("verify " + fine.string() + " " + spec.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("holds=true"), std::string::npos);

    r = run("--out " + (dir / "v").string() + " verify " + coarse.string() + " " + spec.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("holds=false"), std::string::npos);
    EXPECT_NE(r.out.find("counterexample y0 y0"), std::string::npos);
    const auto v = io::read_json(dir / "v" / "verification.json");
    EXPECT_FALSE(v.at("holds").get<bool>());
    EXPECT_EQ(v.at("counterexample_windows"), json({"y0 y0"}));

    r = run("verify " + fine.string() + " " + spec.string() + " --hitting '*'");
    EXPECT_NE(r.out.find("hitting=0"), std::string::npos);
    r = run("verify " + fine.string() + " " + spec.string() + " --hitting y1");
    EXPECT_NE(r.out.find("hitting=2"), std::string::npos);
}

TEST_F(Cli, VerifySchemaErrors)
{
    const abstraction::Alphabet a({"y0", "y1"});
    const auto fine = write("fine.json", abstraction::to_json(abstraction::build_salca(fixture::halving_behaviors(), 3, 2), a));
    const auto v2 = write("v2.json", {{"schema_version", 2}, {"horizon", 4}, {"goal", {"y1"}}});
    EXPECT_EQ(run("verify " + fine.string() + " " + v2.string()).code, 2);
    const auto extra = write("extra.json", {{"schema_version", 1}, {"horizon", 4}, {"goal", {"y1"}}, {"x", 1}});
    EXPECT_EQ(run("verify " + fine.string() + " " + extra.string()).code, 2);
    auto broken = io::read_json(fine);
    broken["schema_version"] = 7;
    const auto bad_abs = write("bad_abs.json", broken);
    const auto ok = write("ok.json", {{"schema_version", 1}, {"horizon", 4}, {"goal", {"y1"}}});
    EXPECT_EQ(run("verify " + bad_abs.string() + " " + ok.string()).code, 2);
    EXPECT_EQ(run("verify " + (dir / "missing.json").string() + " " + ok.string()).code, 2);
}

TEST_F(Cli, CegisSmallRunResumeAndCorruption)
{
    const json small{{"schema_version", 1},
                     {"cegis",
                      {{"n_traj", 60},
                       {"ell", 3},
                       {"horizon", 20},
                       {"beta", 1e-3},
                       {"max_iterations", 1},
                       {"training", {{"total_steps", 0}}}}},
                     {"verification", {{"goal", {"[b-t]??"}}, {"safe", {"?aa"}}, {"horizon", 15}}}};
    const auto cfg = write("cegis.json", small);
    const auto out = dir / "run";
    const auto r = run("--config " + cfg.string() + " --out " + out.string() + " --jobs 1 cegis");
    ASSERT_TRUE(r.code == 0 || r.code == 4) << r.code;
    ASSERT_TRUE(fs::exists(out / "record.json"));
    const auto record = io::read_text(out / "record.json");
    if (r.code == 0) EXPECT_EQ(r.out.rfind("eps=", 0), 0U);

    // Re-running into the same directory without --resume is refused.
    EXPECT_EQ(run("--config " + cfg.string() + " --out " + out.string() + " cegis").code, 2);

    const auto again = run("cegis --resume " + out.string());
    EXPECT_EQ(again.code, r.code);
    EXPECT_EQ(io::read_text(out / "record.json"), record);

    const auto rep = run("--out " + (dir / "rep").string() + " report " + out.string());
    EXPECT_EQ(rep.code, 0);
    EXPECT_TRUE(fs::exists(dir / "rep" / "report.csv"));

    io::write_text(out / "iter_0" / "abstraction.json", "{}");
    EXPECT_EQ(run("cegis --resume " + out.string()).code, 3);
    EXPECT_EQ(run("report " + out.string()).code, 3);
    EXPECT_EQ(run("cegis --resume " + (dir / "nowhere").string()).code, 3);
}

TEST_F(Cli, TrainWritesAPolicy)
{
    const auto cfg = write("train.json", {{"schema_version", 1},
                                          {"training", {{"total_steps", 300}, {"start_steps", 100}, {"update_after", 100}}},
                                          {"train", {{"eval_episodes", 2}}}});
    const auto r = run("--config " + cfg.string() + " --out " + dir.string() + " --seed 5 train");
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(io::read_json(dir / "policy.json").is_object());
    EXPECT_EQ(csv(dir / "evaluation.csv").size(), 2U);
}
