#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "rot/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "rot_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string(ROT_CLI_PATH) + ' ' + args + " > " + (kWork / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
    std::ifstream in(kWork / "last.log");
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string dir(const std::string& name) { return (kWork / name).string(); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

}  // namespace

TEST_F(Cli, SolveWritesArtifactsAndReportsTheOracle) {
    ASSERT_EQ(run("solve --instance torus-self --d 1 --m 128 --p 2 --eps 1e-2 --out " + dir("solve")), 0) << last_log();
    for (const char* f : {"lambda.csv", "lambda.csv.json", "mu.csv", "mu.csv.json", "duals.csv", "convergence.csv",
                          "plan_summary.csv", "run.json"})
        EXPECT_TRUE(fs::exists(kWork / "solve" / f)) << f;
    EXPECT_NE(last_log().find("max|f - C_eps|"), std::string::npos);
    const auto conv = rot::io::read_csv(kWork / "solve" / "convergence.csv");
    ASSERT_EQ(conv.cells.size(), 1u);
    EXPECT_LE(std::stod(conv.cells[0][conv.column("final_residual_rel")]), 1e-10);
    EXPECT_EQ(conv.meta.at("p"), "2");
}

TEST_F(Cli, AnalyzeAfterSolveWritesSectionsAndDetail) {
    ASSERT_EQ(run("solve --instance torus-self --d 1 --m 128 --p 2 --eps 1e-2 --out " + dir("rt")), 0) << last_log();
    ASSERT_EQ(run("analyze --artifact " + dir("rt") + " --detail 5"), 0) << last_log();
    const auto sections = rot::io::read_csv(kWork / "rt" / "sections.csv");
    EXPECT_EQ(sections.cells.size(), 128u);
    const auto detail = rot::io::read_csv(kWork / "rt" / "section_detail.csv");
    const auto members = sections.cells[5][sections.column("members")];
    EXPECT_EQ(detail.cells.size(), std::stoul(members));
    EXPECT_EQ(detail.meta.at("center_index"), "5");
}

TEST_F(Cli, AnalyzeRejectsMismatchedParameters) {
    ASSERT_EQ(run("solve --instance torus-self --d 1 --m 64 --p 2 --eps 1e-2 --out " + dir("mm")), 0) << last_log();
    EXPECT_EQ(run("analyze --artifact " + dir("mm") + " --p 1.5"), 1);
    EXPECT_NE(last_log().find("analyze.p"), std::string::npos);
    EXPECT_EQ(run("analyze --artifact " + dir("mm") + " --eps 0.02"), 1);
    EXPECT_EQ(run("analyze --artifact " + dir("mm") + " --detail 64"), 1);
    EXPECT_EQ(run("analyze --artifact " + dir("does-not-exist")), 1);
}

TEST_F(Cli, ConfigErrorsNameTheOffendingKey) {
    EXPECT_EQ(run("solve --p 3 --eps 0.1 --out " + dir("bad")), 1);
    EXPECT_NE(last_log().find("solve.p: 3 is outside the allowed range (1,2]"), std::string::npos);
    EXPECT_EQ(run("solve --p 2 --eps -1 --out " + dir("bad")), 1);
    EXPECT_EQ(run("sweep --d 1 --p 2 --eps 0.01 --sweeps \"\" --out " + dir("bad")), 1);
    EXPECT_EQ(run("sweep --d 1 --p 2 --eps-range 0.01,0.001,3 --sweeps bogus --out " + dir("bad")), 1);
    EXPECT_EQ(run("solve --no-such-flag 1"), 1);
    {
        std::ofstream(kWork / "unknown.json") << R"({"solve": {"d": 1, "p": 2, "eps": 0.1, "colour": "red"}})";
    }
    EXPECT_EQ(run("solve --config " + (kWork / "unknown.json").string()), 1);
    EXPECT_NE(last_log().find("colour"), std::string::npos);
}

TEST_F(Cli, FlagsOverrideConfigFile) {
    std::ofstream(kWork / "solve.json") << R"({"solve": {"instance": "torus-self", "d": 1, "m": 32, "p": 2, "eps": 0.05}})";
    ASSERT_EQ(run("solve --config " + (kWork / "solve.json").string() + " --m 48 --out " + dir("override")), 0)
        << last_log();
    std::ifstream in(kWork / "override" / "run.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("m").get<int>(), 48);
    EXPECT_EQ(j.at("epsilon").get<double>(), 0.05);
}

TEST_F(Cli, NonConvergenceExitsWithSolverErrorAndDumpsTrace) {
    EXPECT_EQ(run("solve --instance torus-perturbed --d 1 --m 64 --p 2 --eps 1e-3 --max-outer-iters 1 --out " +
                  dir("nc")),
              2);
    EXPECT_TRUE(fs::exists(kWork / "nc" / "residual_trace.csv"));
}

TEST_F(Cli, OracleOutsideRegimeExitsWithThree) {
    EXPECT_EQ(run("oracle --d 1 --p 2 --eps 100"), 3);
    EXPECT_EQ(run("oracle --d 1 --p 2 --eps 0.01,100 --out " + dir("oracle")), 0);
    const auto t = rot::io::read_csv(kWork / "oracle" / "oracle.csv");
    EXPECT_EQ(t.cells.size(), 2u);
}

TEST_F(Cli, SweepPassesAndFailsOnTolerance) {
    ASSERT_EQ(run("sweep --d 1 --p 2 --eps-range 0.01,0.001,3 --sweeps sparsity --out " + dir("sweep")), 0)
        << last_log();
    for (const char* f : {"sweep_sparsity.csv", "plot_sparsity.svg", "sections_eps0.csv", "summary.json"})
        EXPECT_TRUE(fs::exists(kWork / "sweep" / f)) << f;
    std::ifstream in(kWork / "sweep" / "summary.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_NE(j.dump().find("\"pass\":true"), std::string::npos);

    EXPECT_EQ(run("sweep --d 1 --p 2 --eps-range 0.01,0.001,3 --sweeps sparsity --sparsity-tolerance 1e-6 --no-svg "
                  "--out " + dir("sweep_fail")),
              4);
    EXPECT_FALSE(fs::exists(kWork / "sweep_fail" / "plot_sparsity.svg"));
}

TEST_F(Cli, VersionFlag) {
    EXPECT_EQ(run("--version"), 0);
    EXPECT_NE(last_log().find(rot::kToolVersion), std::string::npos);
}
