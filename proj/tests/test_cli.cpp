#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "tcnn/cli.hpp"
#include "tcnn/error.hpp"
#include "tcnn/io.hpp"

using namespace tcnn;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int status = 0;
    std::string out;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tcnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    CmdResult run(const std::string& args) {
        const std::string cmd = std::string(TCNN_CLI_PATH) + " " + args + " > " + (dir_ / "stdout").string() +
                                " 2> " + (dir_ / "stderr").string();
        const int raw = std::system(cmd.c_str());
        CmdResult r;
        r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        r.out = read_text(dir_ / "stdout");
        r.err = read_text(dir_ / "stderr");
        return r;
    }

    std::string p(const std::string& name) const { return (dir_ / name).string(); }

    void config(const std::string& text) {
        std::ofstream os(dir_ / "cfg.txt");
        os << text;
    }

    fs::path dir_;
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

void expect_single_error_line(const CmdResult& r) {
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.err.rfind("error:", 0), 0u) << r.err;
    EXPECT_EQ(count_lines(r.err), 1u) << r.err;
}

}  // namespace

TEST(RunConfigTest, DefaultsAndOverrides) {
    const RunConfig d = RunConfig::from_key_values({});
    EXPECT_EQ(d.max_epochs, 50000);
    EXPECT_EQ(d.bo_iterations, 300);
    EXPECT_EQ(d.layer_sizes, kDefaultLayerSizes);
    const RunConfig c = RunConfig::from_key_values(
        {{"lambda0", "0.8"}, {"lambda1", "0.2"}, {"layer_sizes", "2,8,8,2"}, {"grid_phi_step", "30"}});
    EXPECT_EQ(c.weights.values(), presets::tcnn1().values());
    EXPECT_EQ(c.layer_sizes, (std::vector<int>{2, 8, 8, 2}));
    EXPECT_EQ(c.grid.phi_step, 30.0);
}

TEST(RunConfigTest, RejectsUnknownAndInvalid) {
    EXPECT_THROW(RunConfig::from_key_values({{"epochs", "5"}}), InvalidArgument);
    EXPECT_THROW(RunConfig::from_key_values({{"max_epochs", "five"}}), InvalidArgument);
    EXPECT_THROW(RunConfig::from_key_values({{"lambda0", "0.5"}}), InvalidArgument);
    EXPECT_THROW(RunConfig::from_key_values({{"ppr_alpha", "0.5"}}), InvalidArgument);
}

TEST(RunConfigTest, KeyValuesRoundTrip) {
    const RunConfig c = RunConfig::from_key_values({{"lambda0", "0.57"},
                                                    {"lambda1", "0.2"},
                                                    {"lambda2", "0.2"},
                                                    {"lambda3", "0.03"},
                                                    {"noise_sigma", "0.05"},
                                                    {"phases_deg", "0,45,90"}});
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : c.to_key_values()) {
        kv[k] = v;
    }
    EXPECT_EQ(kv.size(), config_keys().size());
    const RunConfig back = RunConfig::from_key_values(kv);
    EXPECT_EQ(back.to_key_values(), c.to_key_values());
}

TEST_F(CliTest, GenDataDeterministicAndMatchesModel) {
    ASSERT_EQ(run("--seed 4 gen-data --out " + p("a.csv")).status, 0);
    ASSERT_EQ(run("--seed 4 gen-data --out " + p("b.csv")).status, 0);
    EXPECT_EQ(read_text(p("a.csv")), read_text(p("b.csv")));
    const Dataset d = read_dataset_csv(fs::path(p("a.csv")));
    const PPRParams params;
    for (const auto& s : d.samples()) {
        const auto sep = polar_compose(s.delta_norm, s.phi_deg);
        const Traction t = ppr_traction(params, sep.delta_n, sep.delta_t);
        EXPECT_EQ(s.sigma_n, t.sigma_n);
        EXPECT_EQ(s.sigma_t, t.sigma_t);
    }
}

TEST_F(CliTest, GenDataMissingDirectory) {
    expect_single_error_line(run("gen-data --out " + p("missing/x.csv")));
}

TEST_F(CliTest, UnknownConfigKey) {
    config("max_epochs=3\nbogus=1\n");
    const CmdResult r = run("--config " + p("cfg.txt") + " gen-data --out " + p("x.csv"));
    expect_single_error_line(r);
    EXPECT_NE(r.err.find("bogus"), std::string::npos);
}

TEST_F(CliTest, TrainEchoesWeightsAndWritesArtifacts) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("max_epochs=25\nlayer_sizes=2,6,2\nloss_threshold=1e-12\nlambda0=0.8\nlambda1=0.2\n");
    const CmdResult r = run("--config " + p("cfg.txt") + " train --data " + p("d.csv") + " --out " + p(""));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("weights: 0.8,0.2,0,0"), std::string::npos);
    EXPECT_NE(r.out.find("final: mse0="), std::string::npos);
    EXPECT_EQ(read_loss_history_csv(p("loss_history.csv")).size(), 25u);
    EXPECT_NO_THROW(read_model(fs::path(p("model.txt"))));
}

TEST_F(CliTest, TrainThresholdStopsEarly) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("max_epochs=100\nlayer_sizes=2,4,2\nloss_threshold=100\n");
    ASSERT_EQ(run("--config " + p("cfg.txt") + " train --data " + p("d.csv") + " --out " + p("")).status, 0);
    EXPECT_LT(read_loss_history_csv(p("loss_history.csv")).size(), 100u);
}

TEST_F(CliTest, TrainCorruptCsvNamesLine) {
    {
        std::ofstream os(p("bad.csv"));
        os << kDatasetHeader << "\n0,0,0,0,0\n0,0,0.1,abc,0\n";
    }
    const CmdResult r = run("train --data " + p("bad.csv") + " --out " + p(""));
    expect_single_error_line(r);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(CliTest, OptimizeHistoryAndBounds) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("bo_iterations=6\nbo_inner_epochs=3\nbo_init_samples=3\nlayer_sizes=2,4,2\ngrid_delta_step=0.5\n");
    const std::string args = "--config " + p("cfg.txt") + " optimize --data " + p("d.csv") + " --out " + p("");
    ASSERT_EQ(run(args).status, 0);
    const auto h = read_bo_history_csv(p("bo_history.csv"));
    EXPECT_EQ(h.size(), 6u);
    const std::string first = read_text(p("bo_history.csv"));
    const WeightFactors best = weights_from_key_values(read_key_values(p("best_weights.txt")));
    EXPECT_TRUE(within_search_bounds(best));
    ASSERT_EQ(run(args).status, 0);
    EXPECT_EQ(read_text(p("bo_history.csv")), first);
}

TEST_F(CliTest, AnalyzeWritesReportAndMaps) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("max_epochs=5\nlayer_sizes=2,4,2\n");
    ASSERT_EQ(run("--config " + p("cfg.txt") + " train --data " + p("d.csv") + " --out " + p("")).status, 0);
    const CmdResult r = run("analyze --model " + p("model.txt") + " --data " + p("d.csv") + " --out " + p(""));
    ASSERT_EQ(r.status, 0) << r.err;
    const AuditReport rep = audit_report_from_json(read_text(p("audit.json")));
    EXPECT_GE(rep.violation_ratio, 0.0);
    for (const char* f : {"sigma_n.csv", "sigma_t.csv", "vio1.csv", "vio2.csv", "vio3.csv"}) {
        const SurfaceField s = read_grid_csv(p(f));
        EXPECT_EQ(s.values().rows(), 31);
        EXPECT_EQ(s.values().cols(), 11);
    }
}

TEST_F(CliTest, AnalyzeNormMismatchFails) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("ppr_psi_n=20\n");
    ASSERT_EQ(run("--config " + p("cfg.txt") + " gen-data --out " + p("other.csv")).status, 0);
    config("max_epochs=2\nlayer_sizes=2,4,2\n");
    ASSERT_EQ(run("--config " + p("cfg.txt") + " train --data " + p("d.csv") + " --out " + p("")).status, 0);
    expect_single_error_line(run("analyze --model " + p("model.txt") + " --data " + p("other.csv") + " --out " + p("")));
}

TEST_F(CliTest, AnalyzeProportionalStubHasNoTc3Violation) {
    // Constant sigma_n, zero sigma_t, audited on phases within the 5 degree tolerance of 0.
    {
        std::ofstream os(p("stub.txt"));
        os << "TCNN-MLP v1\n2 1 2\nnorm 1 4 1 1\n0 0\n0\n0\n0\n1 0\n";
    }
    {
        std::ofstream os(p("d.csv"));
        os << kDatasetHeader << "\n0,-4,0,0,0\n0,-4,1,1,-1\n1,4,0,0,0\n1,4,1,1,1\n";
    }
    config("grid_phi_min=-4\ngrid_phi_max=4\ngrid_phi_step=2\ngrid_delta_max=1\n");
    const CmdResult r = run("--config " + p("cfg.txt") + " analyze --model " + p("stub.txt") + " --data " + p("d.csv") +
                      " --out " + p(""));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(audit_report_from_json(read_text(p("audit.json"))).ratio_tc3, 0.0);
}

TEST_F(CliTest, ExportSurfaceDimensions) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("max_epochs=2\nlayer_sizes=2,4,2\n");
    ASSERT_EQ(run("--config " + p("cfg.txt") + " train --data " + p("d.csv") + " --out " + p("")).status, 0);
    fs::create_directories(p("surf"));
    ASSERT_EQ(run("export-surface --model " + p("model.txt") + " --out " + p("surf")).status, 0);
    const SurfaceField s = read_grid_csv(p("surf/sigma_n.csv"));
    EXPECT_EQ(s.values().rows(), 31);
    EXPECT_EQ(s.values().cols(), 11);
}

TEST_F(CliTest, FitPprIterationsFlagAndWarnings) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("fit_iterations=100000\nrange_alpha_lo=3\nrange_alpha_hi=3\n");
    const CmdResult r = run("--config " + p("cfg.txt") + " fit-ppr --iterations 50 --data " + p("d.csv") + " --out " + p(""));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(read_text(p("fit.json")).find("\"iterations\": 50"), std::string::npos);
    EXPECT_NE(r.err.find("alpha"), std::string::npos);
    const PPRParams best = ppr_params_from_key_values(read_key_values(p("ppr_params.txt")));
    EXPECT_EQ(best.alpha, 3.0);
}

TEST_F(CliTest, FitPprInfeasibleRanges) {
    ASSERT_EQ(run("gen-data --out " + p("d.csv")).status, 0);
    config("range_delta_nc_lo=5\nrange_delta_nc_hi=6\n");
    expect_single_error_line(
        run("--config " + p("cfg.txt") + " fit-ppr --iterations 20 --data " + p("d.csv") + " --out " + p("")));
}

TEST_F(CliTest, NoSubcommandIsAnError) { EXPECT_NE(run("").status, 0); }
