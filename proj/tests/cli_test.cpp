#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "bassmle/io.hpp"

namespace fs = std::filesystem;
using bassmle::io::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bassmle_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name) const { return (dir_ / name).string(); }

  RunResult run(const std::string& args) const {
    const std::string cmd = std::string(BASS_MLE_BIN) + " " + args + " 2>/dev/null";
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesRequestedCount) {
  const auto r = run("simulate --alpha 0.3 --beta 0.1 --m 100 --target-n 10 --price 1.0 --x const --seed 7 --out " +
                     file("p.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("n=10"), std::string::npos);
  EXPECT_NE(r.out.find("seed=7"), std::string::npos);
  EXPECT_NE(r.out.find("final_time="), std::string::npos);
  const auto path = bassmle::io::read_path(file("p.json"));
  EXPECT_EQ(path.adoption_times.size(), 10u);
}

TEST_F(Cli, SimulateIsByteIdentical) {
  const std::string args = "simulate --alpha 0.3 --beta 0.1 --m 100 --target-n 10 --price 1.0 --x const --seed 7 --out ";
  ASSERT_EQ(run(args + file("a.json")).code, 0);
  ASSERT_EQ(run(args + file("b.json")).code, 0);
  EXPECT_EQ(bassmle::io::read_file(file("a.json")), bassmle::io::read_file(file("b.json")));
  ASSERT_EQ(run(args + file("a.csv")).code, 0);
  ASSERT_EQ(run(args + file("b.csv")).code, 0);
  EXPECT_EQ(bassmle::io::read_file(file("a.csv")), bassmle::io::read_file(file("b.csv")));
}

TEST_F(Cli, SimulateValidation) {
  EXPECT_EQ(run("simulate --alpha 0.1 --beta 0.3 --m 100 --target-n 10 --price 1 --seed 1 --transformed --out " +
                file("p.json")).code, 2);
  EXPECT_EQ(run("simulate --alpha 0.3 --beta 0.1 --m 100 --target-n 101 --price 1 --seed 1 --out " +
                file("p.json")).code, 2);
  EXPECT_EQ(run("simulate --alpha 0.3 --beta 0.1 --m 100 --price 1 --seed 1 --out " + file("p.json")).code, 2);
  EXPECT_EQ(run("simulate --alpha 0.3 --beta 0.1 --m 100 --target-n 5 --price 1 --seed 1 --bogus --out " +
                file("p.json")).code, 2);
  EXPECT_EQ(run("simulate --alpha 0.1 --beta 0.3 --m 100 --target-n 10 --price 1 --seed 1 --out " +
                file("p.json")).code, 0);
}

TEST_F(Cli, SimulateWithScheduleAndTransformedParams) {
  bassmle::io::write_file(file("prices.csv"), "start,end,price\n0,1,0.2\n1,4,0.8\n");
  const auto r = run("simulate --alpha-p 0.2 --beta-p 0.5 --m 300 --horizon 4 --price-file " + file("prices.csv") +
                     " --x exp --seed 3 --out " + file("p.csv"));
  ASSERT_EQ(r.code, 0);
  const auto path = bassmle::io::read_path(file("p.csv"));
  EXPECT_EQ(path.horizon, 4.0);
  EXPECT_EQ(path.price_path.segments().size(), 2u);
}

TEST_F(Cli, FitConvergesOnLargePath) {
  ASSERT_EQ(run("simulate --alpha 0.3 --beta 0.1 --m 600 --target-n 500 --price 1.0 --x const --seed 11 --out " +
                file("p.json")).code, 0);
  const auto r = run("fit --path " + file("p.json"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j.at("converged").get<bool>());
  for (const char* key : {"alpha_p_hat", "beta_p_hat", "alpha_hat", "beta_hat", "loglik", "std_err_alpha_p",
                          "std_err_beta_p"})
    EXPECT_TRUE(j.contains(key)) << key;

  ASSERT_EQ(run("fit --path " + file("p.json") + " --report " + file("fit.json")).code, 0);
  EXPECT_EQ(json::parse(bassmle::io::read_file(file("fit.json"))), j);
}

TEST_F(Cli, FitBothParametrizationsAgree) {
  ASSERT_EQ(run("simulate --alpha 0.3 --beta 0.1 --m 600 --target-n 500 --price 1.0 --x const --seed 11 --out " +
                file("p.json")).code, 0);
  const auto r = run("fit --path " + file("p.json") + " --parametrization both");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j.at("transformed").at("alpha_hat").get<double>(), j.at("natural").at("alpha_hat").get<double>(), 1e-6);
  EXPECT_NEAR(j.at("transformed").at("beta_hat").get<double>(), j.at("natural").at("beta_hat").get<double>(), 1e-6);
  EXPECT_LT(std::abs(j.at("alpha_hat_difference").get<double>()), 1e-6);
}

TEST_F(Cli, FitErrors) {
  ASSERT_EQ(run("simulate --alpha 0.3 --beta 0.1 --m 100 --target-n 1 --price 1.0 --x const --seed 2 --out " +
                file("one.json")).code, 0);
  EXPECT_EQ(run("fit --path " + file("one.json")).code, 3);
  EXPECT_EQ(run("fit --path " + file("missing.json")).code, 2);
  bassmle::io::write_file(file("bad.json"), "{\"m\": 3}");
  EXPECT_EQ(run("fit --path " + file("bad.json")).code, 2);
  bassmle::io::write_file(file("garbage.json"), "not json");
  EXPECT_EQ(run("fit --path " + file("garbage.json")).code, 2);
}

TEST_F(Cli, ExperimentWritesReproducibleReports) {
  bassmle::io::write_file(file("cfg.json"),
                          R"({"alpha": 0.3, "beta": 0.1, "m": 200, "n_grid": [50, 100, 180],
                              "replications": 20, "seed": 4, "bootstrap_resamples": 20, "threads": 1})");
  const auto r = run("experiment --config " + file("cfg.json") + " --out-dir " + file("out1"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("slope="), std::string::npos);
  EXPECT_NE(r.out.find("bound_check="), std::string::npos);
  ASSERT_TRUE(fs::exists(file("out1/report.csv")));
  ASSERT_TRUE(fs::exists(file("out1/report.json")));
  ASSERT_EQ(run("experiment --config " + file("cfg.json") + " --out-dir " + file("out2")).code, 0);
  EXPECT_EQ(bassmle::io::read_file(file("out1/report.csv")), bassmle::io::read_file(file("out2/report.csv")));
  const auto j = json::parse(bassmle::io::read_file(file("out1/report.json")));
  EXPECT_EQ(j.at("rows").size(), 3u);
}

TEST_F(Cli, ExperimentRejectsBadConfig) {
  bassmle::io::write_file(file("cfg.json"),
                          R"({"alpha": 0.3, "beta": 0.1, "m": 200, "n_grid": [50], "replications": 0, "seed": 4})");
  EXPECT_EQ(run("experiment --config " + file("cfg.json") + " --out-dir " + file("out")).code, 2);
  bassmle::io::write_file(file("cfg2.json"),
                          R"({"alpha": 0.3, "beta": 0.1, "m": 200, "n_grid": [50], "replications": 2, "seed": 4, "colour": 1})");
  EXPECT_EQ(run("experiment --config " + file("cfg2.json") + " --out-dir " + file("out")).code, 2);
}

TEST_F(Cli, VerifyChecks) {
  const auto fisher = run("verify --check fisher --beta-p 1 --n 10");
  EXPECT_EQ(fisher.code, 0);
  EXPECT_NE(fisher.out.find("lower="), std::string::npos);
  EXPECT_NE(fisher.out.find("exact="), std::string::npos);
  EXPECT_NE(fisher.out.find("upper="), std::string::npos);

  const auto zero = run("verify --check hellinger --delta 0");
  EXPECT_EQ(zero.code, 0);
  EXPECT_NE(zero.out.find("hellinger_sq=0 "), std::string::npos);
  EXPECT_EQ(zero.out.find("FAIL"), std::string::npos);

  EXPECT_EQ(run("verify --check all").code, 0);
  EXPECT_EQ(run("verify --check all --alpha 0.3 --beta 0.1 --m 2000").code, 0);
}

TEST_F(Cli, VerifyReportsViolations) {
  const auto r = run("verify --check hellinger --alpha-p 1.5 --beta-p 0.05 --m 10 --delta 0.05 --state 0 --price 0.3");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(run("verify --check hellinger --delta -1").code, 2);
  EXPECT_EQ(run("verify --check fisher --beta-p 1 --n 10 --m 5").code, 2);
}

TEST_F(Cli, VerifyBoundFromReport) {
  bassmle::io::write_file(file("cfg.json"),
                          R"({"alpha": 0.3, "beta": 0.1, "m": 200, "n_grid": [50, 180],
                              "replications": 10, "seed": 4, "bootstrap_resamples": 0, "threads": 1})");
  ASSERT_EQ(run("experiment --config " + file("cfg.json") + " --out-dir " + file("out")).code, 0);
  const auto r = run("verify --check bound --config " + file("cfg.json") + " --report " + file("out/report.json"));
  EXPECT_TRUE(r.code == 0 || r.code == 1);
  EXPECT_NE(r.out.find("alpha_theta="), std::string::npos);
}
