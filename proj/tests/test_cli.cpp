#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("fgp_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // runs from the source tree so config-relative data paths resolve
  CliRun fgp(const std::string &args) const {
    const auto o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = "cd '" FGP_SOURCE_DIR "' && '" FGP_BINARY "' " + args +
                            " > '" + o.string() + "' 2> '" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }

  fs::path out(const std::string &sub = "run") const { return dir_ / sub; }

  fs::path dir_;
};

nlohmann::json json_at(const fs::path &p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::vector<std::string>> csv_at(const fs::path &p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      cells.push_back(c);
    }
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_F(Cli, DegenerateFitIsZero) {
  const auto r = fgp("fit --config configs/degenerate.ini --out " + out().string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sol = json_at(out() / "solution.json");
  for (double v : sol.at("values")) {
    EXPECT_EQ(v, 0.0);
  }
  const auto rep = json_at(out() / "report.json");
  EXPECT_EQ(rep.at("objective").get<double>(), 0.0);
  EXPECT_TRUE(rep.at("converged").get<bool>());
  EXPECT_TRUE(fs::exists(out() / "MANIFEST.json"));
}

TEST_F(Cli, MissingInputExitsOne) {
  const std::string cfg = (dir_ / "missing.ini").string();
  std::ofstream(cfg) << "[data]\nmeasure = /nonexistent/measure.csv\n[problem]\nbeta = 1\n";
  const auto r = fgp("fit --config " + cfg + " --out " + out().string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/measure.csv"), std::string::npos) << r.err;
  const auto m = json_at(out() / "MANIFEST.json");
  EXPECT_EQ(m.at("exit_code").get<int>(), 1);

  const auto bad = fgp("fit --config /nonexistent/config.ini --out " + out("b").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("/nonexistent/config.ini"), std::string::npos);
}

TEST_F(Cli, BadOverrideExitsOne) {
  const auto r = fgp("fit --config configs/degenerate.ini --set problem.beta=-1 --out " +
                     out().string());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, NonConvergenceExitsTwo) {
  const auto r = fgp("fit --config configs/tiny_oracle.ini --set solver.max_outer=1 --out " +
                     out().string());
  EXPECT_EQ(r.code, 2) << r.out << r.err;
  EXPECT_FALSE(json_at(out() / "report.json").at("converged").get<bool>());
}

TEST_F(Cli, OracleAgreesOnTinyInstance) {
  const auto r = fgp("fit --config configs/tiny_oracle.ini --oracle --out " + out().string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto o = json_at(out() / "oracle.json");
  const auto rep = json_at(out() / "report.json");
  EXPECT_TRUE(o.at("agree").get<bool>());
  EXPECT_EQ(o.at("solve_objective").get<double>(), rep.at("objective").get<double>());
  EXPECT_LE(std::abs(o.at("difference").get<double>()), 1e-3);
}

TEST_F(Cli, MarketRuleRelativeValueIsOne) {
  const auto r = fgp("backtest --config configs/backtest_closed.ini --set backtest.rules=market"
                     " --set backtest.tc=0.003 --set simulate.periods=301 --set backtest.train=150"
                     " --set backtest.test=100 --out " + out().string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for (const auto &e : fs::directory_iterator(out())) {
    const auto name = e.path().filename().string();
    if (name.find("market_tc") == std::string::npos) {
      continue;
    }
    ++files;
    const auto rows = csv_at(e.path());
    ASSERT_GT(rows.size(), 2u);
    EXPECT_EQ(rows[0][2], "relative_value");
    for (std::size_t k = 1; k < rows.size(); ++k) {
      EXPECT_EQ(std::stod(rows[k][2]), 1.0) << name << " row " << k;
      EXPECT_EQ(std::stod(rows[k][4]), 0.0);
    }
  }
  EXPECT_GE(files, 1u);
}

TEST_F(Cli, IdenticalPeriodsGiveZeroMatrix) {
  const std::string csv = (dir_ / "periods.csv").string();
  std::ofstream(csv) << "period_index,atom_index,weight,u_1,u_2,u_3,r_1,r_2,r_3\n"
                        "0,0,0.5,0.5,0.3,0.2,0.3,0.4,0.3\n"
                        "0,1,0.5,0.6,0.3,0.1,0.2,0.5,0.3\n"
                        "1,0,0.5,0.5,0.3,0.2,0.3,0.4,0.3\n"
                        "1,1,0.5,0.6,0.3,0.1,0.2,0.5,0.3\n";
  const std::string cfg = (dir_ / "stab.ini").string();
  std::ofstream(cfg) << "[data]\nmeasure = " << csv << "\n[problem]\nbeta = 1\n";
  const auto r = fgp("stability --config " + cfg + " --out " + out().string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_at(out() / "w_rank.csv");
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 1; i < 3; ++i) {
    for (std::size_t j = 1; j < 3; ++j) {
      EXPECT_EQ(std::stod(rows[i][j]), 0.0);
    }
  }
}

TEST_F(Cli, ManifestRecordsTheRun) {
  const auto r = fgp("simulate --config configs/stability.ini --seed 5 --out " + out().string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = json_at(out() / "MANIFEST.json");
  EXPECT_EQ(m.at("command").get<std::string>(), "simulate");
  EXPECT_EQ(m.at("seed").get<int>(), 5);
  EXPECT_EQ(m.at("exit_code").get<int>(), 0);
  EXPECT_TRUE(m.contains("config"));
  EXPECT_FALSE(m.at("inputs").empty());
  EXPECT_FALSE(m.at("outputs").empty());

  // replay from the same arguments gives identical output
  const auto again = fgp("simulate --config configs/stability.ini --seed 5 --out " +
                         out("again").string());
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(slurp(out() / "history.csv"), slurp(out("again") / "history.csv"));
}

TEST_F(Cli, UnknownSubcommandExitsOne) {
  EXPECT_EQ(fgp("frobnicate").code, 1);
  EXPECT_EQ(fgp("").code, 1);
}
