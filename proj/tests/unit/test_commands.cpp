#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mfh/commands.hpp"
#include "mfh/errors.hpp"
#include "mfh/gls.hpp"
#include "mfh/io.hpp"
#include "mfh/msem.hpp"

namespace mfh {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kFixtures = MFH_FIXTURE_DIR;

RunConfig fixture_config() {
  RunConfig c;
  c.areas_path = (kFixtures / "prefectures_areas.csv").string();
  c.covariance_path = (kFixtures / "prefectures_cov.csv").string();
  return c;
}

std::string run(const std::string& command, const RunConfig& c) {
  std::ostringstream out, err;
  const int code = run_command(command, c, out, err);
  EXPECT_EQ(code, kExitOk) << err.str();
  return out.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

void expect_twelve_digit_roundtrip(const std::string& cell) {
  if (cell.empty() || cell == "nan" || cell == "true" || cell == "false") return;
  const double v = std::stod(cell);
  EXPECT_EQ(fmt::format("{:.12g}", v), cell);
}

TEST(CmdFit, JsonSchema) {
  RunConfig c = fixture_config();
  c.format = OutputFormat::kJson;
  const json j = json::parse(run("fit", c));
  EXPECT_EQ(j["meta"]["m"], 47);
  EXPECT_EQ(j["meta"]["k"], 2);
  EXPECT_EQ(j["beta"].size(), 4u);
  for (const auto& b : j["beta"]) {
    EXPECT_GE(b["p_value"].get<double>(), 0.0);
    EXPECT_LE(b["p_value"].get<double>(), 1.0);
  }
  EXPECT_EQ(j["psi"]["projected"].size(), 2u);
  const auto& r = j["correlation"];
  EXPECT_DOUBLE_EQ(r[0][0].get<double>(), 1.0);
  const auto& p = j["psi"]["projected"];
  EXPECT_NEAR(r[0][1].get<double>(),
              p[0][1].get<double>() /
                  std::sqrt(p[0][0].get<double>() * p[1][1].get<double>()),
              1e-10);
  EXPECT_EQ(j["per_area"].size(), 47u);
  EXPECT_TRUE(j["per_group"].is_array());
}

TEST(CmdFit, CsvMatchesLibrary) {
  const RunConfig c = fixture_config();
  const auto rows = parse_csv(run("fit", c));
  ASSERT_EQ(rows.front(), (std::vector<std::string>{"quantity", "row", "col", "value"}));
  const Dataset d = load_dataset(c.areas_path, c.covariance_path);
  const EblupResult r = eblup_all(d, PsiVariant::kPr0);
  for (const auto& row : rows) {
    if (row[0] == "beta" && row[1] == "2") {
      EXPECT_NEAR(std::stod(row[3]), r.fit.beta_hat(1), 1e-10);
    }
    if (row[0] == "psi_projected" && row[1] == "1" && row[2] == "2") {
      EXPECT_NEAR(std::stod(row[3]), r.psi.projected(0, 1), 1e-10);
    }
  }
}

class CommandFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mfh_cmd_" + std::string(::testing::UnitTest::GetInstance()
                                         ->current_test_info()
                                         ->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
};

TEST_F(CommandFiles, DiagonalPsiGivesZeroCorrelation) {
  std::ofstream(path("a.csv")) << "area_id,y_1,y_2,x_1_1,x_2_1\n"
                                  "p,3,3,1,1\nq,3,-3,1,1\nr,-3,3,1,1\ns,-3,-3,1,1\n";
  std::ofstream(path("c.csv")) << "area_id,d_1_1,d_1_2,d_2_1,d_2_2\n"
                                  "p,1,0,0,2\nq,1,0,0,2\nr,1,0,0,2\ns,1,0,0,2\n";
  RunConfig c;
  c.areas_path = path("a.csv");
  c.covariance_path = path("c.csv");
  c.format = OutputFormat::kJson;
  const json j = json::parse(run("fit", c));
  EXPECT_EQ(j["correlation"][0][1].get<double>(), 0.0);
  EXPECT_EQ(j["psi"]["projected"][0][1].get<double>(), 0.0);
}

TEST_F(CommandFiles, PredictCsvRowsAndGroups) {
  RunConfig c = fixture_config();
  c.groups_path = (kFixtures / "prefectures_groups.csv").string();
  c.out_path = path("pred.csv");
  run("predict", c);
  const auto rows = parse_csv(slurp(c.out_path));
  ASSERT_EQ(rows.size(), 48u);
  const auto& h = rows.front();
  EXPECT_EQ(h[0], "area_id");
  EXPECT_EQ(std::count(h.begin(), h.end(), "msem_2_1"), 1);

  const Dataset d = load_dataset(c.areas_path, c.covariance_path);
  const auto reports = msem_estimate_all(d, PsiVariant::kPr0);
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(h.begin(), h.end(), name) - h.begin());
  };
  for (std::size_t a = 0; a < d.m(); ++a) {
    const auto& row = rows[a + 1];
    EXPECT_EQ(row[0], d.area(a).area_id);
    const double direct = std::stod(row[col("direct_1")]);
    const double eb = std::stod(row[col("eblup_1")]);
    EXPECT_NEAR(std::stod(row[col("shrinkage_pct_1")]), 100.0 * (direct - eb) / direct,
                1e-8 * std::max(1.0, std::abs(100.0 * (direct - eb) / direct)));
    EXPECT_NEAR(std::stod(row[col("msem_1_2")]), reports[a].estimate(0, 1), 1e-10);
    const double prial =
        100.0 * (1.0 - reports[a].estimate.trace() / d.area(a).D.trace());
    EXPECT_NEAR(std::stod(row[col("prial_vs_direct")]), prial, 1e-8);
    for (const auto& cell : row) {
      if (&cell != &row[0]) expect_twelve_digit_roundtrip(cell);
    }
  }

  const auto groups = parse_csv(slurp(c.out_path + ".groups.csv"));
  ASSERT_EQ(groups.size(), 11u);
  EXPECT_EQ(groups[1][0], "Hokkaido");
  EXPECT_EQ(groups[3][0], "Kanto");
  EXPECT_EQ(groups[3][1], "7");
}

TEST(CmdPredict, JsonGroupsSummaries) {
  RunConfig c = fixture_config();
  c.groups_path = (kFixtures / "prefectures_groups.csv").string();
  c.format = OutputFormat::kJson;
  c.psi = PsiVariant::kPr1;
  const json j = json::parse(run("predict", c));
  EXPECT_EQ(j["meta"]["psi_variant"], "pr1");
  EXPECT_EQ(j["per_area"].size(), 47u);
  EXPECT_EQ(j["per_group"].size(), 10u);
  EXPECT_EQ(j["per_area"][0]["msem"].size(), 2u);
  EXPECT_EQ(j["per_area"][0]["group"], "Hokkaido");
}

TEST_F(CommandFiles, SimulateSingleReplication) {
  RunConfig c;
  c.replications = 1;
  c.out_path = path("sim.csv");
  run("simulate", c);
  const auto rows = parse_csv(slurp(c.out_path));
  ASSERT_GT(rows.size(), 100u);
  EXPECT_EQ(rows.front(),
            (std::vector<std::string>{"table", "predictor", "group", "row", "col",
                                      "value_x100", "value"}));
}

TEST_F(CommandFiles, SimulateIsByteIdenticalAcrossRunsAndWorkers) {
  for (const auto format : {OutputFormat::kCsv, OutputFormat::kJson}) {
    RunConfig c;
    c.replications = 700;
    c.format = format;
    c.out_path = path("one");
    run("simulate", c);
    c.out_path = path("two");
    run("simulate", c);
    c.workers = 8;
    c.out_path = path("eight");
    run("simulate", c);
    const std::string one = slurp(path("one"));
    EXPECT_FALSE(one.empty());
    EXPECT_EQ(one, slurp(path("two")));
    EXPECT_EQ(one, slurp(path("eight")));
  }
}

TEST(CmdSimulate, TablesParseBackAtTwelveDigits) {
  RunConfig c;
  c.replications = 300;
  c.m = 15;
  const auto rows = parse_csv(run("simulate", c));
  std::set<std::string> tables;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    tables.insert(rows[i][0]);
    expect_twelve_digit_roundtrip(rows[i][5]);
    expect_twelve_digit_roundtrip(rows[i][6]);
  }
  for (const char* t : {"msem", "second_order", "msem_estimate_mean", "relative_bias_pct",
                        "prial_vs_direct", "prial_vs_univariate", "psi_mean",
                        "truncation_rate_pct"}) {
    EXPECT_TRUE(tables.count(t)) << t;
  }
}

TEST(CmdSimulate, JsonLayout) {
  RunConfig c;
  c.replications = 50;
  c.format = OutputFormat::kJson;
  const json j = json::parse(run("simulate", c));
  EXPECT_EQ(j["meta"]["m"], 30);
  EXPECT_EQ(j["per_area"].size(), 30u);
  EXPECT_EQ(j["per_group"].size(), 5u);
  const auto& g = j["per_group"][0];
  EXPECT_NEAR(g["msem"]["eblup_pr0"]["value_x100"][0][0].get<double>(),
              100.0 * g["msem"]["eblup_pr0"]["value"][0][0].get<double>(), 1e-8);
}

TEST(RunCommand, ExitCodes) {
  std::ostringstream out, err;
  RunConfig c;
  c.areas_path = "/nonexistent/areas.csv";
  c.covariance_path = "/nonexistent/cov.csv";
  EXPECT_EQ(run_command("fit", c, out, err), kExitValidation);
  EXPECT_NE(err.str().find("cannot open"), std::string::npos);
  EXPECT_EQ(run_command("bogus", fixture_config(), out, err), kExitValidation);
  RunConfig bad;
  bad.m = 31;
  EXPECT_EQ(run_command("simulate", bad, out, err), kExitValidation);
  RunConfig no_paths;
  EXPECT_EQ(run_command("predict", no_paths, out, err), kExitValidation);
}

TEST_F(CommandFiles, NumericFailureExitCode) {
  std::ofstream a(path("a.csv"));
  a << "area_id,y_1,x_1_1,x_1_2\n";
  for (int i = 0; i < 6; ++i) {
    a << fmt::format("r{},{},{},{}\n", i, i * 0.3, 1.0 + i, (i % 2 ? 1e-11 : -1e-11) * i);
  }
  a.close();
  std::ofstream cv(path("c.csv"));
  cv << "area_id,d_1_1\n";
  for (int i = 0; i < 6; ++i) cv << fmt::format("r{},1\n", i);
  cv.close();
  RunConfig c;
  c.areas_path = path("a.csv");
  c.covariance_path = path("c.csv");
  std::ostringstream out, err;
  EXPECT_EQ(run_command("fit", c, out, err), kExitNumeric) << err.str();
}

}  // namespace
}  // namespace mfh
