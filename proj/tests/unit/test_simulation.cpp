#include <gtest/gtest.h>

#include <cstring>

#include "mfh/covariance.hpp"
#include "mfh/errors.hpp"
#include "mfh/gls.hpp"
#include "mfh/msem.hpp"
#include "mfh/simulation.hpp"
#include "oracles.hpp"

namespace mfh {
namespace {

using testing::max_abs_diff;

SimulationDesign small_design(std::size_t reps, double rho = 0.5) {
  SimulationDesign d;
  d.m = 30;
  d.rho = rho;
  d.replications = reps;
  d.seed = 99;
  return d;
}

bool identical(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    if (std::memcmp(a[i].data(), b[i].data(), sizeof(double) * a[i].size()) != 0) {
      return false;
    }
  }
  return true;
}

TEST(SimulationDesign, GroupsAndSamplingCovariances) {
  const SimulationDesign d = small_design(1);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(d.group_of(i), 0u);
    EXPECT_EQ(d.sampling_covariance(i), 0.7 * MatrixXd::Identity(2, 2));
  }
  EXPECT_EQ(d.group_of(6), 1u);
  EXPECT_EQ(d.sampling_covariance(29), 0.3 * MatrixXd::Identity(2, 2));
  SimulationDesign b = d;
  b.pattern = DPattern::kB;
  EXPECT_EQ(b.sampling_covariance(0), 2.0 * MatrixXd::Identity(2, 2));
  EXPECT_EQ(b.sampling_covariance(29), 0.2 * MatrixXd::Identity(2, 2));
}

TEST(SimulationDesign, TruePsi) {
  SimulationDesign d = small_design(1, 0.0);
  MatrixXd diag = MatrixXd::Zero(2, 2);
  diag.diagonal() << 1.5, 0.5;
  EXPECT_LT(max_abs_diff(d.true_psi(), diag), 1e-15);
  d.rho = 0.5;
  EXPECT_NEAR(d.true_psi()(0, 1), 0.5 * std::sqrt(0.75), 1e-15);
  d.k = 3;
  EXPECT_NEAR(d.true_psi()(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(d.true_psi()(0, 2), 0.5 * std::sqrt(0.75), 1e-15);
}

TEST(SimulationDesign, Validation) {
  SimulationDesign d = small_design(10);
  EXPECT_NO_THROW(d.validate());
  d.m = 31;
  EXPECT_THROW(d.validate(), ValidationError);
  d = small_design(10);
  d.k = 4;
  EXPECT_THROW(d.validate(), ValidationError);
  d = small_design(10, 1.5);
  EXPECT_THROW(d.validate(), ValidationError);
  d = small_design(0);
  EXPECT_THROW(d.validate(), ValidationError);
  d = small_design(10, -0.9);
  d.k = 3;
  EXPECT_THROW(d.validate(), ValidationError);
  d.k = 2;
  EXPECT_NO_THROW(d.validate());
}

TEST(GenerateReplication, DeterministicPerIndex) {
  const SimulationDesign d = small_design(1);
  const Replication a = generate_replication(d, 17);
  const Replication b = generate_replication(d, 17);
  const Replication c = generate_replication(d, 18);
  EXPECT_TRUE(a.data == b.data);
  EXPECT_TRUE(identical(std::vector<MatrixXd>(a.theta.begin(), a.theta.end()),
                        std::vector<MatrixXd>(b.theta.begin(), b.theta.end())));
  EXPECT_FALSE(a.data == c.data);
  EXPECT_EQ(a.data.area(0).X, MatrixXd::Identity(2, 2));
  EXPECT_EQ(a.data.area(3).D, 0.7 * MatrixXd::Identity(2, 2));
}

TEST(GenerateReplication, UncorrelatedEffectsAtZeroRho) {
  SimulationDesign d = small_design(1, 0.0);
  d.m = 1000;
  double sum = 0.0, sumsq = 0.0, s0 = 0.0, s1 = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    for (const auto& t : generate_replication(d, r).theta) {
      const double p = t(0) * t(1);
      sum += p;
      sumsq += p * p;
      s0 += t(0) * t(0);
      s1 += t(1) * t(1);
      ++n;
    }
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / (n - 1.0));
  EXPECT_LT(std::abs(mean), 4.0 * se);
  EXPECT_NEAR(s0 / n, 1.5, 0.05);
  EXPECT_NEAR(s1 / n, 0.5, 0.02);
}

TEST(SimulateMsem, DirectConvergesToSamplingCovariance) {
  const SimulationDesign d = small_design(20000);
  const MsemTable t = simulate_msem(d, Predictor::kDirect);
  const double reps = static_cast<double>(d.replications);
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    const double c = d.group_multipliers()[g];
    const double se_diag = c * std::sqrt(2.0 / reps / d.areas_per_group());
    const double se_off = c * std::sqrt(1.0 / reps / d.areas_per_group());
    EXPECT_NEAR(t.per_group[g](0, 0), c, 4.0 * se_diag);
    EXPECT_NEAR(t.per_group[g](1, 1), c, 4.0 * se_diag);
    EXPECT_NEAR(t.per_group[g](0, 1), 0.0, 4.0 * se_off);
  }
}

TEST(SimulateMsem, DirectErrorHalvesWhenReplicationsQuadruple) {
  auto error = [](std::size_t reps) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      SimulationDesign d = small_design(reps);
      d.seed = seed;
      const MsemTable t = simulate_msem(d, Predictor::kDirect);
      double e = 0.0;
      for (std::size_t a = 0; a < d.m; ++a) {
        e += (t.per_area[a] - d.sampling_covariance(a)).squaredNorm();
      }
      total += std::sqrt(e);
    }
    return total / 12.0;
  };
  const double ratio = error(2000) / error(500);
  EXPECT_GT(ratio, 0.5 * 0.7);
  EXPECT_LT(ratio, 0.5 * 1.3);
}

TEST(RunSimulation, BitIdenticalAcrossWorkerCounts) {
  SimulationDesign d = small_design(1000);
  SimulationOptions opt;
  opt.msem_estimator = PsiVariant::kPr0;
  opt.psi_statistics = true;
  opt.workers = 1;
  const SimulationResult one = run_simulation(d, opt);
  opt.workers = 8;
  const SimulationResult eight = run_simulation(d, opt);
  for (const auto& [p, table] : one.msem) {
    EXPECT_TRUE(identical(table.per_area, eight.msem.at(p).per_area)) << to_string(p);
    EXPECT_TRUE(identical(table.per_group, eight.msem.at(p).per_group));
  }
  EXPECT_TRUE(identical(one.mean_msem_estimate->per_area,
                        eight.mean_msem_estimate->per_area));
  EXPECT_EQ(one.psi->frobenius_error_pr1, eight.psi->frobenius_error_pr1);
  EXPECT_EQ(one.psi->truncation_rate_pr0, eight.psi->truncation_rate_pr0);
}

TEST(RunSimulation, PredictorsShareReplications) {
  const SimulationDesign d = small_design(600);
  SimulationOptions all;
  const SimulationResult joint = run_simulation(d, all);
  for (const auto p : all.predictors) {
    EXPECT_TRUE(identical(joint.msem.at(p).per_area, simulate_msem(d, p).per_area))
        << to_string(p);
  }
}

TEST(RunSimulation, PsiStatistics) {
  const SimulationDesign d = small_design(4000);
  SimulationOptions opt;
  opt.predictors = {};
  opt.psi_statistics = true;
  const SimulationResult r = run_simulation(d, opt);
  ASSERT_TRUE(r.psi.has_value());
  EXPECT_EQ(r.psi->frobenius_error_pr0.size(), 4000u);
  EXPECT_GE(r.psi->truncation_rate_pr0, 0.0);
  EXPECT_LE(r.psi->truncation_rate_pr0, 1.0);
  const Dataset base = design_dataset(d);
  const MatrixXd expected_pr0 = d.true_psi() + psi0_bias(d.true_psi(), base);
  EXPECT_LT(max_abs_diff(r.psi->mean_pr0, expected_pr0), 0.05);
}

TEST(Prial, SelfComparisonIsZero) {
  const MatrixXd a = MatrixXd::Identity(2, 2) * 0.37;
  EXPECT_EQ(prial_value(a, a), 0.0);
  EXPECT_NEAR(prial_value(0.5 * a, a), 50.0, 1e-12);
}

TEST(Prial, ImprovesMostWhereSamplingVarianceIsLargest) {
  const PrialReport r = prial(small_design(5000, 0.75));
  ASSERT_EQ(r.vs_direct.size(), kNumGroups);
  for (std::size_t g = 1; g < kNumGroups; ++g) {
    EXPECT_GT(r.vs_direct[g - 1], r.vs_direct[g]);
  }
  for (double v : r.vs_direct) EXPECT_LE(v, 100.0);
}

TEST(RelativeBias, PerfectEstimatorHasZeroBias) {
  const SimulationDesign d = small_design(1);
  std::vector<MatrixXd> truth;
  for (std::size_t a = 0; a < d.m; ++a) {
    truth.push_back((MatrixXd(2, 2) << 0.4 + 0.01 * a, 0.1, 0.1, 0.3).finished());
  }
  const RelativeBiasReport r = relative_bias(d, truth, truth);
  for (const auto& g : r.per_group) EXPECT_EQ(g, MatrixXd::Zero(2, 2));
}

TEST(RelativeBias, FlagsNearZeroTruth) {
  const SimulationDesign d = small_design(1);
  std::vector<MatrixXd> truth(d.m, MatrixXd::Identity(2, 2));
  std::vector<MatrixXd> est(d.m, 1.1 * MatrixXd::Identity(2, 2));
  const RelativeBiasReport r = relative_bias(d, est, truth);
  EXPECT_NEAR(r.per_group[2](0, 0), 10.0, 1e-12);
  EXPECT_TRUE(std::isnan(r.per_group[2](0, 1)));
  EXPECT_FALSE(r.applicable[2](0, 1));
  EXPECT_TRUE(r.applicable[2](1, 1));
}

TEST(SecondOrderTable, MatchesPerAreaTerms) {
  const SimulationDesign d = small_design(1, 0.25);
  const MsemTable t = second_order_table(d);
  const Dataset data = design_dataset(d);
  for (std::size_t a = 0; a < d.m; a += 7) {
    EXPECT_LT(max_abs_diff(t.per_area[a], msem_second_order(a, d.true_psi(), data)),
              1e-15);
  }
}

TEST(MsemEstimatorBias, ReturnsOneMatrixPerGroup) {
  const RelativeBiasReport r =
      msem_estimator_bias(small_design(300), PsiVariant::kPr1, 2);
  ASSERT_EQ(r.per_group.size(), kNumGroups);
  for (const auto& g : r.per_group) EXPECT_TRUE(g.allFinite());
}

}  // namespace
}  // namespace mfh
