#pragma once

// Monte Carlo engine for the no-covariate design X_i = I_k with five groups
// of areas sharing a sampling covariance c_g I_k.
//
// Replications are split into fixed-size blocks. Each block is accumulated
// sequentially and blocks are combined by pairwise reduction in index order,
// so results are bit-identical for any number of workers.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mfh/model.hpp"

namespace mfh {

enum class DPattern { kA, kB };

enum class Predictor { kDirect, kEblupPr0, kEblupPr1, kUnivariate };

const char* to_string(DPattern p) noexcept;
const char* to_string(Predictor p) noexcept;

inline constexpr std::size_t kNumGroups = 5;

struct SimulationDesign {
  int k = 2;
  std::size_t m = 30;
  double rho = 0.5;
  DPattern pattern = DPattern::kA;
  std::size_t replications = 50'000;
  std::uint64_t seed = 20190605;

  /// psi_2 = (sqrt 1.5, sqrt 0.5), psi_3 = (sqrt 1.5, 1, sqrt 0.5).
  VectorXd psi_base() const;
  /// rho psi psi^T + (1 - rho) diag(psi psi^T).
  MatrixXd true_psi() const;
  /// (a) 0.7 0.6 0.5 0.4 0.3, (b) 2.0 0.6 0.5 0.4 0.2.
  std::array<double, kNumGroups> group_multipliers() const;
  std::size_t areas_per_group() const { return m / kNumGroups; }
  std::size_t group_of(std::size_t area) const;
  MatrixXd sampling_covariance(std::size_t area) const;

  /// Throws ValidationError for unsupported k, m not divisible by 5, rho
  /// outside [-1, 1], a non-PSD Psi or zero replications.
  void validate() const;
};

/// Observable dataset (y only; X_i = I_k, beta = 0) with y set to zero.
Dataset design_dataset(const SimulationDesign& design);

struct Replication {
  Dataset data;
  std::vector<VectorXd> theta;  // hidden X_i beta + v_i
};

Replication generate_replication(const SimulationDesign& design,
                                 std::size_t r);

struct MsemTable {
  std::vector<MatrixXd> per_area;   // length m
  std::vector<MatrixXd> per_group;  // length 5, mean over areas in group
};

/// Mean of per-area matrices within each group.
std::vector<MatrixXd> group_average(const SimulationDesign& design,
                                    const std::vector<MatrixXd>& per_area);

struct PsiStatistics {
  MatrixXd mean_pr0;  // mean of the raw (unprojected) estimators
  MatrixXd mean_pr1;
  double truncation_rate_pr0 = 0.0;
  double truncation_rate_pr1 = 0.0;
  std::vector<double> frobenius_error_pr0;  // ||Psi_hat - Psi||_F per rep
  std::vector<double> frobenius_error_pr1;
};

struct SimulationOptions {
  std::vector<Predictor> predictors{Predictor::kDirect, Predictor::kEblupPr0,
                                    Predictor::kEblupPr1,
                                    Predictor::kUnivariate};
  /// Also average msem_estimate over replications for this variant.
  std::optional<PsiVariant> msem_estimator;
  bool psi_statistics = false;
  unsigned workers = 1;  // 0 selects std::thread::hardware_concurrency()
  std::size_t block_size = 256;
};

struct SimulationResult {
  SimulationDesign design;
  std::map<Predictor, MsemTable> msem;  // simulated true MSEM
  std::optional<MsemTable> mean_msem_estimate;
  std::optional<PsiStatistics> psi;
};

SimulationResult run_simulation(const SimulationDesign& design,
                                const SimulationOptions& options);

MsemTable simulate_msem(const SimulationDesign& design, Predictor predictor,
                        unsigned workers = 1);

/// 100 (1 - tr(numerator) / tr(denominator)).
double prial_value(const MatrixXd& numerator, const MatrixXd& denominator);

struct PrialReport {
  Predictor eblup = Predictor::kEblupPr0;
  std::vector<double> vs_direct;      // per group
  std::vector<double> vs_univariate;  // per group
  std::vector<MatrixXd> eblup_msem;   // per group
  std::vector<MatrixXd> direct_msem;
  std::vector<MatrixXd> univariate_msem;
};

/// Both PRIAL variants from one set of replications shared by all predictors.
PrialReport prial(const SimulationDesign& design,
                  PsiVariant variant = PsiVariant::kPr0, unsigned workers = 1);
PrialReport prial_from(const SimulationResult& result, Predictor eblup);

struct RelativeBiasReport {
  /// 100 (E[estimate] - MSEM) / MSEM entrywise, per area then averaged in
  /// group. Entries whose true MSEM is below kNearZero in magnitude for any
  /// area of the group are NaN and flagged not applicable.
  std::vector<MatrixXd> per_group;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> applicable;

  static constexpr double kNearZero = 1e-6;
};

RelativeBiasReport relative_bias(const SimulationDesign& design,
                                 const std::vector<MatrixXd>& mean_estimate,
                                 const std::vector<MatrixXd>& true_msem);

RelativeBiasReport msem_estimator_bias(const SimulationDesign& design,
                                       PsiVariant variant,
                                       unsigned workers = 1);

/// G1 + G2 + G3 at the true Psi for every area of the design.
MsemTable second_order_table(const SimulationDesign& design);

}  // namespace mfh
