#pragma once

// Domain types for the multivariate Fay-Herriot area-level model
//
//   y_i = X_i beta + v_i + e_i,   v_i ~ N_k(0, Psi),   e_i ~ N_k(0, D_i),
//
// for areas i = 1..m, with D_i known and Psi unknown.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mfh {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Which estimate of Psi a prediction or MSEM report was built from.
enum class PsiVariant {
  kPr0,         // moment estimator with OLS residuals
  kPr1,         // PR0 with one-step plug-in bias correction
  kUnivariate,  // per-component scalar fits
  kKnown,       // caller-supplied Psi
};

const char* to_string(PsiVariant v) noexcept;

namespace tol {
/// max|A - A^T| / max(1, max|A|) accepted for input covariance matrices.
inline constexpr double kSymmetry = 1e-10;
/// D is PD when lambda_min > kPositiveDefinite * max(1, lambda_max).
inline constexpr double kPositiveDefinite = 1e-12;
}  // namespace tol

struct AreaRecord {
  std::string area_id;
  VectorXd y;  // k direct estimates
  MatrixXd X;  // k x s covariates
  MatrixXd D;  // k x k sampling covariance
};

class Dataset;

/// Checks dimensions, symmetry and positive definiteness of every D_i and the
/// column rank of the stacked design. Symmetrizes D_i on success.
///
/// Throws DimensionMismatch, NonPositiveDefiniteD or RankDeficientX.
Dataset validate_dataset(std::vector<AreaRecord> areas);
Dataset validate_dataset(const Dataset& data);

/// A validated collection of m >= 2 areas sharing k and s. Immutable.
class Dataset {
 public:
  std::size_t m() const noexcept { return areas_.size(); }
  Eigen::Index k() const noexcept { return k_; }
  Eigen::Index s() const noexcept { return s_; }

  const AreaRecord& area(std::size_t i) const { return areas_.at(i); }
  std::span<const AreaRecord> areas() const noexcept { return areas_; }

  /// Index of the area with the given id; throws std::out_of_range.
  std::size_t index_of(const std::string& area_id) const;

  /// Same areas, covariates and sampling covariances with new responses.
  /// X and D are already validated so only the response sizes are checked.
  Dataset with_responses(std::span<const VectorXd> y) const;

  /// Stacked km x s design.
  MatrixXd stacked_X() const;
  /// Stacked km response vector.
  VectorXd stacked_y() const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  friend Dataset validate_dataset(std::vector<AreaRecord> areas);

  Dataset(std::vector<AreaRecord> areas, Eigen::Index k, Eigen::Index s)
      : areas_(std::move(areas)), k_(k), s_(s) {}

  std::vector<AreaRecord> areas_;
  Eigen::Index k_ = 0;
  Eigen::Index s_ = 0;
};

struct ModelParams {
  VectorXd beta;
  MatrixXd psi;
};

/// Psi + D_i, the marginal covariance of y_i.
MatrixXd marginal_covariance(const ModelParams& params,
                             const AreaRecord& record);
MatrixXd marginal_covariance(const MatrixXd& psi, const AreaRecord& record);

/// (A + A^T) / 2.
inline MatrixXd symmetrize(const MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

/// max|A - A^T| / max(1, max|A|).
double relative_asymmetry(const MatrixXd& a);

}  // namespace mfh
