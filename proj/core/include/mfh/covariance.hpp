#pragma once

// Moment estimation of the random-effect covariance Psi.

#include <vector>

#include "mfh/model.hpp"

namespace mfh {

/// Spectral clamp of a symmetric matrix onto the PSD cone.
struct PsdProjection {
  MatrixXd projected;       // H diag(max(0, lambda)) H^T
  VectorXd eigenvalues;     // lambda, ascending
  MatrixXd eigenvectors;    // H, orthonormal columns
  std::vector<bool> truncated;  // lambda_j < 0

  bool any_truncated() const noexcept;
};

struct CovarianceEstimate {
  PsiVariant variant = PsiVariant::kPr0;
  MatrixXd raw;        // before projection; may be indefinite
  MatrixXd projected;  // PSD
  VectorXd eigenvalues_raw;
  MatrixXd eigenvectors;
  std::vector<bool> truncated;

  bool any_truncated() const noexcept;
};

/// Ordinary least squares on the stacked design via column-pivoted QR.
/// Throws RankDeficientX.
VectorXd ols_beta(const Dataset& data);

/// (1/m) sum_i { r_i r_i^T - D_i } with OLS residuals r_i.
MatrixXd psi_pr0(const Dataset& data);

/// Exact O(1/m) bias E[psi_pr0] - Psi evaluated at the given Psi.
MatrixXd psi0_bias(const MatrixXd& psi, const Dataset& data);

/// One-step bias-corrected estimator psi_pr0 - psi0_bias(psi_pr0).
MatrixXd psi_pr1(const Dataset& data);

/// Throws EigenFailure on non-finite input or solver non-convergence.
PsdProjection psd_project(const MatrixXd& raw);

/// psi_pr0 or psi_pr1 followed by psd_project.
CovarianceEstimate estimate_psi(const Dataset& data, PsiVariant variant);

/// Scalar (k = 1) sub-model for component j (0-based): y_ij, the j-th row of
/// each X_i restricted to columns that are nonzero in row j for some area, and
/// D_i(j, j). Throws RankDeficientX if the reduced design loses rank.
Dataset component_submodel(const Dataset& data, Eigen::Index j);

/// max(0, psi_pr0) on the component-j sub-model.
double univariate_psi(const Dataset& data, Eigen::Index j);

}  // namespace mfh
