#pragma once

// GLS regression and (empirical) best linear unbiased prediction.

#include <string>
#include <vector>

#include "mfh/covariance.hpp"
#include "mfh/model.hpp"

namespace mfh {

struct GlsFit {
  VectorXd beta_hat;
  MatrixXd info_matrix;   // sum_i X_i^T (Psi + D_i)^{-1} X_i
  MatrixXd info_inverse;  // covariance of beta_hat at the given Psi
  MatrixXd psi_used;
};

/// Solves the GLS normal equations one k x k block at a time; the km x km
/// covariance is never formed. Throws SingularInformation.
GlsFit gls_beta(const MatrixXd& psi, const Dataset& data);

struct Prediction {
  std::string area_id;
  VectorXd direct;     // y_a
  VectorXd fitted;     // X_a beta_hat (per-component fits for univariate)
  VectorXd theta_hat;  // direct - shrinkage * (direct - fitted)
  MatrixXd shrinkage;  // D_a (Psi + D_a)^{-1}
  MatrixXd psi_used;
  PsiVariant psi_variant = PsiVariant::kKnown;
};

/// D (Psi + D)^{-1}, computed by a Cholesky solve.
MatrixXd shrinkage_matrix(const MatrixXd& psi, const MatrixXd& D);

/// Eigenvalues of D (Psi + D)^{-1}, ascending. They lie in (0, 1] whenever
/// Psi is PSD and D is PD.
VectorXd shrinkage_eigenvalues(const MatrixXd& psi, const MatrixXd& D);

Prediction blup(std::size_t a, const MatrixXd& psi, const Dataset& data);
Prediction blup(std::size_t a, const GlsFit& fit, const Dataset& data,
                PsiVariant variant = PsiVariant::kKnown);
std::vector<Prediction> blup_all(const GlsFit& fit, const Dataset& data,
                                 PsiVariant variant = PsiVariant::kKnown);

struct EblupResult {
  CovarianceEstimate psi;
  GlsFit fit;
  std::vector<Prediction> predictions;
};

/// Estimates Psi (PR0 or PR1), projects it onto the PSD cone and predicts
/// every area with the shared GLS fit.
EblupResult eblup_all(const Dataset& data, PsiVariant variant);
Prediction eblup(std::size_t a, const Dataset& data, PsiVariant variant);

/// k independent scalar Fay-Herriot fits (one per component), stacked.
std::vector<Prediction> univariate_eblup_all(const Dataset& data);
Prediction univariate_eblup(std::size_t a, const Dataset& data);

struct CoefficientTest {
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided, normal reference
};

/// Wald z-tests of beta_j = 0 from the GLS information matrix.
std::vector<CoefficientTest> beta_inference(const GlsFit& fit);

}  // namespace mfh
