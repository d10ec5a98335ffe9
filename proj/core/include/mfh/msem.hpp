#pragma once

// Mean squared error matrix (MSEM) of the EBLUP: the second-order
// approximation G1 + G2 + G3 and the second-order unbiased estimator
// G1 + G2 + 2 G3 + G4, all evaluated without ever inverting Psi.

#include <string>
#include <vector>

#include "mfh/gls.hpp"
#include "mfh/model.hpp"

namespace mfh {

/// Per-dataset quantities shared by the G terms at a fixed Psi. Holds a
/// reference to `data`, which must outlive this object.
class MsemTerms {
 public:
  MsemTerms(const MatrixXd& psi, const Dataset& data);

  /// Psi (Psi + D_a)^{-1} D_a.
  MatrixXd g1(std::size_t a) const;
  /// D_a V_a^{-1} X_a (sum_i X_i^T V_i^{-1} X_i)^{-1} X_a^T V_a^{-1} D_a.
  MatrixXd g2(std::size_t a) const;
  /// (1/m^2) D_a V_a^{-1} [sum_i V_i V_a^{-1} V_i + sum_i tr(V_i V_a^{-1}) V_i]
  /// V_a^{-1} D_a, with V_i = Psi + D_i.
  MatrixXd g3(std::size_t a) const;
  /// -D_a V_a^{-1} Bias(Psi) V_a^{-1} D_a; zero for PR1.
  MatrixXd g4(std::size_t a, PsiVariant variant) const;

  const GlsFit& fit() const noexcept { return fit_; }
  const MatrixXd& psi() const noexcept { return psi_; }

 private:
  const Dataset& data_;
  MatrixXd psi_;
  GlsFit fit_;
  // sum_i (V_i kron V_i + vec(V_i) vec(V_i)^T), so that the bracket in g3 is
  // unvec(kron_ * vec(V_a^{-1})).
  MatrixXd kron_;
  MatrixXd bias_;  // psi0_bias(Psi)
};

MatrixXd g1(std::size_t a, const MatrixXd& psi, const Dataset& data);
MatrixXd g2(std::size_t a, const MatrixXd& psi, const Dataset& data);
MatrixXd g3(std::size_t a, const MatrixXd& psi, const Dataset& data);
MatrixXd g4(std::size_t a, const MatrixXd& psi, const Dataset& data,
            PsiVariant variant);

/// G1 + G2 + G3 at the given (typically true) Psi.
MatrixXd msem_second_order(std::size_t a, const MatrixXd& psi,
                           const Dataset& data);

struct MsemReport {
  std::string area_id;
  MatrixXd g1, g2, g3, g4;
  MatrixXd approx;    // g1 + g2 + g3
  MatrixXd estimate;  // g1 + g2 + 2 g3 + g4
  PsiVariant psi_variant = PsiVariant::kPr0;
  bool estimate_psd = true;  // estimate is reported as-is even when false
};

/// All terms evaluated at the projected estimate of Psi.
MsemReport msem_estimate(std::size_t a, const Dataset& data,
                         PsiVariant variant);
std::vector<MsemReport> msem_estimate_all(const Dataset& data,
                                          PsiVariant variant);
/// Same, reusing an already projected estimate.
std::vector<MsemReport> msem_estimate_all(const Dataset& data,
                                          const MatrixXd& psi_projected,
                                          PsiVariant variant);

/// Diagonal MSEM estimates of the univariate EBLUP: component j uses the
/// scalar estimator on the component sub-model with the PR0 variance.
MatrixXd univariate_msem_estimate(std::size_t a, const Dataset& data);
std::vector<MatrixXd> univariate_msem_estimate_all(const Dataset& data);

}  // namespace mfh
