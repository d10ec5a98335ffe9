#include "mfh/gls.hpp"

#include <cassert>
#include <cmath>

#include <fmt/format.h>

#include "mfh/errors.hpp"

namespace mfh {

namespace {

// Reciprocal condition threshold below which the information matrix is
// treated as singular.
constexpr double kMinInfoRcond = 1e-13;

Eigen::LLT<MatrixXd> factor_marginal(const MatrixXd& psi,
                                     const AreaRecord& area) {
  Eigen::LLT<MatrixXd> llt(marginal_covariance(psi, area));
  if (llt.info() != Eigen::Success) {
    throw NumericError("Psi + D is not positive definite for area '" +
                       area.area_id + "'");
  }
  return llt;
}

}  // namespace

GlsFit gls_beta(const MatrixXd& psi, const Dataset& data) {
  const Eigen::Index s = data.s();
  GlsFit fit;
  fit.psi_used = psi;
  fit.info_matrix = MatrixXd::Zero(s, s);
  VectorXd rhs = VectorXd::Zero(s);
  for (const auto& area : data.areas()) {
    const auto llt = factor_marginal(psi, area);
    const MatrixXd vinv_x = llt.solve(area.X);
    fit.info_matrix.noalias() += area.X.transpose() * vinv_x;
    rhs.noalias() += vinv_x.transpose() * area.y;
  }
  fit.info_matrix = symmetrize(fit.info_matrix);
  if (s == 0) {
    fit.beta_hat = VectorXd(0);
    fit.info_inverse = MatrixXd(0, 0);
    return fit;
  }
  Eigen::LLT<MatrixXd> info_llt(fit.info_matrix);
  if (info_llt.info() != Eigen::Success || info_llt.rcond() < kMinInfoRcond) {
    throw SingularInformation(
        fmt::format("GLS information matrix is numerically singular "
                    "(rcond {:.3g})",
                    info_llt.info() == Eigen::Success ? info_llt.rcond() : 0.0));
  }
  fit.beta_hat = info_llt.solve(rhs);
  fit.info_inverse = symmetrize(info_llt.solve(MatrixXd::Identity(s, s)));
  return fit;
}

MatrixXd shrinkage_matrix(const MatrixXd& psi, const MatrixXd& D) {
  Eigen::LLT<MatrixXd> llt(symmetrize(psi + D));
  if (llt.info() != Eigen::Success) {
    throw NumericError("Psi + D is not positive definite");
  }
  // D V^{-1} = (V^{-1} D)^T for symmetric V and D.
  return llt.solve(D).transpose();
}

VectorXd shrinkage_eigenvalues(const MatrixXd& psi, const MatrixXd& D) {
  // D x = lambda (Psi + D) x has the eigenvalues of (Psi + D)^{-1} D, which
  // is similar to D (Psi + D)^{-1}.
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(
      symmetrize(D), symmetrize(psi + D), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw EigenFailure("shrinkage_eigenvalues: solver failed");
  }
  return es.eigenvalues();
}

Prediction blup(std::size_t a, const GlsFit& fit, const Dataset& data,
                PsiVariant variant) {
  const AreaRecord& area = data.area(a);
  Prediction p;
  p.area_id = area.area_id;
  p.direct = area.y;
  p.fitted = area.X * fit.beta_hat;
  p.shrinkage = shrinkage_matrix(fit.psi_used, area.D);
  p.theta_hat = p.direct - p.shrinkage * (p.direct - p.fitted);
  p.psi_used = fit.psi_used;
  p.psi_variant = variant;
#ifndef NDEBUG
  const VectorXd ev = shrinkage_eigenvalues(fit.psi_used, area.D);
  assert(ev.minCoeff() >= -1e-10 && ev.maxCoeff() <= 1.0 + 1e-10);
#endif
  return p;
}

Prediction blup(std::size_t a, const MatrixXd& psi, const Dataset& data) {
  return blup(a, gls_beta(psi, data), data, PsiVariant::kKnown);
}

std::vector<Prediction> blup_all(const GlsFit& fit, const Dataset& data,
                                 PsiVariant variant) {
  std::vector<Prediction> out;
  out.reserve(data.m());
  for (std::size_t a = 0; a < data.m(); ++a) {
    out.push_back(blup(a, fit, data, variant));
  }
  return out;
}

EblupResult eblup_all(const Dataset& data, PsiVariant variant) {
  EblupResult res;
  res.psi = estimate_psi(data, variant);
  res.fit = gls_beta(res.psi.projected, data);
  res.predictions = blup_all(res.fit, data, variant);
  return res;
}

Prediction eblup(std::size_t a, const Dataset& data, PsiVariant variant) {
  if (a >= data.m()) throw std::out_of_range("area index out of range");
  const CovarianceEstimate est = estimate_psi(data, variant);
  return blup(a, gls_beta(est.projected, data), data, variant);
}

std::vector<Prediction> univariate_eblup_all(const Dataset& data) {
  const Eigen::Index k = data.k();
  std::vector<Prediction> out(data.m());
  for (std::size_t a = 0; a < data.m(); ++a) {
    const AreaRecord& area = data.area(a);
    out[a].area_id = area.area_id;
    out[a].direct = area.y;
    out[a].fitted = VectorXd::Zero(k);
    out[a].theta_hat = VectorXd::Zero(k);
    out[a].shrinkage = MatrixXd::Zero(k, k);
    out[a].psi_used = MatrixXd::Zero(k, k);
    out[a].psi_variant = PsiVariant::kUnivariate;
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const Dataset sub = component_submodel(data, j);
    const double psi_j = std::max(0.0, psi_pr0(sub)(0, 0));
    const MatrixXd psi = MatrixXd::Constant(1, 1, psi_j);
    const GlsFit fit = gls_beta(psi, sub);
    for (std::size_t a = 0; a < data.m(); ++a) {
      const AreaRecord& area = sub.area(a);
      const double fitted = (area.X * fit.beta_hat)(0);
      const double d = area.D(0, 0);
      const double shrink = d / (psi_j + d);
      Prediction& p = out[a];
      p.fitted(j) = fitted;
      p.shrinkage(j, j) = shrink;
      p.psi_used(j, j) = psi_j;
      p.theta_hat(j) = area.y(0) - shrink * (area.y(0) - fitted);
    }
  }
  return out;
}

Prediction univariate_eblup(std::size_t a, const Dataset& data) {
  if (a >= data.m()) throw std::out_of_range("area index out of range");
  return univariate_eblup_all(data)[a];
}

std::vector<CoefficientTest> beta_inference(const GlsFit& fit) {
  const Eigen::Index s = fit.beta_hat.size();
  std::vector<CoefficientTest> out(static_cast<std::size_t>(s));
  if (s == 0) return out;
  Eigen::LLT<MatrixXd> llt(fit.info_matrix);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinInfoRcond) {
    throw SingularInformation("beta_inference: information matrix singular");
  }
  const MatrixXd cov = llt.solve(MatrixXd::Identity(s, s));
  for (Eigen::Index j = 0; j < s; ++j) {
    auto& row = out[static_cast<std::size_t>(j)];
    row.estimate = fit.beta_hat(j);
    row.std_error = std::sqrt(cov(j, j));
    row.z = row.estimate / row.std_error;
    row.p_value = std::erfc(std::abs(row.z) / std::sqrt(2.0));
  }
  return out;
}

}  // namespace mfh
