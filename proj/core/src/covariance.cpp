#include "mfh/covariance.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "mfh/errors.hpp"

namespace mfh {

bool PsdProjection::any_truncated() const noexcept {
  return std::find(truncated.begin(), truncated.end(), true) != truncated.end();
}

bool CovarianceEstimate::any_truncated() const noexcept {
  return std::find(truncated.begin(), truncated.end(), true) != truncated.end();
}

VectorXd ols_beta(const Dataset& data) {
  const Eigen::Index s = data.s();
  if (s == 0) return VectorXd(0);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(data.stacked_X());
  if (qr.rank() < s) {
    throw RankDeficientX(
        fmt::format("stacked design has rank {} < s = {}", qr.rank(), s));
  }
  return qr.solve(data.stacked_y());
}

MatrixXd psi_pr0(const Dataset& data) {
  const VectorXd beta = ols_beta(data);
  const Eigen::Index k = data.k();
  MatrixXd acc = MatrixXd::Zero(k, k);
  for (const auto& area : data.areas()) {
    const VectorXd r = area.y - area.X * beta;
    acc.noalias() += r * r.transpose();
    acc -= area.D;
  }
  return symmetrize(acc / static_cast<double>(data.m()));
}

MatrixXd psi0_bias(const MatrixXd& psi, const Dataset& data) {
  const Eigen::Index k = data.k();
  const Eigen::Index s = data.s();
  if (psi.rows() != k || psi.cols() != k) {
    throw DimensionMismatch(fmt::format("Psi must be {0}x{0}", k));
  }
  if (s == 0) return MatrixXd::Zero(k, k);

  MatrixXd xtx = MatrixXd::Zero(s, s);
  MatrixXd middle = MatrixXd::Zero(s, s);  // sum_j X_j^T (Psi + D_j) X_j
  for (const auto& area : data.areas()) {
    xtx.noalias() += area.X.transpose() * area.X;
    middle.noalias() += area.X.transpose() * (psi + area.D) * area.X;
  }
  Eigen::LLT<MatrixXd> llt(xtx);
  if (llt.info() != Eigen::Success) {
    throw RankDeficientX("X^T X is not positive definite");
  }
  const MatrixXd xtx_inv = llt.solve(MatrixXd::Identity(s, s));
  const MatrixXd sandwich = xtx_inv * middle * xtx_inv;

  MatrixXd acc = MatrixXd::Zero(k, k);
  for (const auto& area : data.areas()) {
    const MatrixXd hat = area.X * xtx_inv * area.X.transpose();
    const MatrixXd v = psi + area.D;
    acc.noalias() += area.X * sandwich * area.X.transpose();
    acc.noalias() -= v * hat;
    acc.noalias() -= hat * v;
  }
  return symmetrize(acc / static_cast<double>(data.m()));
}

MatrixXd psi_pr1(const Dataset& data) {
  const MatrixXd pr0 = psi_pr0(data);
  return symmetrize(pr0 - psi0_bias(pr0, data));
}

PsdProjection psd_project(const MatrixXd& raw) {
  if (raw.rows() != raw.cols()) {
    throw DimensionMismatch("psd_project needs a square matrix");
  }
  if (!raw.allFinite()) {
    throw EigenFailure("psd_project: non-finite input");
  }
  const MatrixXd sym = symmetrize(raw);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw EigenFailure("psd_project: eigendecomposition did not converge");
  }
  PsdProjection out;
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();
  // Round-off negatives on a PSD input are not truncations.
  const double floor =
      -1e-12 * std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
  out.truncated.resize(static_cast<std::size_t>(sym.rows()));
  for (Eigen::Index j = 0; j < sym.rows(); ++j) {
    out.truncated[static_cast<std::size_t>(j)] = out.eigenvalues(j) < floor;
  }
  if (!out.any_truncated()) {
    out.projected = sym;
    return out;
  }
  const VectorXd clamped = out.eigenvalues.cwiseMax(0.0);
  out.projected = symmetrize(out.eigenvectors * clamped.asDiagonal() *
                             out.eigenvectors.transpose());
  return out;
}

CovarianceEstimate estimate_psi(const Dataset& data, PsiVariant variant) {
  CovarianceEstimate est;
  est.variant = variant;
  switch (variant) {
    case PsiVariant::kPr0:
      est.raw = psi_pr0(data);
      break;
    case PsiVariant::kPr1:
      est.raw = psi_pr1(data);
      break;
    default:
      throw std::invalid_argument(
          fmt::format("estimate_psi: unsupported variant '{}'",
                      to_string(variant)));
  }
  PsdProjection proj = psd_project(est.raw);
  est.projected = std::move(proj.projected);
  est.eigenvalues_raw = std::move(proj.eigenvalues);
  est.eigenvectors = std::move(proj.eigenvectors);
  est.truncated = std::move(proj.truncated);
  return est;
}

Dataset component_submodel(const Dataset& data, Eigen::Index j) {
  if (j < 0 || j >= data.k()) {
    throw DimensionMismatch(
        fmt::format("component {} out of range [0, {})", j, data.k()));
  }
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < data.s(); ++c) {
    const bool used = std::any_of(
        data.areas().begin(), data.areas().end(),
        [&](const AreaRecord& a) { return a.X(j, c) != 0.0; });
    if (used) active.push_back(c);
  }
  std::vector<AreaRecord> sub;
  sub.reserve(data.m());
  for (const auto& area : data.areas()) {
    AreaRecord rec;
    rec.area_id = area.area_id;
    rec.y = VectorXd::Constant(1, area.y(j));
    rec.X.resize(1, static_cast<Eigen::Index>(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c) {
      rec.X(0, static_cast<Eigen::Index>(c)) = area.X(j, active[c]);
    }
    rec.D = MatrixXd::Constant(1, 1, area.D(j, j));
    sub.push_back(std::move(rec));
  }
  return validate_dataset(std::move(sub));
}

double univariate_psi(const Dataset& data, Eigen::Index j) {
  return std::max(0.0, psi_pr0(component_submodel(data, j))(0, 0));
}

}  // namespace mfh
