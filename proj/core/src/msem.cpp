#include "mfh/msem.hpp"

#include <fmt/format.h>

#include "mfh/covariance.hpp"
#include "mfh/errors.hpp"

namespace mfh {

namespace {

// Congruence S M S^T, symmetrized.
MatrixXd sandwich(const MatrixXd& s, const MatrixXd& m) {
  return symmetrize(s * m * s.transpose());
}

bool is_psd(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -1e-10 * scale;
}

}  // namespace

MsemTerms::MsemTerms(const MatrixXd& psi, const Dataset& data)
    : data_(data), psi_(symmetrize(psi)), fit_(gls_beta(psi_, data)) {
  const Eigen::Index k = data.k();
  const Eigen::Index k2 = k * k;
  kron_ = MatrixXd::Zero(k2, k2);
  for (const auto& area : data.areas()) {
    const MatrixXd v = psi_ + area.D;
    const Eigen::Map<const VectorXd> vec(v.data(), k2);
    // Column-major vec: vec(V W V) = (V kron V) vec(W) for symmetric V.
    for (Eigen::Index c1 = 0; c1 < k; ++c1) {
      for (Eigen::Index r1 = 0; r1 < k; ++r1) {
        kron_.block(r1 * k, c1 * k, k, k) += v(r1, c1) * v;
      }
    }
    kron_.noalias() += vec * vec.transpose();
  }
  bias_ = psi0_bias(psi_, data);
}

MatrixXd MsemTerms::g1(std::size_t a) const {
  const MatrixXd s = shrinkage_matrix(psi_, data_.area(a).D);
  return symmetrize(psi_ * s.transpose());
}

MatrixXd MsemTerms::g2(std::size_t a) const {
  const AreaRecord& area = data_.area(a);
  if (data_.s() == 0) return MatrixXd::Zero(data_.k(), data_.k());
  const MatrixXd sx = shrinkage_matrix(psi_, area.D) * area.X;
  return sandwich(sx, fit_.info_inverse);
}

MatrixXd MsemTerms::g3(std::size_t a) const {
  const AreaRecord& area = data_.area(a);
  const Eigen::Index k = data_.k();
  Eigen::LLT<MatrixXd> llt(psi_ + area.D);
  const MatrixXd w = llt.solve(MatrixXd::Identity(k, k));
  const Eigen::Map<const VectorXd> w_vec(w.data(), k * k);
  const VectorXd bracket_vec = kron_ * w_vec;
  const Eigen::Map<const MatrixXd> bracket(bracket_vec.data(), k, k);
  const double m = static_cast<double>(data_.m());
  return sandwich(area.D * w, bracket) / (m * m);
}

MatrixXd MsemTerms::g4(std::size_t a, PsiVariant variant) const {
  const Eigen::Index k = data_.k();
  switch (variant) {
    case PsiVariant::kPr1:
      return MatrixXd::Zero(k, k);
    case PsiVariant::kPr0:
      break;
    default:
      throw std::invalid_argument(fmt::format(
          "g4: unsupported variant '{}'", to_string(variant)));
  }
  const MatrixXd s = shrinkage_matrix(psi_, data_.area(a).D);
  return -sandwich(s, bias_);
}

MatrixXd g1(std::size_t a, const MatrixXd& psi, const Dataset& data) {
  const MatrixXd s = shrinkage_matrix(psi, data.area(a).D);
  return symmetrize(psi * s.transpose());
}

MatrixXd g2(std::size_t a, const MatrixXd& psi, const Dataset& data) {
  return MsemTerms(psi, data).g2(a);
}

MatrixXd g3(std::size_t a, const MatrixXd& psi, const Dataset& data) {
  return MsemTerms(psi, data).g3(a);
}

MatrixXd g4(std::size_t a, const MatrixXd& psi, const Dataset& data,
            PsiVariant variant) {
  if (variant == PsiVariant::kPr1) return MatrixXd::Zero(data.k(), data.k());
  const MatrixXd s = shrinkage_matrix(psi, data.area(a).D);
  return -sandwich(s, psi0_bias(psi, data));
}

MatrixXd msem_second_order(std::size_t a, const MatrixXd& psi,
                           const Dataset& data) {
  const MsemTerms terms(psi, data);
  return terms.g1(a) + terms.g2(a) + terms.g3(a);
}

std::vector<MsemReport> msem_estimate_all(const Dataset& data,
                                          const MatrixXd& psi_projected,
                                          PsiVariant variant) {
  const MsemTerms terms(psi_projected, data);
  std::vector<MsemReport> out;
  out.reserve(data.m());
  for (std::size_t a = 0; a < data.m(); ++a) {
    MsemReport r;
    r.area_id = data.area(a).area_id;
    r.psi_variant = variant;
    r.g1 = terms.g1(a);
    r.g2 = terms.g2(a);
    r.g3 = terms.g3(a);
    r.g4 = terms.g4(a, variant);
    r.approx = r.g1 + r.g2 + r.g3;
    r.estimate = r.g1 + r.g2 + 2.0 * r.g3 + r.g4;
    r.estimate_psd = is_psd(r.estimate);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MsemReport> msem_estimate_all(const Dataset& data,
                                          PsiVariant variant) {
  const CovarianceEstimate est = estimate_psi(data, variant);
  return msem_estimate_all(data, est.projected, variant);
}

MsemReport msem_estimate(std::size_t a, const Dataset& data,
                         PsiVariant variant) {
  if (a >= data.m()) throw std::out_of_range("area index out of range");
  return msem_estimate_all(data, variant)[a];
}

std::vector<MatrixXd> univariate_msem_estimate_all(const Dataset& data) {
  const Eigen::Index k = data.k();
  std::vector<MatrixXd> out(data.m(), MatrixXd::Zero(k, k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const Dataset sub = component_submodel(data, j);
    const auto reports = msem_estimate_all(sub, PsiVariant::kPr0);
    for (std::size_t a = 0; a < data.m(); ++a) {
      out[a](j, j) = reports[a].estimate(0, 0);
    }
  }
  return out;
}

MatrixXd univariate_msem_estimate(std::size_t a, const Dataset& data) {
  if (a >= data.m()) throw std::out_of_range("area index out of range");
  return univariate_msem_estimate_all(data)[a];
}

}  // namespace mfh
