#include "mfh/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

#include "mfh/errors.hpp"

namespace mfh {

const char* to_string(PsiVariant v) noexcept {
  switch (v) {
    case PsiVariant::kPr0:
      return "pr0";
    case PsiVariant::kPr1:
      return "pr1";
    case PsiVariant::kUnivariate:
      return "univariate";
    case PsiVariant::kKnown:
      return "known";
  }
  return "unknown";
}

double relative_asymmetry(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

namespace {

void check_sampling_covariance(AreaRecord& rec) {
  if (!rec.D.allFinite()) {
    throw NonPositiveDefiniteD(rec.area_id, "non-finite entry");
  }
  const double asym = relative_asymmetry(rec.D);
  if (asym > tol::kSymmetry) {
    throw NonPositiveDefiniteD(rec.area_id,
                               fmt::format("relative asymmetry {:.3g}", asym));
  }
  rec.D = symmetrize(rec.D);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(rec.D, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NonPositiveDefiniteD(rec.area_id, "eigendecomposition failed");
  }
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > tol::kPositiveDefinite * std::max(1.0, lmax))) {
    throw NonPositiveDefiniteD(
        rec.area_id, fmt::format("smallest eigenvalue {:.6g}", lmin));
  }
}

}  // namespace

Dataset validate_dataset(std::vector<AreaRecord> areas) {
  if (areas.size() < 2) {
    throw DimensionMismatch(
        fmt::format("need at least 2 areas, got {}", areas.size()));
  }
  const Eigen::Index k = areas.front().y.size();
  const Eigen::Index s = areas.front().X.cols();
  if (k < 1) throw DimensionMismatch("response dimension k must be positive");

  std::unordered_set<std::string> seen;
  for (auto& rec : areas) {
    if (!seen.insert(rec.area_id).second) {
      throw DimensionMismatch("duplicate area_id '" + rec.area_id + "'");
    }
    if (rec.y.size() != k || rec.X.rows() != k || rec.X.cols() != s ||
        rec.D.rows() != k || rec.D.cols() != k) {
      throw DimensionMismatch(fmt::format(
          "area '{}': expected y[{}], X[{}x{}], D[{}x{}]; got y[{}], "
          "X[{}x{}], D[{}x{}]",
          rec.area_id, k, k, s, k, k, rec.y.size(), rec.X.rows(),
          rec.X.cols(), rec.D.rows(), rec.D.cols()));
    }
    if (!rec.y.allFinite() || !rec.X.allFinite()) {
      throw DimensionMismatch("area '" + rec.area_id +
                              "' has non-finite y or X entries");
    }
    check_sampling_covariance(rec);
  }

  Dataset data(std::move(areas), k, s);
  if (s > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(data.stacked_X());
    if (qr.rank() < s) {
      throw RankDeficientX(fmt::format(
          "stacked design has rank {} < s = {}", qr.rank(), s));
    }
  }
  return data;
}

Dataset validate_dataset(const Dataset& data) {
  return validate_dataset(
      std::vector<AreaRecord>(data.areas().begin(), data.areas().end()));
}

std::size_t Dataset::index_of(const std::string& area_id) const {
  const auto it =
      std::find_if(areas_.begin(), areas_.end(),
                   [&](const AreaRecord& r) { return r.area_id == area_id; });
  if (it == areas_.end()) {
    throw std::out_of_range("unknown area_id '" + area_id + "'");
  }
  return static_cast<std::size_t>(it - areas_.begin());
}

Dataset Dataset::with_responses(std::span<const VectorXd> y) const {
  if (y.size() != areas_.size()) {
    throw DimensionMismatch(fmt::format("expected {} response vectors, got {}",
                                        areas_.size(), y.size()));
  }
  std::vector<AreaRecord> copy = areas_;
  for (std::size_t i = 0; i < copy.size(); ++i) {
    if (y[i].size() != k_) {
      throw DimensionMismatch(fmt::format(
          "response {} has length {}, expected {}", i, y[i].size(), k_));
    }
    copy[i].y = y[i];
  }
  return Dataset(std::move(copy), k_, s_);
}

MatrixXd Dataset::stacked_X() const {
  MatrixXd X(static_cast<Eigen::Index>(m()) * k_, s_);
  for (std::size_t i = 0; i < m(); ++i) {
    X.middleRows(static_cast<Eigen::Index>(i) * k_, k_) = areas_[i].X;
  }
  return X;
}

VectorXd Dataset::stacked_y() const {
  VectorXd y(static_cast<Eigen::Index>(m()) * k_);
  for (std::size_t i = 0; i < m(); ++i) {
    y.segment(static_cast<Eigen::Index>(i) * k_, k_) = areas_[i].y;
  }
  return y;
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.k_ != b.k_ || a.s_ != b.s_ || a.m() != b.m()) return false;
  for (std::size_t i = 0; i < a.m(); ++i) {
    const auto& x = a.areas_[i];
    const auto& z = b.areas_[i];
    if (x.area_id != z.area_id || x.y != z.y || x.X != z.X || x.D != z.D) {
      return false;
    }
  }
  return true;
}

MatrixXd marginal_covariance(const MatrixXd& psi, const AreaRecord& record) {
  if (psi.rows() != record.D.rows() || psi.cols() != record.D.cols()) {
    throw DimensionMismatch(fmt::format("Psi is {}x{} but D is {}x{}",
                                        psi.rows(), psi.cols(),
                                        record.D.rows(), record.D.cols()));
  }
  return symmetrize(psi + record.D);
}

MatrixXd marginal_covariance(const ModelParams& params,
                             const AreaRecord& record) {
  return marginal_covariance(params.psi, record);
}

}  // namespace mfh
