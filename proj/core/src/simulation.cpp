#include "mfh/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "mfh/covariance.hpp"
#include "mfh/errors.hpp"
#include "mfh/gls.hpp"
#include "mfh/msem.hpp"
#include "mfh/rng.hpp"

namespace mfh {

const char* to_string(DPattern p) noexcept {
  switch (p) {
    case DPattern::kA:
      return "a";
    case DPattern::kB:
      return "b";
  }
  return "?";
}

const char* to_string(Predictor p) noexcept {
  switch (p) {
    case Predictor::kDirect:
      return "direct";
    case Predictor::kEblupPr0:
      return "eblup_pr0";
    case Predictor::kEblupPr1:
      return "eblup_pr1";
    case Predictor::kUnivariate:
      return "univariate";
  }
  return "?";
}

VectorXd SimulationDesign::psi_base() const {
  VectorXd psi(k);
  if (k == 2) {
    psi << std::sqrt(1.5), std::sqrt(0.5);
  } else if (k == 3) {
    psi << std::sqrt(1.5), 1.0, std::sqrt(0.5);
  } else {
    throw ValidationError(fmt::format("simulation supports k = 2 or 3, got {}", k));
  }
  return psi;
}

MatrixXd SimulationDesign::true_psi() const {
  const VectorXd b = psi_base();
  const MatrixXd outer = b * b.transpose();
  MatrixXd psi = rho * outer;
  psi.diagonal() = outer.diagonal();
  return psi;
}

std::array<double, kNumGroups> SimulationDesign::group_multipliers() const {
  if (pattern == DPattern::kA) return {0.7, 0.6, 0.5, 0.4, 0.3};
  return {2.0, 0.6, 0.5, 0.4, 0.2};
}

std::size_t SimulationDesign::group_of(std::size_t area) const {
  return area / areas_per_group();
}

MatrixXd SimulationDesign::sampling_covariance(std::size_t area) const {
  return group_multipliers()[group_of(area)] * MatrixXd::Identity(k, k);
}

void SimulationDesign::validate() const {
  psi_base();
  if (m == 0 || m % kNumGroups != 0) {
    throw ValidationError(
        fmt::format("m must be a positive multiple of {}, got {}", kNumGroups, m));
  }
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw ValidationError(fmt::format("rho must lie in [-1, 1], got {}", rho));
  }
  if (replications == 0) throw ValidationError("replications must be positive");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(true_psi(), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw ValidationError(
        fmt::format("Psi is not positive semidefinite at rho = {}", rho));
  }
}

Dataset design_dataset(const SimulationDesign& design) {
  design.validate();
  std::vector<AreaRecord> areas(design.m);
  for (std::size_t i = 0; i < design.m; ++i) {
    areas[i].area_id = std::to_string(i + 1);
    areas[i].y = VectorXd::Zero(design.k);
    areas[i].X = MatrixXd::Identity(design.k, design.k);
    areas[i].D = design.sampling_covariance(i);
  }
  return validate_dataset(std::move(areas));
}

namespace {

// Fixed per-design quantities needed to draw one replication.
struct Generator {
  const SimulationDesign& design;
  MatrixXd psi_root;                 // symmetric square root of Psi
  std::vector<MatrixXd> d_factors;   // Cholesky factors of D_i

  explicit Generator(const SimulationDesign& d) : design(d) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(d.true_psi());
    const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    psi_root = es.eigenvectors() * root.asDiagonal() *
               es.eigenvectors().transpose();
    d_factors.reserve(d.m);
    for (std::size_t i = 0; i < d.m; ++i) {
      d_factors.push_back(d.sampling_covariance(i).llt().matrixL());
    }
  }

  void draw(std::size_t r, std::vector<VectorXd>& theta,
            std::vector<VectorXd>& y) const {
    theta.resize(design.m);
    y.resize(design.m);
    for (std::size_t i = 0; i < design.m; ++i) {
      const VectorXd zv = standard_normal_draws(
          stream_key(design.seed, r, i, StreamRole::kRandomEffect), design.k);
      const VectorXd ze = standard_normal_draws(
          stream_key(design.seed, r, i, StreamRole::kSamplingError), design.k);
      theta[i] = psi_root * zv;
      y[i] = theta[i] + d_factors[i] * ze;
    }
  }
};

}  // namespace

Replication generate_replication(const SimulationDesign& design,
                                 std::size_t r) {
  const Dataset base = design_dataset(design);
  const Generator gen(design);
  std::vector<VectorXd> theta, y;
  gen.draw(r, theta, y);
  return {base.with_responses(y), std::move(theta)};
}

std::vector<MatrixXd> group_average(const SimulationDesign& design,
                                    const std::vector<MatrixXd>& per_area) {
  const std::size_t n = design.areas_per_group();
  std::vector<MatrixXd> out;
  out.reserve(kNumGroups);
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    MatrixXd sum = MatrixXd::Zero(design.k, design.k);
    for (std::size_t i = g * n; i < (g + 1) * n; ++i) sum += per_area.at(i);
    out.push_back(sum / static_cast<double>(n));
  }
  return out;
}

namespace {

// Sums over one block of replications.
struct BlockSums {
  std::vector<std::vector<MatrixXd>> loss;  // [predictor slot][area]
  std::vector<MatrixXd> estimate;           // [area]
  MatrixXd psi0, psi1;
  std::size_t truncated0 = 0, truncated1 = 0;

  BlockSums(std::size_t slots, std::size_t m, Eigen::Index k, bool with_est,
            bool with_psi)
      : loss(slots, std::vector<MatrixXd>(m, MatrixXd::Zero(k, k))) {
    if (with_est) estimate.assign(m, MatrixXd::Zero(k, k));
    if (with_psi) {
      psi0 = MatrixXd::Zero(k, k);
      psi1 = MatrixXd::Zero(k, k);
    }
  }

  void add(const BlockSums& o) {
    for (std::size_t p = 0; p < loss.size(); ++p) {
      for (std::size_t a = 0; a < loss[p].size(); ++a) loss[p][a] += o.loss[p][a];
    }
    for (std::size_t a = 0; a < estimate.size(); ++a) estimate[a] += o.estimate[a];
    if (psi0.size() > 0) {
      psi0 += o.psi0;
      psi1 += o.psi1;
    }
    truncated0 += o.truncated0;
    truncated1 += o.truncated1;
  }
};

// In-place pairwise reduction in index order; the tree shape depends only on
// the number of blocks.
BlockSums reduce_pairwise(std::vector<BlockSums>& blocks) {
  for (std::size_t stride = 1; stride < blocks.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < blocks.size(); i += 2 * stride) {
      blocks[i].add(blocks[i + stride]);
    }
  }
  return std::move(blocks.front());
}

MatrixXd outer_error(const VectorXd& pred, const VectorXd& truth) {
  const VectorXd e = pred - truth;
  return e * e.transpose();
}

}  // namespace

SimulationResult run_simulation(const SimulationDesign& design,
                                const SimulationOptions& options) {
  const Dataset base = design_dataset(design);
  if (options.block_size == 0) throw ValidationError("block_size must be positive");
  if (options.msem_estimator && *options.msem_estimator != PsiVariant::kPr0 &&
      *options.msem_estimator != PsiVariant::kPr1) {
    throw ValidationError("msem estimator variant must be pr0 or pr1");
  }

  const Generator gen(design);
  const MatrixXd psi_true = design.true_psi();
  const std::size_t m = design.m;
  const Eigen::Index k = design.k;
  const std::size_t reps = design.replications;
  const std::size_t n_blocks = (reps + options.block_size - 1) / options.block_size;
  const std::size_t slots = options.predictors.size();
  const bool with_est = options.msem_estimator.has_value();
  const bool with_psi = options.psi_statistics;

  std::vector<double> frob0(with_psi ? reps : 0), frob1(with_psi ? reps : 0);

  auto run_block = [&](std::size_t b) {
    BlockSums sums(slots, m, k, with_est, with_psi);
    std::vector<VectorXd> theta, y;
    const std::size_t begin = b * options.block_size;
    const std::size_t end = std::min(reps, begin + options.block_size);
    for (std::size_t r = begin; r < end; ++r) {
      gen.draw(r, theta, y);
      const Dataset data = base.with_responses(y);

      std::optional<EblupResult> pr0, pr1;
      auto get = [&](PsiVariant v) -> const EblupResult& {
        auto& slot = v == PsiVariant::kPr0 ? pr0 : pr1;
        if (!slot) slot = eblup_all(data, v);
        return *slot;
      };

      for (std::size_t p = 0; p < slots; ++p) {
        auto& loss = sums.loss[p];
        switch (options.predictors[p]) {
          case Predictor::kDirect:
            for (std::size_t a = 0; a < m; ++a) loss[a] += outer_error(y[a], theta[a]);
            break;
          case Predictor::kEblupPr0:
          case Predictor::kEblupPr1: {
            const auto v = options.predictors[p] == Predictor::kEblupPr0
                               ? PsiVariant::kPr0
                               : PsiVariant::kPr1;
            const auto& preds = get(v).predictions;
            for (std::size_t a = 0; a < m; ++a) {
              loss[a] += outer_error(preds[a].theta_hat, theta[a]);
            }
            break;
          }
          case Predictor::kUnivariate: {
            const auto preds = univariate_eblup_all(data);
            for (std::size_t a = 0; a < m; ++a) {
              loss[a] += outer_error(preds[a].theta_hat, theta[a]);
            }
            break;
          }
        }
      }

      if (with_est) {
        const PsiVariant v = *options.msem_estimator;
        const auto reports = msem_estimate_all(data, get(v).psi.projected, v);
        for (std::size_t a = 0; a < m; ++a) sums.estimate[a] += reports[a].estimate;
      }

      if (with_psi) {
        const auto& e0 = get(PsiVariant::kPr0).psi;
        const auto& e1 = get(PsiVariant::kPr1).psi;
        sums.psi0 += e0.raw;
        sums.psi1 += e1.raw;
        sums.truncated0 += e0.any_truncated() ? 1 : 0;
        sums.truncated1 += e1.any_truncated() ? 1 : 0;
        frob0[r] = (e0.raw - psi_true).norm();
        frob1[r] = (e1.raw - psi_true).norm();
      }
    }
    return sums;
  };

  unsigned workers = options.workers == 0 ? std::thread::hardware_concurrency()
                                          : options.workers;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_blocks)));

  std::vector<std::optional<BlockSums>> results(n_blocks);
  if (workers == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) results[b] = run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < n_blocks && !failed; b = next++) {
          try {
            results[b] = run_block(b);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  std::vector<BlockSums> blocks;
  blocks.reserve(n_blocks);
  for (auto& r : results) blocks.push_back(std::move(*r));
  const BlockSums total = reduce_pairwise(blocks);

  const double inv_r = 1.0 / static_cast<double>(reps);
  SimulationResult out;
  out.design = design;
  for (std::size_t p = 0; p < slots; ++p) {
    MsemTable table;
    table.per_area.reserve(m);
    for (const auto& s : total.loss[p]) table.per_area.push_back(s * inv_r);
    table.per_group = group_average(design, table.per_area);
    out.msem[options.predictors[p]] = std::move(table);
  }
  if (with_est) {
    MsemTable table;
    for (const auto& s : total.estimate) table.per_area.push_back(s * inv_r);
    table.per_group = group_average(design, table.per_area);
    out.mean_msem_estimate = std::move(table);
  }
  if (with_psi) {
    PsiStatistics st;
    st.mean_pr0 = total.psi0 * inv_r;
    st.mean_pr1 = total.psi1 * inv_r;
    st.truncation_rate_pr0 = static_cast<double>(total.truncated0) * inv_r;
    st.truncation_rate_pr1 = static_cast<double>(total.truncated1) * inv_r;
    st.frobenius_error_pr0 = std::move(frob0);
    st.frobenius_error_pr1 = std::move(frob1);
    out.psi = std::move(st);
  }
  return out;
}

MsemTable simulate_msem(const SimulationDesign& design, Predictor predictor,
                        unsigned workers) {
  SimulationOptions opt;
  opt.predictors = {predictor};
  opt.workers = workers;
  return std::move(run_simulation(design, opt).msem.at(predictor));
}

double prial_value(const MatrixXd& numerator, const MatrixXd& denominator) {
  return 100.0 * (1.0 - numerator.trace() / denominator.trace());
}

PrialReport prial_from(const SimulationResult& result, Predictor eblup) {
  const auto& e = result.msem.at(eblup).per_group;
  const auto& d = result.msem.at(Predictor::kDirect).per_group;
  const auto& u = result.msem.at(Predictor::kUnivariate).per_group;
  PrialReport rep;
  rep.eblup = eblup;
  for (std::size_t g = 0; g < e.size(); ++g) {
    rep.vs_direct.push_back(prial_value(e[g], d[g]));
    rep.vs_univariate.push_back(prial_value(e[g], u[g]));
  }
  rep.eblup_msem = e;
  rep.direct_msem = d;
  rep.univariate_msem = u;
  return rep;
}

PrialReport prial(const SimulationDesign& design, PsiVariant variant,
                  unsigned workers) {
  Predictor eblup;
  if (variant == PsiVariant::kPr0) {
    eblup = Predictor::kEblupPr0;
  } else if (variant == PsiVariant::kPr1) {
    eblup = Predictor::kEblupPr1;
  } else {
    throw ValidationError("prial: variant must be pr0 or pr1");
  }
  SimulationOptions opt;
  opt.predictors = {Predictor::kDirect, eblup, Predictor::kUnivariate};
  opt.workers = workers;
  return prial_from(run_simulation(design, opt), eblup);
}

RelativeBiasReport relative_bias(const SimulationDesign& design,
                                 const std::vector<MatrixXd>& mean_estimate,
                                 const std::vector<MatrixXd>& true_msem) {
  if (mean_estimate.size() != design.m || true_msem.size() != design.m) {
    throw DimensionMismatch("relative_bias: expected one matrix per area");
  }
  const Eigen::Index k = design.k;
  const std::size_t n = design.areas_per_group();
  RelativeBiasReport rep;
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    MatrixXd sum = MatrixXd::Zero(k, k);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ok =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, k, true);
    for (std::size_t a = g * n; a < (g + 1) * n; ++a) {
      const MatrixXd& t = true_msem[a];
      ok = ok && (t.array().abs() >= RelativeBiasReport::kNearZero);
      sum.array() += 100.0 * (mean_estimate[a] - t).array() / t.array();
    }
    MatrixXd mean = sum / static_cast<double>(n);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (!ok(i, j)) mean(i, j) = std::nan("");
      }
    }
    rep.per_group.push_back(std::move(mean));
    rep.applicable.push_back(std::move(ok));
  }
  return rep;
}

RelativeBiasReport msem_estimator_bias(const SimulationDesign& design,
                                       PsiVariant variant, unsigned workers) {
  const Predictor eblup =
      variant == PsiVariant::kPr1 ? Predictor::kEblupPr1 : Predictor::kEblupPr0;
  SimulationOptions opt;
  opt.predictors = {eblup};
  opt.msem_estimator = variant;
  opt.workers = workers;
  const SimulationResult res = run_simulation(design, opt);
  return relative_bias(design, res.mean_msem_estimate->per_area,
                       res.msem.at(eblup).per_area);
}

MsemTable second_order_table(const SimulationDesign& design) {
  const Dataset data = design_dataset(design);
  const MsemTerms terms(design.true_psi(), data);
  MsemTable table;
  table.per_area.reserve(design.m);
  for (std::size_t a = 0; a < design.m; ++a) {
    table.per_area.push_back(terms.g1(a) + terms.g2(a) + terms.g3(a));
  }
  table.per_group = group_average(design, table.per_area);
  return table;
}

}  // namespace mfh
