#include "mfh/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "mfh/covariance.hpp"
#include "mfh/errors.hpp"
#include "mfh/gls.hpp"
#include "mfh/io.hpp"
#include "mfh/msem.hpp"

namespace mfh {

namespace {

using nlohmann::json;

// Numbers are emitted at 12 significant digits in both formats.
std::string num(double x) { return fmt::format("{:.12g}", x); }

json jnum(double x) {
  if (!std::isfinite(x)) return nullptr;
  return std::strtod(num(x).c_str(), nullptr);
}

json jmatrix(const MatrixXd& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(jnum(a(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json jvector(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(jnum(v(i)));
  return out;
}

// Raw and table-unit (x100) copies of a matrix.
json jscaled(const MatrixXd& a) {
  return json{{"value", jmatrix(a)}, {"value_x100", jmatrix(100.0 * a)}};
}

void emit(const RunConfig& config, std::ostream& fallback,
          const std::function<void(std::ostream&)>& body) {
  if (config.out_path.empty()) {
    body(fallback);
    return;
  }
  std::ofstream f(config.out_path, std::ios::binary);
  if (!f) throw ValidationError("cannot open output file '" + config.out_path + "'");
  body(f);
  if (!f) throw ValidationError("failed writing '" + config.out_path + "'");
}

MatrixXd correlation(const MatrixXd& psi) {
  const Eigen::Index k = psi.rows();
  MatrixXd r = MatrixXd::Identity(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double den = std::sqrt(psi(i, i) * psi(j, j));
      r(i, j) = den > 0.0 ? psi(i, j) / den : 0.0;
    }
  }
  return r;
}

json jmeta(const std::string& command, const RunConfig& c) {
  return json{{"command", command},
              {"psi_variant", to_string(c.psi)},
              {"areas", c.areas_path},
              {"covariance", c.covariance_path}};
}

std::string pname(Predictor p) { return to_string(p); }

}  // namespace

void RunConfig::validate(const std::string& command) const {
  if (command == "fit" || command == "predict") {
    if (areas_path.empty()) throw ValidationError("--areas is required");
    if (covariance_path.empty()) throw ValidationError("--cov is required");
  }
  if (psi != PsiVariant::kPr0 && psi != PsiVariant::kPr1) {
    throw ValidationError("--psi must be pr0 or pr1");
  }
  if (command == "simulate") {
    if (k <= 0 || m == 0 || replications == 0) {
      throw ValidationError("--k, --m and --reps must be positive");
    }
    SimulationDesign{k, m, rho, pattern, replications, seed}.validate();
  }
}

void cmd_fit(const RunConfig& config, std::ostream& out) {
  config.validate("fit");
  const Dataset data = load_dataset(config.areas_path, config.covariance_path);
  const MatrixXd pr0 = psi_pr0(data);
  const MatrixXd pr1 = psi_pr1(data);
  const CovarianceEstimate est = estimate_psi(data, config.psi);
  const GlsFit fit = gls_beta(est.projected, data);
  const auto tests = beta_inference(fit);
  const MatrixXd corr = correlation(est.projected);

  emit(config, out, [&](std::ostream& os) {
    if (config.format == OutputFormat::kJson) {
      json j;
      j["meta"] = jmeta("fit", config);
      j["meta"]["m"] = data.m();
      j["meta"]["k"] = data.k();
      j["meta"]["s"] = data.s();
      j["meta"]["psi_truncated"] = est.any_truncated();
      json beta = json::array();
      for (std::size_t i = 0; i < tests.size(); ++i) {
        beta.push_back({{"index", i + 1},
                        {"estimate", jnum(tests[i].estimate)},
                        {"std_error", jnum(tests[i].std_error)},
                        {"z", jnum(tests[i].z)},
                        {"p_value", jnum(tests[i].p_value)}});
      }
      j["beta"] = beta;
      j["psi"] = {{"pr0", jmatrix(pr0)},
                  {"pr1", jmatrix(pr1)},
                  {"projected", jmatrix(est.projected)}};
      j["correlation"] = jmatrix(corr);
      j["per_area"] = json::array();
      for (const auto& a : data.areas()) {
        j["per_area"].push_back(
            {{"area_id", a.area_id}, {"fitted", jvector(a.X * fit.beta_hat)}});
      }
      j["per_group"] = json::array();
      os << j.dump(2) << '\n';
      return;
    }
    os << "quantity,row,col,value\n";
    for (std::size_t i = 0; i < tests.size(); ++i) {
      os << fmt::format("beta,{},,{}\n", i + 1, num(tests[i].estimate));
      os << fmt::format("beta_se,{},,{}\n", i + 1, num(tests[i].std_error));
      os << fmt::format("beta_z,{},,{}\n", i + 1, num(tests[i].z));
      os << fmt::format("beta_p,{},,{}\n", i + 1, num(tests[i].p_value));
    }
    auto matrix = [&](const char* name, const MatrixXd& a) {
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          os << fmt::format("{},{},{},{}\n", name, r + 1, c + 1, num(a(r, c)));
        }
      }
    };
    matrix("psi_pr0", pr0);
    matrix("psi_pr1", pr1);
    matrix("psi_projected", est.projected);
    matrix("correlation", corr);
  });
}

void cmd_predict(const RunConfig& config, std::ostream& out) {
  config.validate("predict");
  const Dataset data = load_dataset(config.areas_path, config.covariance_path);
  std::map<std::string, std::string> groups;
  if (!config.groups_path.empty()) groups = load_groups(config.groups_path, data);

  const EblupResult eb = eblup_all(data, config.psi);
  const auto reports = msem_estimate_all(data, eb.psi.projected, config.psi);
  const auto uni = univariate_eblup_all(data);
  const auto uni_msem = univariate_msem_estimate_all(data);
  const Eigen::Index k = data.k();
  const std::size_t m = data.m();

  std::vector<VectorXd> shrink_pct(m);
  std::vector<double> prial_direct(m), prial_uni(m);
  for (std::size_t a = 0; a < m; ++a) {
    const auto& p = eb.predictions[a];
    shrink_pct[a] =
        100.0 * (p.direct - p.theta_hat).array() / p.direct.array();
    prial_direct[a] = prial_value(reports[a].estimate, data.area(a).D);
    prial_uni[a] = prial_value(reports[a].estimate, uni_msem[a]);
  }

  struct GroupSummary {
    std::string name;
    std::size_t n = 0;
    MatrixXd msem, direct, univariate;
  };
  std::vector<GroupSummary> summary;
  if (!groups.empty()) {
    std::map<std::string, std::size_t> slot;
    for (std::size_t a = 0; a < m; ++a) {
      const std::string& g = groups.at(data.area(a).area_id);
      auto [it, fresh] = slot.emplace(g, summary.size());
      if (fresh) {
        summary.push_back({g, 0, MatrixXd::Zero(k, k), MatrixXd::Zero(k, k),
                           MatrixXd::Zero(k, k)});
      }
      auto& s = summary[it->second];
      ++s.n;
      s.msem += reports[a].estimate;
      s.direct += data.area(a).D;
      s.univariate += uni_msem[a];
    }
    for (auto& s : summary) {
      const double n = static_cast<double>(s.n);
      s.msem /= n;
      s.direct /= n;
      s.univariate /= n;
    }
  }

  emit(config, out, [&](std::ostream& os) {
    if (config.format == OutputFormat::kJson) {
      json j;
      j["meta"] = jmeta("predict", config);
      j["meta"]["m"] = m;
      j["meta"]["k"] = k;
      j["meta"]["psi"] = jmatrix(eb.psi.projected);
      j["meta"]["psi_truncated"] = eb.psi.any_truncated();
      j["per_area"] = json::array();
      for (std::size_t a = 0; a < m; ++a) {
        const auto& p = eb.predictions[a];
        json row = {{"area_id", p.area_id},
                    {"direct", jvector(p.direct)},
                    {"eblup", jvector(p.theta_hat)},
                    {"shrinkage_pct", jvector(shrink_pct[a])},
                    {"msem", jmatrix(reports[a].estimate)},
                    {"msem_psd", reports[a].estimate_psd},
                    {"univariate_eblup", jvector(uni[a].theta_hat)},
                    {"univariate_msem", jvector(uni_msem[a].diagonal())},
                    {"prial_vs_direct", jnum(prial_direct[a])},
                    {"prial_vs_univariate", jnum(prial_uni[a])}};
        if (!groups.empty()) row["group"] = groups.at(p.area_id);
        j["per_area"].push_back(std::move(row));
      }
      j["per_group"] = json::array();
      for (const auto& s : summary) {
        j["per_group"].push_back(
            {{"group", s.name},
             {"n_areas", s.n},
             {"msem", jmatrix(s.msem)},
             {"direct_msem", jmatrix(s.direct)},
             {"univariate_msem", jmatrix(s.univariate)},
             {"prial_vs_direct", jnum(prial_value(s.msem, s.direct))},
             {"prial_vs_univariate", jnum(prial_value(s.msem, s.univariate))}});
      }
      os << j.dump(2) << '\n';
      return;
    }

    os << "area_id";
    for (Eigen::Index j = 1; j <= k; ++j) os << fmt::format(",direct_{}", j);
    for (Eigen::Index j = 1; j <= k; ++j) os << fmt::format(",eblup_{}", j);
    for (Eigen::Index j = 1; j <= k; ++j) os << fmt::format(",shrinkage_pct_{}", j);
    for (Eigen::Index r = 1; r <= k; ++r) {
      for (Eigen::Index c = 1; c <= k; ++c) os << fmt::format(",msem_{}_{}", r, c);
    }
    os << ",msem_psd";
    for (Eigen::Index j = 1; j <= k; ++j) os << fmt::format(",univariate_eblup_{}", j);
    for (Eigen::Index j = 1; j <= k; ++j) os << fmt::format(",univariate_msem_{}", j);
    os << ",prial_vs_direct,prial_vs_univariate\n";
    for (std::size_t a = 0; a < m; ++a) {
      const auto& p = eb.predictions[a];
      os << p.area_id;
      for (Eigen::Index j = 0; j < k; ++j) os << ',' << num(p.direct(j));
      for (Eigen::Index j = 0; j < k; ++j) os << ',' << num(p.theta_hat(j));
      for (Eigen::Index j = 0; j < k; ++j) os << ',' << num(shrink_pct[a](j));
      for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) os << ',' << num(reports[a].estimate(r, c));
      }
      os << ',' << (reports[a].estimate_psd ? "true" : "false");
      for (Eigen::Index j = 0; j < k; ++j) os << ',' << num(uni[a].theta_hat(j));
      for (Eigen::Index j = 0; j < k; ++j) os << ',' << num(uni_msem[a](j, j));
      os << ',' << num(prial_direct[a]) << ',' << num(prial_uni[a]) << '\n';
    }
  });

  if (summary.empty() || config.format == OutputFormat::kJson) return;
  RunConfig group_config = config;
  if (!config.out_path.empty()) group_config.out_path = config.out_path + ".groups.csv";
  emit(group_config, out, [&](std::ostream& os) {
    if (config.out_path.empty()) os << '\n';
    os << "group,n_areas";
    for (Eigen::Index r = 1; r <= k; ++r) {
      for (Eigen::Index c = 1; c <= k; ++c) os << fmt::format(",msem_{}_{}", r, c);
    }
    os << ",prial_vs_direct,prial_vs_univariate\n";
    for (const auto& s : summary) {
      os << s.name << ',' << s.n;
      for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) os << ',' << num(s.msem(r, c));
      }
      os << ',' << num(prial_value(s.msem, s.direct)) << ','
         << num(prial_value(s.msem, s.univariate)) << '\n';
    }
  });
}

void cmd_simulate(const RunConfig& config, std::ostream& out) {
  config.validate("simulate");
  const SimulationDesign design{config.k,       config.m,
                                config.rho,     config.pattern,
                                config.replications, config.seed};
  SimulationOptions opt;
  opt.msem_estimator = config.psi;
  opt.psi_statistics = true;
  opt.workers = config.workers;
  const SimulationResult res = run_simulation(design, opt);
  const MsemTable approx = second_order_table(design);
  const Predictor eblup =
      config.psi == PsiVariant::kPr1 ? Predictor::kEblupPr1 : Predictor::kEblupPr0;
  const RelativeBiasReport bias = relative_bias(
      design, res.mean_msem_estimate->per_area, res.msem.at(eblup).per_area);
  const PrialReport prial0 = prial_from(res, Predictor::kEblupPr0);
  const PrialReport prial1 = prial_from(res, Predictor::kEblupPr1);
  const Eigen::Index k = design.k;

  emit(config, out, [&](std::ostream& os) {
    if (config.format == OutputFormat::kJson) {
      json j;
      j["meta"] = {{"command", "simulate"},
                   {"k", design.k},
                   {"m", design.m},
                   {"rho", design.rho},
                   {"pattern", to_string(design.pattern)},
                   {"replications", design.replications},
                   {"seed", design.seed},
                   {"msem_estimator", to_string(config.psi)},
                   {"true_psi", jmatrix(design.true_psi())},
                   {"psi_mean_pr0", jmatrix(res.psi->mean_pr0)},
                   {"psi_mean_pr1", jmatrix(res.psi->mean_pr1)},
                   {"truncation_rate_pr0", jnum(res.psi->truncation_rate_pr0)},
                   {"truncation_rate_pr1", jnum(res.psi->truncation_rate_pr1)}};
      j["per_area"] = json::array();
      for (std::size_t a = 0; a < design.m; ++a) {
        json msem;
        for (const auto& [p, table] : res.msem) msem[pname(p)] = jscaled(table.per_area[a]);
        j["per_area"].push_back(
            {{"area_id", std::to_string(a + 1)},
             {"group", design.group_of(a) + 1},
             {"msem", msem},
             {"second_order", jscaled(approx.per_area[a])},
             {"msem_estimate_mean", jscaled(res.mean_msem_estimate->per_area[a])}});
      }
      j["per_group"] = json::array();
      for (std::size_t g = 0; g < kNumGroups; ++g) {
        json msem;
        for (const auto& [p, table] : res.msem) msem[pname(p)] = jscaled(table.per_group[g]);
        j["per_group"].push_back(
            {{"group", g + 1},
             {"msem", msem},
             {"second_order", jscaled(approx.per_group[g])},
             {"msem_estimate_mean", jscaled(res.mean_msem_estimate->per_group[g])},
             {"relative_bias_pct", jmatrix(bias.per_group[g])},
             {"prial_vs_direct",
              {{"eblup_pr0", jnum(prial0.vs_direct[g])},
               {"eblup_pr1", jnum(prial1.vs_direct[g])}}},
             {"prial_vs_univariate",
              {{"eblup_pr0", jnum(prial0.vs_univariate[g])},
               {"eblup_pr1", jnum(prial1.vs_univariate[g])}}}});
      }
      os << j.dump(2) << '\n';
      return;
    }

    os << "table,predictor,group,row,col,value_x100,value\n";
    auto matrix = [&](const std::string& table, const std::string& pred,
                      const std::string& group, const MatrixXd& a, double scale) {
      for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
          os << fmt::format("{},{},{},{},{},{},{}\n", table, pred, group, r + 1,
                            c + 1, num(scale * a(r, c)),
                            num(scale * a(r, c) / 100.0));
        }
      }
    };
    auto scalar = [&](const std::string& table, const std::string& pred,
                      const std::string& group, double pct) {
      os << fmt::format("{},{},{},,,{},{}\n", table, pred, group, num(pct),
                        num(pct / 100.0));
    };
    for (std::size_t g = 0; g < kNumGroups; ++g) {
      const std::string gname = fmt::format("G{}", g + 1);
      for (const auto& [p, table] : res.msem) {
        matrix("msem", pname(p), gname, table.per_group[g], 100.0);
      }
      matrix("second_order", "eblup_known_psi", gname, approx.per_group[g], 100.0);
      matrix("msem_estimate_mean", pname(eblup), gname,
             res.mean_msem_estimate->per_group[g], 100.0);
      matrix("relative_bias_pct", pname(eblup), gname, bias.per_group[g], 1.0);
      scalar("prial_vs_direct", "eblup_pr0", gname, prial0.vs_direct[g]);
      scalar("prial_vs_direct", "eblup_pr1", gname, prial1.vs_direct[g]);
      scalar("prial_vs_univariate", "eblup_pr0", gname, prial0.vs_univariate[g]);
      scalar("prial_vs_univariate", "eblup_pr1", gname, prial1.vs_univariate[g]);
    }
    matrix("psi_mean", "pr0", "all", res.psi->mean_pr0, 100.0);
    matrix("psi_mean", "pr1", "all", res.psi->mean_pr1, 100.0);
    scalar("truncation_rate_pct", "pr0", "all", 100.0 * res.psi->truncation_rate_pr0);
    scalar("truncation_rate_pct", "pr1", "all", 100.0 * res.psi->truncation_rate_pr1);
  });
}

int run_command(const std::string& command, const RunConfig& config,
                std::ostream& out, std::ostream& err) {
  try {
    if (command == "fit") {
      cmd_fit(config, out);
    } else if (command == "predict") {
      cmd_predict(config, out);
    } else if (command == "simulate") {
      cmd_simulate(config, out);
    } else {
      throw ValidationError("unknown command '" + command + "'");
    }
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace mfh
