#pragma once

// Report-producing entry points behind the `mfh` command-line tool.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "mfh/model.hpp"
#include "mfh/simulation.hpp"

namespace mfh {

enum class OutputFormat { kCsv, kJson };

struct RunConfig {
  std::string areas_path;
  std::string covariance_path;
  std::string groups_path;  // optional, predict only
  std::string out_path;     // empty writes to the given stream
  PsiVariant psi = PsiVariant::kPr0;
  OutputFormat format = OutputFormat::kCsv;

  // simulate
  std::uint64_t seed = 20190605;
  int k = 2;
  std::size_t m = 30;
  double rho = 0.5;
  DPattern pattern = DPattern::kA;
  std::size_t replications = 10'000;
  unsigned workers = 1;

  /// Throws ValidationError when a field is out of range for `command`.
  void validate(const std::string& command) const;
};

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

/// beta-hat with Wald tests, Psi estimates and the implied correlation.
void cmd_fit(const RunConfig& config, std::ostream& out);
/// Per-area EBLUP, shrinkage and MSEM estimates; group summaries when
/// `groups_path` is set.
void cmd_predict(const RunConfig& config, std::ostream& out);
/// Simulated MSEM, second-order approximation, PRIAL and relative-bias
/// tables for one design.
void cmd_simulate(const RunConfig& config, std::ostream& out);

/// Runs `command` ("fit", "predict" or "simulate"), reporting errors on
/// `err` and mapping them to exit codes.
int run_command(const std::string& command, const RunConfig& config,
                std::ostream& out, std::ostream& err);

}  // namespace mfh
