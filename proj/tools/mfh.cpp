// mfh: fit, predict and simulate multivariate Fay-Herriot models.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "mfh/commands.hpp"

namespace {

void add_data_options(CLI::App* cmd, mfh::RunConfig& cfg) {
  cmd->add_option("--areas", cfg.areas_path, "Area CSV: area_id,y_1..y_k,x_1_1..x_k_s")
      ->required();
  cmd->add_option("--cov", cfg.covariance_path, "Covariance CSV: area_id,d_1_1..d_k_k")
      ->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate Fay-Herriot small area estimation"};
  app.require_subcommand(1);

  mfh::RunConfig cfg;
  const std::map<std::string, mfh::PsiVariant> psi_map{
      {"pr0", mfh::PsiVariant::kPr0}, {"pr1", mfh::PsiVariant::kPr1}};
  const std::map<std::string, mfh::OutputFormat> format_map{
      {"csv", mfh::OutputFormat::kCsv}, {"json", mfh::OutputFormat::kJson}};
  const std::map<std::string, mfh::DPattern> pattern_map{
      {"a", mfh::DPattern::kA}, {"b", mfh::DPattern::kB}};

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--psi", cfg.psi, "Psi estimator")
        ->transform(CLI::CheckedTransformer(psi_map, CLI::ignore_case))
        ->default_str("pr0");
    cmd->add_option("--out", cfg.out_path, "Output file (default: stdout)");
    cmd->add_option("--format", cfg.format, "Output format")
        ->transform(CLI::CheckedTransformer(format_map, CLI::ignore_case))
        ->default_str("csv");
  };

  auto* fit = app.add_subcommand("fit", "GLS coefficients and Psi estimates");
  add_data_options(fit, cfg);
  common(fit);

  auto* predict = app.add_subcommand("predict", "Per-area EBLUP and MSEM estimates");
  add_data_options(predict, cfg);
  common(predict);
  predict->add_option("--groups", cfg.groups_path,
                      "CSV area_id,group for group-averaged summaries");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on the X = I design");
  common(simulate);
  simulate->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  simulate->add_option("--k", cfg.k, "Dimension (2 or 3)")->capture_default_str();
  simulate->add_option("--m", cfg.m, "Number of areas (multiple of 5)")
      ->capture_default_str();
  simulate->add_option("--rho", cfg.rho, "Random-effect correlation")
      ->capture_default_str();
  simulate->add_option("--pattern", cfg.pattern, "Sampling variance pattern")
      ->transform(CLI::CheckedTransformer(pattern_map, CLI::ignore_case))
      ->default_str("a");
  simulate->add_option("--reps", cfg.replications, "Replications")
      ->capture_default_str();
  simulate->add_option("--workers", cfg.workers, "Threads (0 = all cores)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mfh::kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return mfh::run_command(command, cfg, std::cout, std::cerr);
}
