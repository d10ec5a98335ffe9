#include <benchmark/benchmark.h>

#include "mfh/gls.hpp"
#include "mfh/msem.hpp"
#include "mfh/simulation.hpp"

namespace {

mfh::SimulationDesign design_for(std::int64_t m) {
  mfh::SimulationDesign d;
  d.m = static_cast<std::size_t>(m);
  d.replications = 1;
  return d;
}

void BM_GlsBeta(benchmark::State& state) {
  const auto design = design_for(state.range(0));
  const auto rep = mfh::generate_replication(design, 0);
  const mfh::MatrixXd psi = design.true_psi();
  for (auto _ : state) benchmark::DoNotOptimize(mfh::gls_beta(psi, rep.data));
}
BENCHMARK(BM_GlsBeta)->Arg(30)->Arg(120)->Arg(1000);

void BM_EblupPr1(benchmark::State& state) {
  const auto rep = mfh::generate_replication(design_for(state.range(0)), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfh::eblup_all(rep.data, mfh::PsiVariant::kPr1));
  }
}
BENCHMARK(BM_EblupPr1)->Arg(30)->Arg(120);

void BM_MsemEstimateAll(benchmark::State& state) {
  const auto rep = mfh::generate_replication(design_for(state.range(0)), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfh::msem_estimate_all(rep.data, mfh::PsiVariant::kPr0));
  }
}
BENCHMARK(BM_MsemEstimateAll)->Arg(30)->Arg(120);

void BM_SimulationBlock(benchmark::State& state) {
  auto design = design_for(30);
  design.replications = 256;
  mfh::SimulationOptions opt;
  opt.msem_estimator = mfh::PsiVariant::kPr0;
  for (auto _ : state) benchmark::DoNotOptimize(mfh::run_simulation(design, opt));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_SimulationBlock)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
