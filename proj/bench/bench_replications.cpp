// Replication kernels: plain serial reference, optimized serial, optimized parallel.

#include <benchmark/benchmark.h>

#include "supgauss/reference.hpp"
#include "supgauss/scenarios.hpp"

using namespace supgauss;

namespace {

const KernelClass& kernel_class() {
  static const KernelClass kc = [] {
    KernelScenario s;
    s.x_law = iid_law(std::make_shared<BetaLaw>(2.0, 2.0), 1);
    return build_kernel_class(s, 2000);
  }();
  return kc;
}

constexpr std::size_t kN = 2000, kR = 64, kRGauss = 5000;

void BM_empirical_reference(benchmark::State& st) {
  const auto& kc = kernel_class();
  const std::vector<double> means(kc.cls.size(), 0.0);
  for (auto _ : st)
    benchmark::DoNotOptimize(reference::empirical_sup_sample(kc.cls, kc.sampler, kN, kR, RngPolicy(1), means));
}

void BM_empirical(benchmark::State& st) {
  const auto& kc = kernel_class();
  EmpiricalOptions opt;
  opt.exec = st.range(0) ? Execution::parallel() : Execution::serial();
  for (auto _ : st) benchmark::DoNotOptimize(empirical_sup_sample(kc.cls, kc.sampler, kN, kR, RngPolicy(1), opt));
}

void BM_gaussian_reference(benchmark::State& st) {
  const auto& kc = kernel_class();
  for (auto _ : st) benchmark::DoNotOptimize(reference::gaussian_sup_sample(kc.cov, kRGauss, RngPolicy(2)));
}

void BM_gaussian(benchmark::State& st) {
  const auto& kc = kernel_class();
  GaussianOptions opt;
  opt.exec = st.range(0) ? Execution::parallel() : Execution::serial();
  for (auto _ : st) benchmark::DoNotOptimize(gaussian_sup_sample(kc.cov, kRGauss, RngPolicy(2), opt));
}

}  // namespace

BENCHMARK(BM_empirical_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_empirical)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
