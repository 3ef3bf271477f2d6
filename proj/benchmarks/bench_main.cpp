#include <benchmark/benchmark.h>

#include "nvmag/estimators.hpp"
#include "nvmag/inversion.hpp"
#include "nvmag/scan.hpp"
#include "nvmag/signal_synth.hpp"
#include "nvmag/spin_model.hpp"

using namespace nvmag;

namespace {

const FieldVector kField{2.426, 0.0, 3.129};

void BM_ExactTransitions(benchmark::State& st) {
  const NVParameters p;
  for (auto _ : st) benchmark::DoNotOptimize(exact_transitions(kField, p));
}
BENCHMARK(BM_ExactTransitions);

void BM_PerturbativeShifts(benchmark::State& st) {
  const NVParameters p;
  for (auto _ : st) benchmark::DoNotOptimize(zeeman_shifts_perturbative(3.129, 2.426, p));
}
BENCHMARK(BM_PerturbativeShifts);

void BM_Invert(benchmark::State& st) {
  const NVParameters p;
  for (auto _ : st) benchmark::DoNotOptimize(invert_axial_transverse(-85.26, 0.1632, p));
}
BENCHMARK(BM_Invert);

void BM_FitOdmr(benchmark::State& st) {
  const auto rec = synth_odmr(kField, NVParameters{}, Sweep{2780.0, 2792.0, 601});
  for (auto _ : st) benchmark::DoNotOptimize(fit_odmr_doublet(rec));
}
BENCHMARK(BM_FitOdmr)->Unit(benchmark::kMillisecond);

void BM_FitPrecession(benchmark::State& st) {
  const auto rec = synth_precession(PrecessionModel{}, linspace(0.0, 312.0, 625));
  for (auto _ : st) benchmark::DoNotOptimize(fit_precession(rec));
}
BENCHMARK(BM_FitPrecession)->Unit(benchmark::kMillisecond);

void BM_ScanPoint(benchmark::State& st) {
  ScanConfig c;
  c.noise.enabled = st.range(0) != 0;
  for (auto _ : st) benchmark::DoNotOptimize(evaluate_point(c, 7, 11));
}
BENCHMARK(BM_ScanPoint)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
