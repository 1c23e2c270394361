// Serial-reference vs OpenMP comparison for the data-parallel kernels: the
// dense-grid window minimization, the coverage wave, and batched ball
// sampling. The serial path is the reference implementation the tests pin
// the parallel path against; this target measures what the threads buy.

#include <benchmark/benchmark.h>

#include "models.hpp"
#include "safehood/cover.hpp"

using namespace safehood;

namespace {

struct Fixture {
  HybridAutomaton H = testmodels::sec25();
  Metrics metrics = build_metrics(H);
  HybridTrajectory traj;
  PreparedComponent guard;

  Fixture() {
    H.config.t_end = 0.5;
    traj = simulate(H, 2, H.initial.point, 0.0, 0.5, H.config);
    AvoidedComponent c;
    c.kind = AvoidedComponent::Kind::Guard;
    c.id = 1;
    c.set = H.events[1].guard;
    guard = prepare_component(c, metrics.at(2).M);
  }
};

Fixture& fix() {
  static Fixture f;
  return f;
}

void bm_window_min(benchmark::State& state, Exec exec) {
  auto& f = fix();
  const auto& seg = f.traj.segments[0];
  MinimizeOpts opts{seg.t0, 1e-5, 1e-9, exec};  // 20k+ grid points
  for (auto _ : state) {
    auto r = min_dist_over_window(seg.evaluator(), TimeWindows(seg.t0, seg.t_end),
                                  f.guard, f.metrics.at(2).M, opts);
    benchmark::DoNotOptimize(r.value);
  }
}

void bm_coverage_wave(benchmark::State& state, Exec exec) {
  auto& f = fix();
  auto H = f.H;
  H.initial.is_box = true;
  H.initial.lo = Vec(2);
  H.initial.hi = Vec(2);
  H.initial.lo << 1.26, 1.80;
  H.initial.hi << 1.30, 1.90;
  VerificationConfig cfg = resolve_config(H, f.metrics);
  cfg.coverage_max_depth = 4;
  cfg.parallel = exec == Exec::Parallel;
  for (auto _ : state) {
    CoverageReport rep = cover_initial_set(H, f.metrics, cfg, VerifyMode::Robust);
    benchmark::DoNotOptimize(rep.covered_fraction);
  }
}

void bm_sample_batch(benchmark::State& state, Exec exec) {
  auto& f = fix();
  VerificationConfig cfg = f.H.config;
  cfg.parallel = exec == Exec::Parallel;
  RobustResult rr = robust_neighborhood(f.H, f.traj, f.metrics, cfg);
  for (auto _ : state) {
    auto stats = check_robust_samples(f.H, f.metrics, cfg, f.traj,
                                      rr.neighborhoods[0], 256, 11);
    benchmark::DoNotOptimize(stats.seq_ok);
  }
}

}  // namespace

BENCHMARK_CAPTURE(bm_window_min, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_window_min, openmp, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_coverage_wave, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_coverage_wave, openmp, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_sample_batch, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_sample_batch, openmp, Exec::Parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
