#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "models.hpp"
#include "safehood/cover.hpp"

using namespace safehood;

// The OpenMP kernels must reproduce the serial reference bit for bit: min
// reductions and independent-slot maps are exact regardless of scheduling.

TEST_CASE("grid_argmin: parallel equals serial, ties to the lowest index") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> data(100000);
  for (auto& d : data) d = unif(rng);
  data[70000] = -1.0;
  data[90000] = -1.0;  // duplicate minimum: index 70000 must win
  auto f = [&](long i) { return data[i]; };
  auto s = grid_argmin(static_cast<long>(data.size()), f, Exec::Serial);
  auto p = grid_argmin(static_cast<long>(data.size()), f, Exec::Parallel);
  CHECK(s.first == p.first);
  CHECK(s.second == p.second);
  CHECK(s.second == 70000);
}

TEST_CASE("parallel_map fills disjoint slots identically") {
  std::vector<double> a(5000), b(5000);
  auto f = [](long i) { return std::sin(0.001 * static_cast<double>(i)); };
  parallel_map(a, f, Exec::Serial);
  parallel_map(b, f, Exec::Parallel);
  CHECK(a == b);
}

TEST_CASE("robust pipeline: serial and parallel radii are bit-identical") {
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  Vec x0 = H.initial.point;
  H.config.parallel = false;
  HybridTrajectory t1 = simulate(H, 2, x0, 0.0, 0.5, H.config);
  RobustResult serial = robust_neighborhood(H, t1, m, H.config);
  H.config.parallel = true;
  HybridTrajectory t2 = simulate(H, 2, x0, 0.0, 0.5, H.config);
  RobustResult parallel = robust_neighborhood(H, t2, m, H.config);
  REQUIRE(serial.neighborhoods.size() == parallel.neighborhoods.size());
  for (size_t i = 0; i < serial.neighborhoods.size(); ++i)
    CHECK(serial.neighborhoods[i].radius == parallel.neighborhoods[i].radius);
}

TEST_CASE("safe pipeline: serial and parallel radii are bit-identical") {
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  Vec x0 = H.initial.point;
  H.config.parallel = false;
  SafeResult s = safe_neighborhood(H, m, H.config, 2, x0, 0.0, 0.5);
  H.config.parallel = true;
  SafeResult p = safe_neighborhood(H, m, H.config, 2, x0, 0.0, 0.5);
  REQUIRE(s.radii_chain_safe.size() == p.radii_chain_safe.size());
  for (size_t i = 0; i < s.radii_chain_safe.size(); ++i) {
    CHECK(s.radii_chain_safe[i] == p.radii_chain_safe[i]);
    CHECK(s.radii_chain_robust[i] == p.radii_chain_robust[i]);
  }
}

TEST_CASE("coverage reports: serial and parallel are byte-identical") {
  auto H = testmodels::sec25();
  H.initial.is_box = true;
  H.initial.lo = H.initial.point;
  H.initial.hi = H.initial.point + Vec::Constant(2, 0.04);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  cfg.coverage_max_depth = 3;
  cfg.parallel = false;
  CoverageReport s = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  cfg.parallel = true;
  CoverageReport p = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  CHECK(report_to_json(H, s) == report_to_json(H, p));
}

TEST_CASE("sampled checks are scheduling-independent") {
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  HybridTrajectory traj =
      simulate(H, 2, H.initial.point, 0.0, 0.5, H.config);
  RobustResult rr = robust_neighborhood(H, traj, m, H.config);
  auto cfg_serial = H.config;
  cfg_serial.parallel = false;
  auto a = check_robust_samples(H, m, cfg_serial, traj, rr.neighborhoods[0], 64,
                                7);
  auto b = check_robust_samples(H, m, H.config, traj, rr.neighborhoods[0], 64,
                                7);
  CHECK(a.seq_ok == b.seq_ok);
  CHECK(a.time_ok == b.time_ok);
  CHECK(a.unsafe_hits == b.unsafe_hits);
}

TEST_CASE("thread cap from the environment is applied without error") {
  setenv("SAFEHOOD_THREADS", "2", 1);
  apply_thread_cap_from_env();
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  SafeResult sr =
      safe_neighborhood(H, m, H.config, 2, H.initial.point, 0.0, 0.5);
  CHECK(sr.radii_chain_safe[0] > 0.0);
  unsetenv("SAFEHOOD_THREADS");
}
