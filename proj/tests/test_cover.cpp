#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "models.hpp"
#include "oracles.hpp"
#include "safehood/cover.hpp"

using namespace safehood;
using oracle::near;

namespace {
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

HybridAutomaton with_box(HybridAutomaton H, double x1lo, double x1hi,
                         double x2lo, double x2hi) {
  H.initial.is_box = true;
  H.initial.lo = v2(x1lo, x2lo);
  H.initial.hi = v2(x1hi, x2hi);
  return H;
}
}  // namespace

TEST_CASE("point initial set: verified safe after one sample") {
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  CoverageReport rep = cover_initial_set(H, m, cfg, VerifyMode::Safe);
  CHECK(rep.verdict == CoverageReport::Verdict::VerifiedSafe);
  CHECK(rep.covered_fraction == 1.0);
  CHECK(rep.samples.size() == 1);
  CHECK(rep.samples[0].nbhd.radius > 0.0);
}

TEST_CASE("resolve_config derives d_thr from the initial box diameter") {
  auto H = with_box(testmodels::sec25(), 1.2, 1.3, 1.8, 2.0);
  H.config.d_thr = -1.0;
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  const double diam =
      phi(m.at(2).M, v2(1.2, 1.8), v2(1.3, 2.0));
  CHECK(near(cfg.d_thr, 0.2 * diam, 1e-12));
  // point-shaped sets resolve to zero (degenerates to robust)
  auto Hp = testmodels::sec25();
  Hp.config.d_thr = -1.0;
  CHECK(resolve_config(Hp, m).d_thr == 0.0);
}

TEST_CASE("clean box on the g1 side verifies in both modes") {
  auto H = with_box(testmodels::sec25(), 1.26, 1.30, 1.80, 1.90);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  cfg.coverage_max_depth = 8;
  CoverageReport robust = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  CoverageReport safe = cover_initial_set(H, m, cfg, VerifyMode::Safe);
  CHECK(robust.verdict == CoverageReport::Verdict::VerifiedSafe);
  CHECK(safe.verdict == CoverageReport::Verdict::VerifiedSafe);
  // superset property lifted to coverage: safe needs no more depth
  CHECK(safe.depth_reached <= robust.depth_reached);
  CHECK(safe.covered_fraction >= robust.covered_fraction - 1e-12);
}

TEST_CASE("verdict monotonicity under a tight depth budget") {
  auto H = with_box(testmodels::sec25(), 1.26, 1.30, 1.80, 1.90);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  cfg.coverage_max_depth = 2;
  CoverageReport robust = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  CoverageReport safe = cover_initial_set(H, m, cfg, VerifyMode::Safe);
  CHECK(safe.covered_fraction >= robust.covered_fraction - 1e-12);
}

TEST_CASE("box containing a grazing state: robust stalls, safe completes") {
  auto H = with_box(testmodels::sec25_graze(), 1.18, 1.22, 1.60, 1.80);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  cfg.coverage_max_depth = 5;
  CoverageReport robust = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  CHECK(robust.verdict == CoverageReport::Verdict::Inconclusive);
  CHECK(robust.covered_fraction < 1.0);
  CoverageReport safe = cover_initial_set(H, m, cfg, VerifyMode::Safe);
  CHECK(safe.verdict == CoverageReport::Verdict::VerifiedSafe);
  CHECK(safe.covered_fraction == 1.0);
}

TEST_CASE("a box feeding the unsafe set falsifies with a counterexample") {
  auto H = testmodels::sec25();
  H.initial.location = 0;  // start directly in l1 above the box
  auto Hb = with_box(H, 1.35, 1.45, 1.15, 1.25);
  Metrics m = build_metrics(Hb);
  VerificationConfig cfg = resolve_config(Hb, m);
  CoverageReport rep = cover_initial_set(Hb, m, cfg, VerifyMode::Robust);
  CHECK(rep.verdict == CoverageReport::Verdict::Falsified);
  REQUIRE(rep.counterexample.has_value());
  CHECK(rep.counterexample->status == TerminalStatus::UnsafeHit);
  CHECK(rep.counterexample->unsafe_entry_time.has_value());
}

TEST_CASE("initial box outside the invariant is a precondition error") {
  auto H = with_box(testmodels::sec25(), 0.9, 1.1, 1.5, 1.6);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  CHECK_THROWS_AS(cover_initial_set(H, m, cfg, VerifyMode::Robust), ModelError);
}

TEST_CASE("covered boxes really sit inside their certifying balls") {
  auto H = with_box(testmodels::sec25(), 1.26, 1.30, 1.80, 1.90);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  cfg.coverage_max_depth = 8;
  CoverageReport rep = cover_initial_set(H, m, cfg, VerifyMode::Safe);
  REQUIRE(rep.verdict == CoverageReport::Verdict::VerifiedSafe);
  std::mt19937_64 rng(99);
  int covered_boxes = 0;
  for (const auto& s : rep.samples) {
    if (!s.covered) continue;
    ++covered_boxes;
    const Mat& M = m.at(s.nbhd.metric_location).M;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
      Vec p(2);
      for (int i = 0; i < 2; ++i)
        p(i) = s.box_lo(i) + u(rng) * (s.box_hi(i) - s.box_lo(i));
      CHECK(phi(M, s.nbhd.center, p) < s.nbhd.radius);
    }
  }
  CHECK(covered_boxes >= 1);
}

TEST_CASE("reports are deterministic for a fixed seed and config") {
  auto H = with_box(testmodels::sec25(), 1.26, 1.30, 1.80, 1.90);
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  cfg.coverage_max_depth = 3;
  CoverageReport a = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  CoverageReport b = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  CHECK(report_to_json(H, a) == report_to_json(H, b));
}

TEST_CASE("falsify_check extracts exactly the unsafe-hitting runs") {
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  HybridTrajectory bad = simulate(H, 0, v2(1.39, 1.2), 0.0, 0.5, H.config);
  auto cx = falsify_check(bad);
  REQUIRE(cx.has_value());
  CHECK(cx->unsafe_entry_time.has_value());
  CHECK(near(*cx->unsafe_entry_time, 0.5 * std::log(1.2 / 0.9), 1e-6));

  HybridTrajectory nominal = simulate(H, 2, v2(1.25, 1.9), 0.0, 0.5, H.config);
  CHECK_FALSE(falsify_check(nominal).has_value());

  auto H2 = testmodels::drift();  // no unsafe set at all
  HybridTrajectory t2 =
      simulate(H2, 0, H2.initial.point, 0.0, H2.config.t_end, H2.config);
  CHECK_FALSE(falsify_check(t2).has_value());
}

TEST_CASE("neighborhood dump has the documented columns") {
  auto H = testmodels::sec25();
  Metrics m = build_metrics(H);
  VerificationConfig cfg = resolve_config(H, m);
  CoverageReport rep = cover_initial_set(H, m, cfg, VerifyMode::Robust);
  std::ostringstream os;
  write_neighborhood_csv(os, H, rep);
  CHECK(os.str().rfind("center_x1,center_x2,radius,kind,critical_class\n", 0) ==
        0);
  CHECK(os.str().find("robust") != std::string::npos);
}
