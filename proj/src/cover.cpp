#include "safehood/cover.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace safehood {

VerificationConfig resolve_config(const HybridAutomaton& H, const Metrics& metrics) {
  VerificationConfig cfg = H.config;
  if (cfg.d_thr < 0.0) {
    double diam = 0.0;
    if (H.initial.is_box) {
      const Mat& M = metrics.at(H.initial.location).M;
      const int n = H.dim;
      const long corners = 1L << n;
      for (long a = 0; a < corners; ++a)
        for (long b = a + 1; b < corners; ++b) {
          Vec pa(n), pb(n);
          for (int i = 0; i < n; ++i) {
            pa(i) = (a >> i) & 1 ? H.initial.hi(i) : H.initial.lo(i);
            pb(i) = (b >> i) & 1 ? H.initial.hi(i) : H.initial.lo(i);
          }
          diam = std::max(diam, phi(M, pa, pb));
        }
    }
    cfg.d_thr = 0.2 * diam;
  }
  return cfg;
}

std::optional<HybridTrajectory> falsify_check(const HybridTrajectory& traj) {
  if (traj.status == TerminalStatus::UnsafeHit) return traj;
  return std::nullopt;
}

namespace {

struct Box {
  Vec lo, hi;
  int depth = 0;
  long id = 0;
};

double ball_corner_max(const Mat& M, const Vec& center, const Box& box) {
  const int n = static_cast<int>(center.size());
  const long corners = 1L << n;
  double worst = 0.0;
  for (long a = 0; a < corners; ++a) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p(i) = (a >> i) & 1 ? box.hi(i) : box.lo(i);
    worst = std::max(worst, phi(M, center, p));
  }
  return worst;
}

int longest_phi_axis(const Mat& M, const Box& box) {
  int best = 0;
  double best_len = -1.0;
  for (int i = 0; i < box.lo.size(); ++i) {
    const double len = (box.hi(i) - box.lo(i)) * std::sqrt(M(i, i));
    if (len > best_len + 1e-15) {
      best_len = len;
      best = i;
    }
  }
  return best;
}

struct BoxOutcome {
  SampleRecord rec;
  bool falsified = false;
  HybridTrajectory traj;
  long sims = 0;
};

}  // namespace

CoverageReport cover_initial_set(const HybridAutomaton& H, const Metrics& metrics,
                                 const VerificationConfig& cfg, VerifyMode mode) {
  const auto t_start = std::chrono::steady_clock::now();
  CoverageReport report;
  report.mode = mode;
  const int loc0 = H.initial.location;
  const Mat& M0 = metrics.at(loc0).M;
  const Exec exec = cfg.parallel ? Exec::Parallel : Exec::Serial;

  auto eval_center = [&](const Vec& c) {
    BoxOutcome out;
    out.rec.state = c;
    out.traj = simulate(H, loc0, c, 0.0, cfg.t_end, cfg);
    out.sims = 1;
    if (out.traj.status == TerminalStatus::UnsafeHit) {
      out.falsified = true;
      return out;
    }
    if (mode == VerifyMode::Robust) {
      RobustResult rr = robust_neighborhood(H, out.traj, metrics, cfg);
      out.rec.nbhd = rr.valid ? rr.neighborhoods.front()
                              : Neighborhood{loc0, c, 0.0, loc0,
                                             Neighborhood::Kind::Robust};
      out.rec.crit = classify_trajectory(out.traj, rr, cfg);
    } else {
      SafeResult sr = safe_neighborhood(H, metrics, cfg, loc0, c, 0.0, cfg.t_end);
      out.rec.nbhd = sr.neighborhood;
      RobustResult rr = robust_neighborhood(H, out.traj, metrics, cfg);
      out.rec.crit = classify_trajectory(out.traj, rr, cfg);
      out.sims += 1;
    }
    return out;
  };

  // point-shaped initial set: one sample decides
  if (!H.initial.is_box) {
    const Vec c = H.initial.point;
    if (!H.locations[loc0].invariant.contains(c, cfg.event_tol))
      throw ModelError("initial", "initial state outside the invariant");
    BoxOutcome out = eval_center(c);
    report.simulations = out.sims;
    out.rec.box_lo = c;
    out.rec.box_hi = c;
    if (out.falsified) {
      report.verdict = CoverageReport::Verdict::Falsified;
      report.counterexample = out.traj;
    } else {
      out.rec.covered = out.rec.nbhd.radius > 0.0;
      report.covered_fraction = out.rec.covered ? 1.0 : 0.0;
      report.verdict = out.rec.covered ? CoverageReport::Verdict::VerifiedSafe
                                       : CoverageReport::Verdict::Inconclusive;
    }
    report.samples.push_back(std::move(out.rec));
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    return report;
  }

  // box: every corner must lie in the initial location's invariant
  {
    Box root{H.initial.lo, H.initial.hi, 0, 0};
    const long corners = 1L << H.dim;
    for (long a = 0; a < corners; ++a) {
      Vec p(H.dim);
      for (int i = 0; i < H.dim; ++i)
        p(i) = (a >> i) & 1 ? root.hi(i) : root.lo(i);
      if (!H.locations[loc0].invariant.contains(p, cfg.event_tol))
        throw ModelError("initial.box", "box not contained in the invariant");
    }
  }

  double total_volume = 1.0;
  for (int i = 0; i < H.dim; ++i)
    total_volume *= std::max(0.0, H.initial.hi(i) - H.initial.lo(i));
  double covered_volume = 0.0;
  long next_id = 1;
  std::vector<Box> frontier{Box{H.initial.lo, H.initial.hi, 0, 0}};
  bool falsified = false;
  long falsified_id = -1;

  for (int depth = 0; depth <= cfg.coverage_max_depth && !frontier.empty();
       ++depth) {
    report.depth_reached = depth;
    std::vector<BoxOutcome> outcomes(frontier.size());
    parallel_map(
        outcomes,
        [&](long i) {
          const Box& b = frontier[i];
          Vec c = 0.5 * (b.lo + b.hi);
          BoxOutcome out = eval_center(c);
          out.rec.box_lo = b.lo;
          out.rec.box_hi = b.hi;
          out.rec.depth = b.depth;
          if (!out.falsified) {
            const double reach = ball_corner_max(M0, c, b);
            out.rec.covered = reach < out.rec.nbhd.radius;
          }
          return out;
        },
        exec);

    std::vector<Box> next;
    for (size_t i = 0; i < outcomes.size(); ++i) {
      report.simulations += outcomes[i].sims;
      if (outcomes[i].falsified && !falsified) {
        falsified = true;
        falsified_id = frontier[i].id;
        report.counterexample = outcomes[i].traj;
      } else if (outcomes[i].falsified && frontier[i].id < falsified_id) {
        falsified_id = frontier[i].id;
        report.counterexample = outcomes[i].traj;
      }
      report.samples.push_back(outcomes[i].rec);
      if (falsified) continue;
      if (outcomes[i].rec.covered) {
        double v = 1.0;
        for (int d = 0; d < H.dim; ++d)
          v *= std::max(0.0, frontier[i].hi(d) - frontier[i].lo(d));
        covered_volume += v;
      } else if (frontier[i].depth < cfg.coverage_max_depth) {
        const Box& b = frontier[i];
        const int axis = longest_phi_axis(M0, b);
        const double mid = 0.5 * (b.lo(axis) + b.hi(axis));
        Box left{b.lo, b.hi, b.depth + 1, next_id++};
        left.hi(axis) = mid;
        Box right{b.lo, b.hi, b.depth + 1, next_id++};
        right.lo(axis) = mid;
        next.push_back(std::move(left));
        next.push_back(std::move(right));
      }
    }
    if (falsified) break;
    frontier = std::move(next);
  }

  if (falsified) {
    report.verdict = CoverageReport::Verdict::Falsified;
  } else {
    report.covered_fraction =
        total_volume > 0.0 ? covered_volume / total_volume : 0.0;
    report.verdict = report.covered_fraction >= 1.0 - 1e-9
                         ? CoverageReport::Verdict::VerifiedSafe
                         : CoverageReport::Verdict::Inconclusive;
  }
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
  return report;
}

namespace {

const char* verdict_name(CoverageReport::Verdict v) {
  switch (v) {
    case CoverageReport::Verdict::VerifiedSafe: return "verified-safe";
    case CoverageReport::Verdict::Falsified: return "falsified";
    default: return "inconclusive";
  }
}

const char* crit_name(CriticalityClass::Kind k) {
  switch (k) {
    case CriticalityClass::Kind::GuardCritical: return "guard-critical";
    case CriticalityClass::Kind::UnsafeCritical: return "unsafe-critical";
    default: return "noncritical";
  }
}

}  // namespace

std::string report_to_json(const HybridAutomaton& H, const CoverageReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = report.mode == VerifyMode::Robust ? "robust" : "safe";
  j["verdict"] = verdict_name(report.verdict);
  j["covered_fraction"] = report.covered_fraction;
  j["simulations"] = report.simulations;
  j["depth_reached"] = report.depth_reached;
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();
  for (const auto& s : report.samples) {
    nlohmann::ordered_json js;
    nlohmann::ordered_json st = nlohmann::ordered_json::array();
    for (int i = 0; i < s.state.size(); ++i) st.push_back(s.state(i));
    js["state"] = st;
    js["radius"] = s.nbhd.radius;
    js["location"] = s.nbhd.location >= 0 ? H.locations[s.nbhd.location].id : "";
    js["kind"] =
        s.nbhd.kind == Neighborhood::Kind::Robust ? "robust" : "safe";
    js["critical_class"] = crit_name(s.crit.kind);
    js["covered"] = s.covered;
    js["depth"] = s.depth;
    samples.push_back(std::move(js));
  }
  j["samples"] = samples;
  if (report.counterexample) {
    nlohmann::ordered_json cx;
    cx["unsafe_entry_time"] = report.counterexample->unsafe_entry_time.value_or(-1.0);
    cx["events"] = report.counterexample->events.size();
    j["counterexample"] = cx;
  }
  return j.dump(2);
}

void write_neighborhood_csv(std::ostream& os, const HybridAutomaton& H,
                            const CoverageReport& report) {
  os << "center_x1";
  for (int i = 2; i <= H.dim; ++i) os << ",center_x" << i;
  os << ",radius,kind,critical_class\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return std::string(buf);
  };
  for (const auto& s : report.samples) {
    os << num(s.state(0));
    for (int i = 1; i < H.dim; ++i) os << "," << num(s.state(i));
    os << "," << num(s.nbhd.radius) << ","
       << (s.nbhd.kind == Neighborhood::Kind::Robust ? "robust" : "safe") << ","
       << crit_name(s.crit.kind) << "\n";
  }
}

Vec sample_in_ball(const Neighborhood& nbhd, const Mat& M, std::mt19937_64& rng) {
  const int n = static_cast<int>(nbhd.center.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec u(n);
  for (int i = 0; i < n; ++i) u(i) = gauss(rng);
  const double nrm = u.norm();
  if (nrm > 0.0) u /= nrm;
  const double r = std::pow(unif(rng), 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  Mat Minvhalf = es.operatorInverseSqrt();
  return nbhd.center + nbhd.radius * r * (Minvhalf * u);
}

namespace {

struct SampleVerdict {
  bool outside = false;
  bool seq_ok = false;
  bool time_ok = false;
  bool unsafe = false;
};

}  // namespace

PropCheckStats check_robust_samples(const HybridAutomaton& H, const Metrics& metrics,
                                    const VerificationConfig& cfg,
                                    const HybridTrajectory& nominal,
                                    const Neighborhood& nbhd, int n,
                                    unsigned long seed) {
  PropCheckStats stats;
  stats.n = n;
  const Mat& M = metrics.at(nbhd.metric_location).M;
  const auto nominal_seq = nominal.event_sequence();
  std::vector<SampleVerdict> verdicts(n);
  parallel_map(
      verdicts,
      [&](long i) {
        SampleVerdict v;
        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
        Vec x = sample_in_ball(nbhd, M, rng);
        if (!H.locations[nbhd.location].invariant.contains(x, cfg.event_tol)) {
          v.outside = true;
          return v;
        }
        HybridTrajectory t = simulate(H, nbhd.location, x, 0.0, cfg.t_end, cfg);
        v.unsafe = t.status == TerminalStatus::UnsafeHit;
        v.seq_ok = t.event_sequence() == nominal_seq;
        v.time_ok = v.seq_ok;
        if (v.seq_ok)
          for (size_t k = 0; k < t.events.size(); ++k) {
            const double dev = t.events[k].time - nominal.events[k].time;
            if (dev < -cfg.tau_maxlead - cfg.event_tol ||
                dev > cfg.tau_maxlag + cfg.event_tol)
              v.time_ok = false;
          }
        return v;
      },
      cfg.parallel ? Exec::Parallel : Exec::Serial);
  for (const auto& v : verdicts) {
    if (v.outside) {
      ++stats.outside_invariant;
      continue;
    }
    if (v.seq_ok) ++stats.seq_ok;
    if (v.time_ok) ++stats.time_ok;
    if (v.unsafe) ++stats.unsafe_hits;
  }
  return stats;
}

PropCheckStats check_safe_samples(const HybridAutomaton& H, const Metrics& metrics,
                                  const VerificationConfig& cfg,
                                  const SafeResult& result, int n,
                                  unsigned long seed) {
  PropCheckStats stats;
  stats.n = n;
  const Neighborhood& nbhd = result.neighborhood;
  const Mat& M = metrics.at(nbhd.metric_location).M;
  EventTreeNode tree = build_event_tree(result);
  std::vector<SampleVerdict> verdicts(n);
  parallel_map(
      verdicts,
      [&](long i) {
        SampleVerdict v;
        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
        Vec x = sample_in_ball(nbhd, M, rng);
        if (!H.locations[nbhd.location].invariant.contains(x, cfg.event_tol)) {
          v.outside = true;
          return v;
        }
        HybridTrajectory t = simulate(H, nbhd.location, x, 0.0, cfg.t_end, cfg);
        v.unsafe = t.status == TerminalStatus::UnsafeHit;
        v.seq_ok = matches_event_tree_prefix(tree, t.events, cfg.tau_maxlead,
                                             cfg.tau_maxlag, cfg.event_tol);
        v.time_ok = v.seq_ok;
        return v;
      },
      cfg.parallel ? Exec::Parallel : Exec::Serial);
  for (const auto& v : verdicts) {
    if (v.outside) {
      ++stats.outside_invariant;
      continue;
    }
    if (v.seq_ok) ++stats.seq_ok;
    if (v.time_ok) ++stats.time_ok;
    if (v.unsafe) ++stats.unsafe_hits;
  }
  return stats;
}

}  // namespace safehood
