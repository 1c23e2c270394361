#include "safehood/robust.hpp"

#include <algorithm>
#include <cmath>

namespace safehood {

AllowedGuardPart allowed_guard_part(const HybridAutomaton& H, int event_index,
                                    const Neighborhood& next,
                                    const Metrics& metrics) {
  const EventDef& event = H.events.at(event_index);
  AllowedGuardPart part;
  part.event_index = event_index;
  part.guard = event.guard;
  const auto& inv = H.locations[event.source].invariant;
  part.facet_normal = inv.H.row(event.facet).transpose();
  part.facet_offset = inv.h(event.facet);
  part.ball.R = event.reset.R;
  part.ball.s = event.reset.s;
  part.ball.M = metrics.at(next.metric_location).M;
  part.ball.c = next.center;
  part.ball.radius = std::max(0.0, next.radius);
  return part;
}

double min_q_over_guard(const AllowedGuardPart& part) {
  const Vec f = part.facet_normal;
  const double c = part.facet_offset;
  if (part.guard.dim() == 2) {
    // parameterize the facet line and minimize the 1-D quadratic
    Vec q0 = f * (c / f.squaredNorm());
    Vec dir(2);
    dir << -f(1), f(0);
    dir.normalize();
    double ulo = -1e9, uhi = 1e9;
    for (int i = 0; i < part.guard.rows(); ++i) {
      const double a = part.guard.H.row(i).dot(dir);
      const double b = part.guard.h(i) - part.guard.H.row(i).dot(q0);
      if (a > 1e-12)
        uhi = std::min(uhi, b / a);
      else if (a < -1e-12)
        ulo = std::max(ulo, b / a);
      else if (b < -1e-9)
        return kInf;
    }
    if (ulo > uhi) return kInf;
    Vec z0 = part.ball.R * q0 + part.ball.s - part.ball.c;
    Vec zd = part.ball.R * dir;
    const double alpha = zd.dot(part.ball.M * zd);
    const double beta = 2.0 * z0.dot(part.ball.M * zd);
    const double delta = z0.dot(part.ball.M * z0);
    double u = (alpha > 1e-14) ? -beta / (2.0 * alpha) : (beta > 0 ? ulo : uhi);
    u = std::clamp(u, ulo, uhi);
    return (alpha * u + beta) * u + delta;
  }
  // coarse fallback: vertices plus the facet-plane projection of the center
  VertexSet vs = enumerate_vertices(part.guard);
  double best = kInf;
  for (const auto& v : vs.vertices) best = std::min(best, part.ball.q(v));
  return best;
}

AvoidedSet build_avoided_set(
    const HybridAutomaton& H, int loc, bool last_location,
    const std::optional<AllowedGuardPart>& triggered_carve) {
  AvoidedSet out;
  out.location = loc;
  for (int ui : H.unsafe_in(loc)) {
    AvoidedComponent c;
    c.kind = AvoidedComponent::Kind::Unsafe;
    c.id = ui;
    c.set = H.unsafe[ui].set;
    out.components.push_back(std::move(c));
  }
  for (int ei : H.events_from(loc)) {
    const EventDef& e = H.events[ei];
    AvoidedComponent c;
    c.kind = AvoidedComponent::Kind::Guard;
    c.id = ei;
    c.set = e.guard;
    const auto& inv = H.locations[loc].invariant;
    c.facet = std::make_pair(Vec(inv.H.row(e.facet).transpose()), inv.h(e.facet));
    if (!last_location && triggered_carve && triggered_carve->event_index == ei &&
        !triggered_carve->trivially_empty()) {
      c.holes.push_back(triggered_carve->ball);
      out.allowed.push_back(*triggered_carve);
    }
    out.components.push_back(std::move(c));
  }
  return out;
}

PreparedAvoided prepare_avoided(const AvoidedSet& avoided, const Mat& M) {
  PreparedAvoided out;
  for (const auto& c : avoided.components) {
    if (c.kind == AvoidedComponent::Kind::Unsafe)
      out.unsafe.push_back(prepare_component(c, M));
    else
      out.guards.push_back(prepare_component(c, M));
  }
  return out;
}

namespace {

void track_best(const DistanceResult& r, const PreparedComponent& pc, double* d,
                BottleneckRecord* rec) {
  if (r.value < *d) {
    *d = r.value;
    rec->kind = pc.comp.kind == AvoidedComponent::Kind::Unsafe
                    ? BottleneckRecord::Kind::Unsafe
                    : BottleneckRecord::Kind::Guard;
    rec->component_id = pc.comp.id;
    rec->t = r.witness_time.value_or(0.0);
    rec->witness = r.witness_point;
    rec->value = r.value;
  }
}

}  // namespace

std::pair<double, BottleneckRecord> min_over_components(
    const TrajFn& xi, const TimeWindows& win,
    const std::vector<PreparedComponent>& comps, const Mat& M,
    const MinimizeOpts& opts) {
  double d = kInf;
  BottleneckRecord rec;
  for (const auto& pc : comps) {
    auto r = min_dist_over_window(xi, win, pc, M, opts);
    track_best(r, pc, &d, &rec);
  }
  return {d, rec};
}

GammaBase gamma_base(const TrajFn& xi, const TimeWindows& unsafe_win,
                     const TimeWindows& guard_win, const PreparedAvoided& prep,
                     const Mat& M, const MinimizeOpts& opts) {
  GammaBase out;
  std::tie(out.d_u, out.bottleneck_u) =
      min_over_components(xi, unsafe_win, prep.unsafe, M, opts);
  std::tie(out.d_g, out.bottleneck_g) =
      min_over_components(xi, guard_win, prep.guards, M, opts);
  return out;
}

std::pair<double, BottleneckRecord> robust_radius_raw(
    const TrajectorySegment& seg, const AvoidedSet& avoided,
    const QuadraticBisimFunction& qbf, const VerificationConfig& cfg) {
  PreparedAvoided prep = prepare_avoided(avoided, qbf.M);
  MinimizeOpts opts{seg.t0, cfg.time_grid_dt, cfg.event_tol,
                    cfg.parallel ? Exec::Parallel : Exec::Serial};
  TimeWindows win(seg.t0, seg.t_end);
  GammaBase base = gamma_base(seg.evaluator(), win, win, prep, qbf.M, opts);
  double gamma = std::min(base.d_u, base.d_g);
  BottleneckRecord rec =
      base.d_u <= base.d_g ? base.bottleneck_u : base.bottleneck_g;
  if (!std::isfinite(gamma)) {
    gamma = cfg.radius_cap;
    rec = BottleneckRecord{};
  }
  return {gamma, rec};
}

namespace {

// golden refinement of an interior local-minimum bracket
double refine_bracket(const std::function<double(double)>& g, double a, double b,
                      double tol) {
  constexpr double kPhi = 0.6180339887498949;
  double x1 = b - kPhi * (b - a), x2 = a + kPhi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2; x2 = x1; f2 = f1; x1 = b - kPhi * (b - a); f1 = g(x1);
    } else {
      a = x1; x1 = x2; f1 = f2; x2 = a + kPhi * (b - a); f2 = g(x2);
    }
  }
  return g(0.5 * (a + b));
}

}  // namespace

ShrinkResult shrinking(double gamma, const TrajectorySegment& seg,
                       const PreparedAvoided& prep,
                       const PreparedComponent& invariant,
                       const TimeWindows& excluded,
                       const QuadraticBisimFunction& qbf,
                       const VerificationConfig& cfg) {
  const double t_exit = seg.t_end;
  const double maxlag = cfg.tau_maxlag;
  const Mat& M = qbf.M;
  auto xi = seg.evaluator();

  auto unsafe_at = [&](double t) {
    double d = kInf;
    Vec p = xi(t);
    for (const auto& pc : prep.unsafe)
      d = std::min(d, dist_to_prepared(M, p, pc, nullptr));
    return d;
  };
  auto guard_at = [&](double t) {
    double d = kInf;
    Vec p = xi(t);
    for (const auto& pc : prep.guards)
      d = std::min(d, dist_to_prepared(M, p, pc, nullptr));
    return d;
  };
  auto inv_at = [&](double t) {
    return dist_to_prepared(M, xi(t), invariant, nullptr);
  };

  ShrinkResult out;
  if (maxlag <= 0.0) {
    out.tau_lag = 0.0;
    out.gamma_tilde_at_lag = gamma;
    out.radius = std::min(gamma, inv_at(t_exit));
    return out;
  }

  const double dt = cfg.time_grid_dt;
  std::vector<double> taus;
  for (long k = 0;; ++k) {
    const double tau = static_cast<double>(k) * dt;
    if (tau >= maxlag) {
      taus.push_back(maxlag);
      break;
    }
    taus.push_back(tau);
  }
  const long n = static_cast<long>(taus.size());

  std::vector<double> u_val(n), inv_val(n);
  for (long k = 0; k < n; ++k) {
    u_val[k] = unsafe_at(t_exit + taus[k]);
    inv_val[k] = inv_at(t_exit + taus[k]);
  }
  // refine interior unsafe minima so the prefix envelope is not grid-limited
  for (long k = 1; k + 1 < n; ++k)
    if (std::isfinite(u_val[k]) && u_val[k] <= u_val[k - 1] && u_val[k] <= u_val[k + 1])
      u_val[k] = std::min(u_val[k],
                          refine_bracket([&](double tau) { return unsafe_at(t_exit + tau); },
                                         taus[k - 1], taus[k + 1], cfg.event_tol));

  // guard evaluation points: the extension minus the excluded pivot windows
  TimeWindows ext_win = TimeWindows(t_exit, t_exit + maxlag).subtract(excluded);
  std::vector<std::pair<double, double>> gpts;  // (t, value), sorted
  for (const auto& [a, b] : ext_win.intervals()) {
    std::vector<double> ts{a};
    long k0 = static_cast<long>(std::ceil((a - t_exit) / dt - 1e-12));
    for (long k = k0;; ++k) {
      const double t = t_exit + static_cast<double>(k) * dt;
      if (t >= b - 1e-15) break;
      if (t > a + 1e-15) ts.push_back(t);
    }
    if (b > a) ts.push_back(b);
    std::vector<double> vs(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) vs[i] = guard_at(ts[i]);
    for (size_t i = 1; i + 1 < ts.size(); ++i)
      if (std::isfinite(vs[i]) && vs[i] <= vs[i - 1] && vs[i] <= vs[i + 1])
        vs[i] = std::min(vs[i], refine_bracket(guard_at, ts[i - 1], ts[i + 1],
                                               cfg.event_tol));
    for (size_t i = 0; i < ts.size(); ++i) gpts.push_back({ts[i], vs[i]});
  }

  // prefix envelopes on the tau grid
  std::vector<double> du_pref(n), dg_pref(n), dinv_pref(n);
  {
    double run_u = kInf, run_inv = -kInf;
    size_t gi = 0;
    double run_g = kInf;
    for (long k = 0; k < n; ++k) {
      run_u = std::min(run_u, u_val[k]);
      run_inv = std::max(run_inv, inv_val[k]);
      const double T = t_exit + taus[k];
      while (gi < gpts.size() && gpts[gi].first <= T + 1e-15)
        run_g = std::min(run_g, gpts[gi++].second);
      du_pref[k] = run_u;
      dg_pref[k] = run_g;
      dinv_pref[k] = run_inv;
    }
  }

  auto gamma_tilde = [&](long k) {
    return std::min({gamma, du_pref[k], dg_pref[k]});
  };

  long hit = -1;
  for (long k = 0; k < n; ++k)
    if (gamma_tilde(k) <= dinv_pref[k]) {
      hit = k;
      break;
    }

  if (hit < 0) {
    out.tau_lag = maxlag;
    out.gamma_tilde_at_lag = gamma_tilde(n - 1);
    out.radius = std::min(gamma_tilde(n - 1), dinv_pref[n - 1]);
    return out;
  }
  if (hit == 0) {
    out.tau_lag = 0.0;
    out.gamma_tilde_at_lag = gamma_tilde(0);
    out.radius = std::min(gamma_tilde(0), dinv_pref[0]);
    return out;
  }

  // bisect the crossing within (tau_{hit-1}, tau_hit]
  const double du0 = du_pref[hit - 1];
  const double dg0 = dg_pref[hit - 1];
  const double dinv0 = dinv_pref[hit - 1];
  auto eval_at = [&](double tau) {
    const double T = t_exit + tau;
    const double du = std::min(du0, unsafe_at(T));
    const double dg = ext_win.contains(T) ? std::min(dg0, guard_at(T)) : dg0;
    const double dinv = std::max(dinv0, inv_at(T));
    const double gt = std::min({gamma, du, dg});
    return std::make_pair(gt, dinv);
  };
  double lo = taus[hit - 1], hi = taus[hit];
  while (hi - lo > cfg.event_tol) {
    const double mid = 0.5 * (lo + hi);
    auto [gt, dinv] = eval_at(mid);
    if (gt <= dinv)
      hi = mid;
    else
      lo = mid;
  }
  auto [gt, dinv] = eval_at(hi);
  out.tau_lag = hi;
  out.gamma_tilde_at_lag = gt;
  out.radius = std::min(gt, dinv);
  return out;
}

SegmentCertificate robust_segment_certificate(
    const HybridAutomaton& H, const TrajectorySegment& seg,
    const QuadraticBisimFunction& qbf, const VerificationConfig& cfg,
    const std::optional<AllowedGuardPart>& triggered_carve, bool last_location) {
  SegmentCertificate out;
  AvoidedSet avoided =
      build_avoided_set(H, seg.location, last_location, triggered_carve);
  PreparedAvoided prep = prepare_avoided(avoided, qbf.M);
  MinimizeOpts opts{seg.t0, cfg.time_grid_dt, cfg.event_tol,
                    cfg.parallel ? Exec::Parallel : Exec::Serial};
  TimeWindows win(seg.t0, seg.t_end);
  GammaBase base = gamma_base(seg.evaluator(), win, win, prep, qbf.M, opts);
  out.d_u = base.d_u;
  out.d_g = base.d_g;
  double gamma = std::min(base.d_u, base.d_g);
  out.bottleneck = base.d_u <= base.d_g ? base.bottleneck_u : base.bottleneck_g;
  if (!std::isfinite(gamma)) {
    gamma = cfg.radius_cap;
    out.bottleneck = BottleneckRecord{};
  }
  out.gamma_raw = gamma;
  if (!last_location && seg.exit) {
    PreparedComponent inv_pc = prepare_component(
        AvoidedComponent{AvoidedComponent::Kind::Unsafe, -1,
                         H.locations[seg.location].invariant,
                         {},
                         std::nullopt},
        qbf.M);
    ShrinkResult sr =
        shrinking(gamma, seg, prep, inv_pc, TimeWindows::empty(), qbf, cfg);
    out.gamma = sr.radius;
    out.tau_lag = sr.tau_lag;
  } else {
    out.gamma = gamma;
  }
  return out;
}

RobustResult robust_neighborhood(const HybridAutomaton& H,
                                 const HybridTrajectory& traj,
                                 const Metrics& metrics,
                                 const VerificationConfig& cfg) {
  RobustResult out;
  out.tau_maxlead = cfg.tau_maxlead;
  out.tau_maxlag = cfg.tau_maxlag;
  const int N = static_cast<int>(traj.segments.size());
  out.neighborhoods.assign(N, {});
  out.bottlenecks.assign(N, {});
  out.tau_lags.assign(N, 0.0);
  out.unsafe_min_dist.assign(N, kInf);
  if (traj.status != TerminalStatus::HorizonReached || N == 0) return out;

  for (int i = N - 1; i >= 0; --i) {
    const TrajectorySegment& seg = traj.segments[i];
    const auto& qbf = metrics.at(seg.location);
    const bool last = (i == N - 1);
    std::optional<AllowedGuardPart> carve;
    if (!last && seg.exit) {
      carve = allowed_guard_part(H, seg.exit->event_index,
                                 out.neighborhoods[i + 1], metrics);
    }
    SegmentCertificate cert =
        robust_segment_certificate(H, seg, qbf, cfg, carve, last);
    out.unsafe_min_dist[i] = cert.d_u;
    out.tau_lags[i] = cert.tau_lag;
    out.neighborhoods[i] = Neighborhood{seg.location, seg.x0, cert.gamma,
                                        seg.location, Neighborhood::Kind::Robust};
    out.bottlenecks[i] = cert.bottleneck;
  }
  out.valid = true;
  return out;
}

CriticalityClass classify_trajectory(const HybridTrajectory& traj,
                                     const RobustResult& result,
                                     const VerificationConfig& cfg) {
  CriticalityClass out;
  if (!result.valid) {
    out.kind = traj.status == TerminalStatus::UnsafeHit
                   ? CriticalityClass::Kind::UnsafeCritical
                   : CriticalityClass::Kind::Noncritical;
    return out;
  }
  bool unsafe_reached = traj.status == TerminalStatus::UnsafeHit;
  for (double d : result.unsafe_min_dist)
    if (d <= cfg.dist_tol) unsafe_reached = true;
  bool any_zero = false;
  for (size_t i = 0; i < result.neighborhoods.size(); ++i) {
    if (result.neighborhoods[i].radius <= cfg.dist_tol) {
      any_zero = true;
      if (result.bottlenecks[i].value <= result.neighborhoods[i].radius + cfg.dist_tol &&
          out.bottleneck.kind == BottleneckRecord::Kind::None)
        out.bottleneck = result.bottlenecks[i];
    }
  }
  if (!any_zero)
    out.kind = CriticalityClass::Kind::Noncritical;
  else if (unsafe_reached)
    out.kind = CriticalityClass::Kind::UnsafeCritical;
  else
    out.kind = CriticalityClass::Kind::GuardCritical;
  return out;
}

}  // namespace safehood
