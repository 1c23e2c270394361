#include "safehood/safe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>

#include <Eigen/Eigenvalues>

namespace safehood {

std::vector<int> proximal_guards(const HybridAutomaton& H, int loc,
                                 const TrajFn& xi, double tau, double d,
                                 const QuadraticBisimFunction& qbf) {
  std::vector<int> out;
  const Vec p = xi(tau);
  for (int ei : H.events_from(loc)) {
    auto r = dist_point_to_polytope(qbf.M, p, H.events[ei].guard);
    if (r.value <= d) out.push_back(ei);
  }
  return out;
}

Vec proximal_state(const Eigen::Ref<const Vec>& p, const EventDef& event,
                   const QuadraticBisimFunction& qbf) {
  auto r = dist_point_to_polytope(qbf.M, p, event.guard);
  if (!r.witness_point)
    throw ModelError("proximal_state", "guard " + event.id + " is empty");
  return *r.witness_point;
}

namespace {

using Key = std::tuple<int, std::vector<std::int64_t>, std::int64_t, int>;

Key make_key(int loc, const Vec& x0, double t0, int depth) {
  std::vector<std::int64_t> q(x0.size());
  for (int i = 0; i < x0.size(); ++i)
    q[i] = static_cast<std::int64_t>(std::llround(x0(i) * 1e9));
  return {loc, std::move(q), static_cast<std::int64_t>(std::llround(t0 * 1e9)),
          depth};
}

struct NodeContext {
  const HybridAutomaton& H;
  const Metrics& metrics;
  const VerificationConfig& cfg;
  double t_end;
  std::map<Key, std::shared_ptr<SafeNode>> cache;
};

double plain_guard_dist(const std::vector<PreparedComponent>& plain, const Mat& M,
                        const Vec& p) {
  double d = kInf;
  for (const auto& pc : plain)
    d = std::min(d, dist_to_prepared(M, p, pc, nullptr));
  return d;
}

double carved_guard_dist(const std::vector<PreparedComponent>& comps, const Mat& M,
                         const Vec& p) {
  double d = kInf;
  for (const auto& pc : comps)
    d = std::min(d, dist_to_prepared(M, p, pc, nullptr));
  return d;
}

// Grid lattice points of [a, b] anchored at `anchor`, endpoints exact.
std::vector<double> lattice_points(double a, double b, double anchor, double dt) {
  std::vector<double> ts{a};
  long k = static_cast<long>(std::ceil((a - anchor) / dt - 1e-12));
  for (;; ++k) {
    const double t = anchor + static_cast<double>(k) * dt;
    if (t >= b - 1e-15) break;
    if (t > a + 1e-15) ts.push_back(t);
  }
  if (b > a) ts.push_back(b);
  return ts;
}

double golden(const std::function<double(double)>& g, double a, double b,
              double tol, double* arg);

// {t in [t0, t1] | min plain guard distance <= d}, edges bisected. Interior
// local minima are refined so a dip below d between grid points is not lost.
TimeWindows proximal_time_set(const TrajFn& xi,
                              const std::vector<PreparedComponent>& plain,
                              const Mat& M, double t0, double t1, double d,
                              double dt, double tol) {
  TimeWindows out;
  if (plain.empty() || t1 < t0) return out;
  auto f = [&](double t) { return plain_guard_dist(plain, M, xi(t)) - d; };
  std::vector<double> ts = lattice_points(t0, t1, t0, dt);
  std::vector<char> in(ts.size());
  std::vector<double> fv(ts.size());
  for (size_t i = 0; i < ts.size(); ++i) {
    fv[i] = f(ts[i]);
    in[i] = fv[i] <= 0.0;
  }
  auto cross = [&](double lo, double hi, bool enter) {
    // bisect the indicator boundary; `enter`: outside -> inside
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      const bool inside = f(mid) <= 0.0;
      if (inside == enter)
        hi = mid;
      else
        lo = mid;
    }
    return enter ? hi : lo;
  };
  size_t i = 0;
  while (i < ts.size()) {
    if (!in[i]) {
      ++i;
      continue;
    }
    double start = ts[i];
    if (i > 0) start = cross(ts[i - 1], ts[i], true);
    size_t j = i;
    while (j + 1 < ts.size() && in[j + 1]) ++j;
    double end = ts[j];
    if (j + 1 < ts.size()) end = cross(ts[j], ts[j + 1], false);
    out.add(start, end);
    i = j + 1;
  }
  // interior dips below the threshold missed by the grid
  for (size_t k = 1; k + 1 < ts.size(); ++k) {
    if (in[k] || in[k - 1] || in[k + 1]) continue;
    if (!(fv[k] <= fv[k - 1] && fv[k] <= fv[k + 1])) continue;
    double arg;
    const double v = golden(f, ts[k - 1], ts[k + 1], tol, &arg);
    if (v > 0.0) continue;
    const double start = cross(ts[k - 1], arg, true);
    const double end = cross(arg, ts[k + 1], false);
    out.add(start, end);
  }
  return out;
}

double golden(const std::function<double(double)>& g, double a, double b,
              double tol, double* arg) {
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
  *arg = 0.5 * (a + b);
  return g(*arg);
}

struct SupArgmin {
  double value = kInf;
  double t = 0.0;
  bool found = false;
};

// global minimum of the carved guard distance over the windows, returning the
// supremum of (near-)argmin times
SupArgmin sup_argmin_guard_dist(const TrajFn& xi, const TimeWindows& win,
                                const std::vector<PreparedComponent>& comps,
                                const Mat& M, double anchor, double dt,
                                double refine_tol, double tie_tol) {
  SupArgmin out;
  if (win.is_empty() || comps.empty()) return out;
  auto g = [&](double t) { return carved_guard_dist(comps, M, xi(t)); };
  std::vector<std::pair<double, double>> cand;  // (t, value)
  for (const auto& [a, b] : win.intervals()) {
    std::vector<double> ts = lattice_points(a, b, anchor, dt);
    std::vector<double> vs(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) vs[i] = g(ts[i]);
    for (size_t i = 0; i < ts.size(); ++i) {
      cand.push_back({ts[i], vs[i]});
      const bool lok = (i == 0) || vs[i] <= vs[i - 1];
      const bool rok = (i + 1 == ts.size()) || vs[i] <= vs[i + 1];
      if (lok && rok) {
        const double lo = (i == 0) ? ts[i] : ts[i - 1];
        const double hi = (i + 1 == ts.size()) ? ts[i] : ts[i + 1];
        if (hi - lo > refine_tol) {
          double arg;
          const double v = golden(g, lo, hi, refine_tol, &arg);
          cand.push_back({arg, v});
        }
      }
    }
  }
  for (const auto& [t, v] : cand)
    if (v < out.value) out.value = v;
  if (!std::isfinite(out.value)) return out;
  for (const auto& [t, v] : cand)
    if (v <= out.value + tie_tol && (!out.found || t > out.t)) {
      out.t = t;
      out.found = true;
    }
  return out;
}

std::shared_ptr<SafeNode> compute_node(NodeContext& ctx, int loc, const Vec& x0,
                                       double t0, int depth);

double branch_margin(const Mat& M_loc, const EventDef& e,
                     const QuadraticBisimFunction& next_qbf, double next_radius,
                     double cap) {
  if (next_radius <= 0.0) return 0.0;
  Mat P = e.reset.R.transpose() * next_qbf.M * e.reset.R;
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (P + P.transpose()),
                                                   M_loc);
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmax <= 1e-15) return cap;  // degenerate reset: preimage unbounded
  return std::min(cap, next_radius / std::sqrt(lmax));
}

struct BranchData {
  int event_index = -1;
  Vec y;               // proximal state on cl(g)
  EllipsoidHole ball;  // reset-preimage of the branch neighborhood
  double margin = 0.0;
  std::shared_ptr<SafeNode> node;
  bool reused_chain = false;
};

std::shared_ptr<SafeNode> compute_node(NodeContext& ctx, int loc, const Vec& x0,
                                       double t0, int depth) {
  const Key key = make_key(loc, x0, t0, depth);
  if (auto it = ctx.cache.find(key); it != ctx.cache.end()) return it->second;

  auto node = std::make_shared<SafeNode>();
  node->location = loc;
  node->entry_state = x0;
  node->entry_time = t0;
  node->depth = depth;
  ctx.cache[key] = node;

  const auto& cfg = ctx.cfg;
  const auto& qbf = ctx.metrics.at(loc);

  if (depth > cfg.max_recursion_depth) {
    node->diagnostics.push_back(
        {"recursion-depth", "virtual-event nesting exceeded the bound"});
    node->gamma_safe = node->gamma_robust = 0.0;
    node->seg_end = t0;
    return node;
  }

  node->sim = simulate(ctx.H, loc, x0, t0, ctx.t_end, cfg, SimulateOpts{1});
  if (node->sim.status == TerminalStatus::Blocked) {
    node->diagnostics.push_back(
        {"branch-blocked", "simulation blocked; conservative zero radius"});
    node->gamma_safe = node->gamma_robust = 0.0;
    node->seg_end = node->sim.segments.empty() ? t0 : node->sim.segments[0].t_end;
    return node;
  }
  if (node->sim.status == TerminalStatus::UnsafeHit) {
    node->diagnostics.push_back(
        {"branch-unsafe", "trajectory reaches the unsafe set; zero radius"});
    node->gamma_safe = node->gamma_robust = 0.0;
    node->d_u = 0.0;
    node->seg_end = node->sim.segments[0].t_end;
    return node;
  }

  const TrajectorySegment& seg = node->sim.segments.front();
  node->seg_end = seg.t_end;
  const bool triggered = seg.exit.has_value();
  if (triggered) node->triggered_event = seg.exit->event_index;

  // continuation through the triggered event (same depth: a real event)
  std::optional<AllowedGuardPart> carve_safe, carve_robust;
  if (triggered) {
    const EventDef& e = ctx.H.events[seg.exit->event_index];
    node->chain = compute_node(ctx, e.target, node->sim.events[0].reset_state,
                               seg.t_end, depth);
    Neighborhood next_safe{e.target, node->chain->entry_state,
                           node->chain->gamma_safe, e.target,
                           Neighborhood::Kind::Safe};
    Neighborhood next_robust{e.target, node->chain->entry_state,
                             node->chain->gamma_robust, e.target,
                             Neighborhood::Kind::Robust};
    carve_safe = allowed_guard_part(ctx.H, seg.exit->event_index, next_safe,
                                    ctx.metrics);
    carve_robust = allowed_guard_part(ctx.H, seg.exit->event_index, next_robust,
                                      ctx.metrics);
  }

  // embedded robust certificate (identical arithmetic to robust_neighborhood)
  node->robust_cert = robust_segment_certificate(ctx.H, seg, qbf, cfg,
                                                 carve_robust, !triggered);
  node->gamma_robust = node->robust_cert.gamma;

  // ---- safe certificate ----
  const Mat& M = qbf.M;
  MinimizeOpts opts{seg.t0, cfg.time_grid_dt, cfg.event_tol,
                    cfg.parallel ? Exec::Parallel : Exec::Serial};
  AvoidedSet avoided = build_avoided_set(ctx.H, loc, !triggered, carve_safe);
  PreparedAvoided prep = prepare_avoided(avoided, M);
  auto xi = seg.evaluator();
  TimeWindows win_full(seg.t0, seg.t_end);

  auto [d_u, bott_u] = min_over_components(xi, win_full, prep.unsafe, M, opts);
  node->d_u = d_u;

  // plain guards for the proximity subroutines
  std::vector<PreparedComponent> plain;
  std::vector<int> guard_events = ctx.H.events_from(loc);
  for (int ei : guard_events) {
    AvoidedComponent c;
    c.kind = AvoidedComponent::Kind::Guard;
    c.id = ei;
    c.set = ctx.H.events[ei].guard;
    plain.push_back(prepare_component(c, M));
  }
  auto plain_dists = [&](const Vec& p) {
    std::vector<double> out(plain.size());
    for (size_t i = 0; i < plain.size(); ++i)
      out[i] = dist_to_prepared(M, p, plain[i], nullptr);
    return out;
  };

  // d_thr = 0 disables the pivot machinery entirely: the computation then
  // degenerates to the robust recursion, arithmetic included
  const double d_i = std::min(d_u, cfg.d_thr);
  TimeWindows Tset =
      cfg.d_thr > 0.0
          ? proximal_time_set(xi, plain, M, seg.t0, seg.t_end, d_i,
                              cfg.time_grid_dt, cfg.event_tol)
          : TimeWindows::empty();
  TimeWindows union_raw;  // all pivot windows, pre-disjointification
  double d_prev = kInf;
  int pivot_count = 0;

  while (!Tset.is_empty() && pivot_count < 64) {
    SupArgmin sup = sup_argmin_guard_dist(xi, Tset, prep.guards, M, seg.t0,
                                          cfg.time_grid_dt, cfg.event_tol,
                                          cfg.dist_tol);
    if (!sup.found) break;
    if (d_prev <= sup.value) break;  // previous pivot already dominates
    const double t_k = sup.t;

    // proximal guards at the pivot (plain distances)
    const Vec p_k = xi(t_k);
    std::vector<double> pd = plain_dists(p_k);
    std::vector<BranchData> branches;
    for (size_t gi = 0; gi < plain.size(); ++gi) {
      if (pd[gi] > d_i) continue;
      const int ei = guard_events[gi];
      const EventDef& e = ctx.H.events[ei];
      BranchData b;
      b.event_index = ei;
      if (triggered && ei == seg.exit->event_index &&
          std::abs(t_k - seg.t_end) <= 10.0 * cfg.event_tol) {
        b.y = seg.exit->exit_point;
        b.node = node->chain;
        b.reused_chain = true;
      } else {
        Vec w;
        dist_to_prepared(M, p_k, plain[gi], &w);
        b.y = w;
        b.node = compute_node(ctx, e.target, e.reset.apply(b.y), t_k, depth + 1);
      }
      b.ball.R = e.reset.R;
      b.ball.s = e.reset.s;
      b.ball.M = ctx.metrics.at(e.target).M;
      b.ball.c = b.node->entry_state;
      b.ball.radius = b.node->gamma_safe;
      b.margin = branch_margin(M, e, ctx.metrics.at(e.target),
                               b.node->gamma_safe, cfg.radius_cap);
      branches.push_back(std::move(b));
    }
    if (branches.empty()) {
      Tset = Tset.subtract(TimeWindows(t_k - 0.5 * cfg.time_grid_dt,
                                       t_k + 0.5 * cfg.time_grid_dt));
      continue;
    }

    // window condition at time tau (both Alg. 2 bullets)
    auto cond = [&](double tau) {
      const Vec p = xi(tau);
      std::vector<double> d = plain_dists(p);
      for (size_t gi = 0; gi < plain.size(); ++gi) {
        if (d[gi] > d_i) continue;  // not proximal at tau
        const BranchData* b = nullptr;
        for (const auto& cb : branches)
          if (cb.event_index == guard_events[gi]) b = &cb;
        if (b == nullptr) return false;  // G_c^tau not within G_c^(k)
        if (b->ball.radius <= 0.0) return false;
        Vec y_tau;
        dist_to_prepared(M, p, plain[gi], &y_tau);
        if (!(b->ball.q(y_tau) < b->ball.radius * b->ball.radius)) return false;
        if (phi(M, y_tau, b->y) > cfg.alpha * b->margin) return false;
      }
      return true;
    };

    double lead = 0.0, lag = 0.0;
    const bool pivot_cond_ok = cond(t_k);
    if (pivot_cond_ok) {
      const double lead_cap = std::min(cfg.tau_maxlead, t_k - seg.t0);
      const double lag_cap = std::min(cfg.tau_maxlag,
                                      seg.t_end + cfg.tau_maxlag - t_k);
      for (long j = 1;; ++j) {
        double cand = static_cast<double>(j) * cfg.time_grid_dt;
        bool at_cap = false;
        if (cand >= lead_cap) {
          cand = lead_cap;
          at_cap = true;
        }
        if (cand < 0.0 || !cond(t_k - cand)) break;
        lead = cand;
        if (at_cap) break;
      }
      for (long j = 1;; ++j) {
        double cand = static_cast<double>(j) * cfg.time_grid_dt;
        bool at_cap = false;
        if (cand >= lag_cap) {
          cand = lag_cap;
          at_cap = true;
        }
        if (!cond(t_k + cand)) break;
        lag = cand;
        if (at_cap) break;
      }
    }

    TimeWindows raw(t_k - lead, t_k + lag);
    TimeWindows T_k = raw.subtract(union_raw);

    // avoided set for this window: baseline plus the branch balls carved out;
    // a pivot whose window conditions fail even at t_k gets no allowed part
    std::vector<PreparedComponent> carved = prep.guards;
    if (pivot_cond_ok)
      for (auto& pc : carved)
        for (const auto& b : branches)
          if (b.event_index == pc.comp.id && b.ball.radius > 0.0)
            pc.comp.holes.push_back(b.ball);
    auto [d_k, bott_k] = min_over_components(xi, T_k, carved, M, opts);

    Pivot pv;
    pv.index = ++pivot_count;
    pv.t_pivot = t_k;
    pv.tau_lead = lead;
    pv.tau_lag = lag;
    pv.window = T_k;
    pv.d_k = d_k;
    for (auto& b : branches)
      pv.branches.push_back(PivotBranch{b.event_index, b.y, b.margin, b.node,
                                        b.reused_chain});
    node->pivots.push_back(std::move(pv));

    union_raw.add(t_k - lead, t_k + lag);
    d_prev = d_k;
    Tset = Tset.subtract(raw);
    if (lead == 0.0 && lag == 0.0)
      Tset = Tset.subtract(TimeWindows(t_k - 0.5 * cfg.time_grid_dt,
                                       t_k + 0.5 * cfg.time_grid_dt));
  }

  TimeWindows ring = win_full.subtract(union_raw);
  auto [d_g, bott_g] = min_over_components(xi, ring, prep.guards, M, opts);
  node->d_g_windowed = d_g;

  double gamma = std::min(d_u, d_g);
  for (const auto& pv : node->pivots) gamma = std::min(gamma, pv.d_k);
  if (!std::isfinite(gamma)) gamma = cfg.radius_cap;

  if (triggered) {
    PreparedComponent inv_pc = prepare_component(
        AvoidedComponent{AvoidedComponent::Kind::Unsafe, -1,
                         ctx.H.locations[loc].invariant,
                         {},
                         std::nullopt},
        M);
    ShrinkResult sr = shrinking(gamma, seg, prep, inv_pc, union_raw, qbf, cfg);
    node->gamma_safe = sr.radius;
    node->shrink_tau_lag = sr.tau_lag;
  } else {
    node->gamma_safe = gamma;
  }
  return node;
}

}  // namespace

SafeResult safe_neighborhood(const HybridAutomaton& H, const Metrics& metrics,
                             const VerificationConfig& cfg, int loc,
                             const Eigen::Ref<const Vec>& x0, double t0,
                             double t_end) {
  NodeContext ctx{H, metrics, cfg, t_end, {}};
  SafeResult out;
  out.root = compute_node(ctx, loc, x0, t0, 0);
  out.neighborhood = Neighborhood{loc, x0, out.root->gamma_safe, loc,
                                  Neighborhood::Kind::Safe};
  for (const SafeNode* n = out.root.get(); n != nullptr; n = n->chain.get()) {
    out.radii_chain_safe.push_back(n->gamma_safe);
    out.radii_chain_robust.push_back(n->gamma_robust);
  }
  out.valid = true;
  return out;
}

Neighborhood safe_neighborhood_basic(const HybridAutomaton& H,
                                     const Metrics& metrics,
                                     const VerificationConfig& cfg, int loc,
                                     const Eigen::Ref<const Vec>& x0, double t0,
                                     double t_end) {
  const auto guards = H.events_from(loc);
  if (guards.size() != 1)
    throw ModelError("safe_neighborhood_basic",
                     "source location must have exactly one guard; use the "
                     "general case");
  const EventDef& e = H.events[guards[0]];
  if (!H.events_from(e.target).empty())
    throw ModelError("safe_neighborhood_basic",
                     "target location must have no guards; use the general case");
  if (!H.unsafe_in(loc).empty())
    throw ModelError("safe_neighborhood_basic",
                     "source location must have no unsafe set; use the general "
                     "case");

  const auto& qbf = metrics.at(loc);
  const auto& qbf_next = metrics.at(e.target);
  HybridTrajectory traj = simulate(H, loc, x0, t0, t_end, cfg);
  if (!traj.events.empty() || traj.status != TerminalStatus::HorizonReached)
    throw ModelError("safe_neighborhood_basic",
                     "nominal trajectory must stay in the source location");
  const TrajectorySegment& seg = traj.segments.front();
  MinimizeOpts opts{seg.t0, cfg.time_grid_dt, cfg.event_tol,
                    cfg.parallel ? Exec::Parallel : Exec::Serial};

  AvoidedComponent guard_comp;
  guard_comp.kind = AvoidedComponent::Kind::Guard;
  guard_comp.id = guards[0];
  guard_comp.set = e.guard;
  const auto& inv = H.locations[loc].invariant;
  guard_comp.facet =
      std::make_pair(Vec(inv.H.row(e.facet).transpose()), inv.h(e.facet));
  PreparedComponent plain = prepare_component(guard_comp, qbf.M);

  auto full = min_dist_over_window(seg.evaluator(), TimeWindows(t0, t_end), plain,
                                   qbf.M, opts);
  double gamma = 0.0;
  if (full.value <= cfg.d_thr && full.witness_point) {
    const double t_star = *full.witness_time;
    const Vec y_star = *full.witness_point;
    const Vec reset0 = e.reset.apply(y_star);
    HybridTrajectory branch = simulate(H, e.target, reset0, t_star, t_end, cfg);
    double gamma_p = cfg.radius_cap;
    if (branch.status == TerminalStatus::UnsafeHit) {
      gamma_p = 0.0;
    } else if (branch.status == TerminalStatus::HorizonReached) {
      AvoidedSet unsafe_next = build_avoided_set(H, e.target, true, std::nullopt);
      PreparedAvoided prep_next = prepare_avoided(unsafe_next, qbf_next.M);
      MinimizeOpts bopts{t_star, cfg.time_grid_dt, cfg.event_tol, opts.exec};
      auto [du, rec] =
          min_over_components(branch.segments.front().evaluator(),
                              TimeWindows(t_star, t_end), prep_next.unsafe,
                              qbf_next.M, bopts);
      gamma_p = std::min(du, cfg.radius_cap);
    } else {
      gamma_p = 0.0;
    }

    PreparedComponent carved = plain;
    if (gamma_p > 0.0)
      carved.comp.holes.push_back(
          EllipsoidHole{e.reset.R, e.reset.s, qbf_next.M, reset0, gamma_p});
    TimeWindows delta(t_star - cfg.tau_maxlead, t_star + cfg.tau_maxlag);
    delta = delta.intersect(t0, t_end);
    TimeWindows outside = TimeWindows(t0, t_end).subtract(delta);
    auto r_out = min_dist_over_window(seg.evaluator(), outside, plain, qbf.M, opts);
    auto r_in = min_dist_over_window(seg.evaluator(), delta, carved, qbf.M, opts);
    gamma = std::min(r_out.value, r_in.value);
  } else {
    gamma = full.value;
  }
  if (!std::isfinite(gamma)) gamma = cfg.radius_cap;
  return Neighborhood{loc, x0, gamma, loc, Neighborhood::Kind::Safe};
}

namespace {

std::shared_ptr<EventTreeNode> build_tree_node(const SafeNode* n) {
  auto tn = std::make_shared<EventTreeNode>();
  tn->location = n->location;
  tn->entry_state = n->entry_state;
  tn->entry_time = n->entry_time;
  if (n->chain && n->triggered_event) {
    EventTreeNode::Edge edge;
    edge.event_index = *n->triggered_event;
    edge.is_virtual = false;
    edge.time = n->seg_end;
    edge.child = build_tree_node(n->chain.get());
    tn->edges.push_back(std::move(edge));
  }
  for (const auto& pv : n->pivots)
    for (const auto& b : pv.branches) {
      if (b.reused_chain) continue;
      EventTreeNode::Edge edge;
      edge.event_index = b.event_index;
      edge.is_virtual = true;
      edge.time = pv.t_pivot;
      edge.child = build_tree_node(b.node.get());
      tn->edges.push_back(std::move(edge));
    }
  return tn;
}

bool match_prefix(const EventTreeNode& node,
                  const std::vector<EventOccurrence>& events, size_t idx,
                  double maxlead, double maxlag, double tol) {
  if (idx == events.size()) return true;
  for (const auto& edge : node.edges) {
    if (edge.event_index != events[idx].event_index) continue;
    const double dev = events[idx].time - edge.time;
    if (dev < -maxlead - tol || dev > maxlag + tol) continue;
    if (match_prefix(*edge.child, events, idx + 1, maxlead, maxlag, tol))
      return true;
  }
  return false;
}

}  // namespace

EventTreeNode build_event_tree(const SafeResult& result) {
  return *build_tree_node(result.root.get());
}

bool matches_event_tree_prefix(const EventTreeNode& root,
                               const std::vector<EventOccurrence>& events,
                               double maxlead, double maxlag, double tol) {
  return match_prefix(root, events, 0, maxlead, maxlag, tol);
}

namespace {

void collect_branches(const HybridAutomaton& H, const Metrics& metrics,
                      const VerificationConfig& cfg, const HybridTrajectory& traj,
                      int parent, int depth, double t_end,
                      EnlargedReach* out) {
  if (depth > cfg.max_recursion_depth) return;
  for (const auto& seg : traj.segments) {
    const auto& qbf = metrics.at(seg.location);
    for (int ei : H.events_from(seg.location)) {
      AvoidedComponent c;
      c.kind = AvoidedComponent::Kind::Guard;
      c.id = ei;
      c.set = H.events[ei].guard;
      PreparedComponent pc = prepare_component(c, qbf.M);
      // contact clusters: times where the plain guard distance vanishes
      TimeWindows contact =
          proximal_time_set(seg.evaluator(), {pc}, qbf.M, seg.t0, seg.t_end,
                            cfg.dist_tol, cfg.time_grid_dt, cfg.event_tol);
      for (const auto& [a, b] : contact.intervals()) {
        const double t_star = a;
        const bool is_trigger = seg.exit && seg.exit->event_index == ei &&
                                b >= seg.t_end - 10.0 * cfg.event_tol;
        if (is_trigger) continue;  // triggered contact, not a critical state
        Vec x_star = seg.eval(t_star);
        const EventDef& e = H.events[ei];
        EnlargedReach::Branch br;
        br.parent = parent;
        br.via_event = ei;
        br.t_star = t_star;
        br.from_state = x_star;
        br.traj = simulate(H, e.target, e.reset.apply(x_star), t_star, t_end, cfg);
        HybridTrajectory sub = br.traj;  // the vector may grow during recursion
        const int my_index = static_cast<int>(out->branches.size());
        out->branches.push_back(std::move(br));
        collect_branches(H, metrics, cfg, sub, my_index, depth + 1, t_end, out);
      }
    }
  }
}

}  // namespace

EnlargedReach enlarged_reach(const HybridAutomaton& H, const Metrics& metrics,
                             const VerificationConfig& cfg, int loc,
                             const Eigen::Ref<const Vec>& x0, double t0,
                             double t_end) {
  EnlargedReach out;
  out.root = simulate(H, loc, x0, t0, t_end, cfg);
  collect_branches(H, metrics, cfg, out.root, -1, 0, t_end, &out);
  return out;
}

}  // namespace safehood
