#include "safehood/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <unsupported/Eigen/MatrixFunctions>

namespace safehood {

namespace {

Vec affine_flow(const Mat& A, const Vec& b, const Eigen::Ref<const Vec>& x0,
                double dt) {
  const int n = static_cast<int>(A.rows());
  if (dt == 0.0) return x0;
  Mat aug = Mat::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A;
  aug.topRightCorner(n, 1) = b;
  Mat E = (aug * dt).exp();
  return E.topLeftCorner(n, n) * x0 + E.topRightCorner(n, 1);
}

double facet_value(const Polytope& inv, int facet, const Eigen::Ref<const Vec>& x) {
  return inv.H.row(facet).dot(x) - inv.h(facet);
}

double facet_scale(const Polytope& inv, int facet) {
  return 1.0 + inv.H.row(facet).norm() + std::abs(inv.h(facet));
}

}  // namespace

Vec flow(const Location& loc, const Eigen::Ref<const Vec>& x0, double dt) {
  return affine_flow(loc.A, loc.b, x0, dt);
}

bool outward_flow_check(const Location& loc, int facet,
                        const Eigen::Ref<const Vec>& x) {
  const Vec xdot = loc.A * x + loc.b;
  return loc.invariant.H.row(facet).dot(xdot) > 0.0;
}

Vec TrajectorySegment::eval(double t) const {
  return affine_flow(A_, b_, x0, t - t0);
}

namespace {

struct Crossing {
  double time = kInf;
  int facet = -1;
};

// first outward-boundary crossing on [ta, tb]; fa = facet values at ta
Crossing localize_crossings(const Location& loc, const TrajectorySegment& seg,
                            double ta, double tb, const Vec& va, const Vec& vb,
                            double event_tol) {
  Crossing best;
  for (int f = 0; f < loc.invariant.rows(); ++f) {
    const double scale = facet_scale(loc.invariant, f);
    if (vb(f) <= event_tol * scale) continue;      // still inside at tb
    if (va(f) > event_tol * scale) continue;       // was already out (handled before)
    double lo = ta, hi = tb;
    while (hi - lo > event_tol) {
      const double mid = 0.5 * (lo + hi);
      if (facet_value(loc.invariant, f, seg.eval(mid)) > 0.0)
        hi = mid;
      else
        lo = mid;
    }
    const double tc = hi;  // first instant past the hyperplane
    if (tc < best.time || (tc == best.time && f < best.facet)) {
      best.time = tc;
      best.facet = f;
    }
  }
  return best;
}

}  // namespace

HybridTrajectory simulate(const HybridAutomaton& H, int loc0,
                          const Eigen::Ref<const Vec>& x0, double t0, double t_end,
                          const VerificationConfig& cfg, const SimulateOpts& opts) {
  HybridTrajectory traj;
  const double dt = cfg.time_grid_dt;
  int loc_i = loc0;
  Vec x = x0;
  double t = t0;

  if (!H.locations[loc_i].invariant.contains(x, cfg.event_tol)) {
    traj.status = TerminalStatus::Blocked;
    traj.diagnostics.push_back(
        {"initial-outside-invariant",
         "initial state violates Inv(" + H.locations[loc_i].id + ")"});
    return traj;
  }

  while (true) {
    const Location& loc = H.locations[loc_i];
    TrajectorySegment seg;
    seg.location = loc_i;
    seg.x0 = x;
    seg.t0 = t;
    seg.A_ = loc.A;
    seg.b_ = loc.b;
    const auto events_here = H.events_from(loc_i);
    const auto unsafe_here = H.unsafe_in(loc_i);

    if (t >= t_end) {
      seg.ts.push_back(t);
      seg.xs.push_back(x);
      seg.t_end = t_end;
      traj.segments.push_back(std::move(seg));
      traj.status = TerminalStatus::HorizonReached;
      return traj;
    }

    auto push_sample = [&](double tk, const Vec& xk) {
      seg.ts.push_back(tk);
      seg.xs.push_back(xk);
    };

    auto unsafe_index_at = [&](const Vec& p) {
      for (int ui : unsafe_here)
        if (H.unsafe[ui].set.max_violation(p) <= cfg.dist_tol) return ui;
      return -1;
    };

    // unsafe entry: refine and terminate the run at the entry point
    auto finish_unsafe = [&](double t_prev, double t_hit, int ui) {
      double lo = t_prev, hi = t_hit;
      if (hi > lo) {
        while (hi - lo > cfg.event_tol) {
          const double mid = 0.5 * (lo + hi);
          if (H.unsafe[ui].set.max_violation(seg.eval(mid)) <= cfg.dist_tol)
            hi = mid;
          else
            lo = mid;
        }
      }
      const Vec entry = seg.eval(hi);
      if (seg.ts.empty() || seg.ts.back() != hi) push_sample(hi, entry);
      seg.t_end = hi;
      traj.unsafe_entry_time = hi;
      traj.unsafe_set_index = ui;
      traj.segments.push_back(std::move(seg));
      traj.status = TerminalStatus::UnsafeHit;
    };

    // immediate outward exit when starting on the boundary
    int start_facet = -1;
    for (int f = 0; f < loc.invariant.rows(); ++f) {
      const double v = facet_value(loc.invariant, f, x);
      if (std::abs(v) <= cfg.event_tol * facet_scale(loc.invariant, f) &&
          outward_flow_check(loc, f, x)) {
        start_facet = f;
        break;
      }
    }

    double tc = kInf;
    int facet_hit = -1;
    if (start_facet >= 0) {
      tc = t;
      facet_hit = start_facet;
      push_sample(t, x);
      if (int ui = unsafe_index_at(x); ui >= 0) {
        finish_unsafe(t, t, ui);
        return traj;
      }
    } else {
      // dense scan
      Vec prev = x;
      double t_prev = t;
      Vec va(loc.invariant.rows());
      for (int f = 0; f < loc.invariant.rows(); ++f)
        va(f) = facet_value(loc.invariant, f, prev);
      push_sample(t_prev, prev);
      if (int ui = unsafe_index_at(prev); ui >= 0) {
        finish_unsafe(t_prev, t_prev, ui);
        return traj;
      }
      long k = 1;
      while (t_prev < t_end) {
        double tk = seg.t0 + static_cast<double>(k) * dt;
        if (tk > t_end) tk = t_end;
        const Vec xk = seg.eval(tk);
        Vec vb(loc.invariant.rows());
        for (int f = 0; f < loc.invariant.rows(); ++f)
          vb(f) = facet_value(loc.invariant, f, xk);
        Crossing c = localize_crossings(loc, seg, t_prev, tk, va, vb, cfg.event_tol);
        if (c.facet >= 0 && c.time <= t_end) {
          tc = c.time;
          facet_hit = c.facet;
          const Vec xc = seg.eval(tc);
          push_sample(tc, xc);
          if (int ui = unsafe_index_at(xc); ui >= 0) {
            finish_unsafe(t_prev, tc, ui);
            return traj;
          }
          break;
        }
        push_sample(tk, xk);
        if (int ui = unsafe_index_at(xk); ui >= 0) {
          finish_unsafe(t_prev, tk, ui);
          return traj;
        }
        t_prev = tk;
        va = vb;
        ++k;
        if (tk >= t_end) break;
      }
    }

    if (facet_hit < 0) {
      // horizon reached inside the invariant
      seg.t_end = t_end;
      traj.segments.push_back(std::move(seg));
      traj.status = TerminalStatus::HorizonReached;
      return traj;
    }

    const Vec xc = seg.xs.back();
    const double inner =
        loc.invariant.H.row(facet_hit).dot(loc.A * xc + loc.b);
    if (std::abs(inner) <= cfg.event_tol)
      traj.diagnostics.push_back(
          {"grazing", "near-tangential boundary contact at t=" + std::to_string(tc)});
    if (inner <= 0.0) {
      // sign change without strict outward flow; treat as blocked contact
      seg.t_end = tc;
      traj.segments.push_back(std::move(seg));
      traj.status = TerminalStatus::Blocked;
      traj.diagnostics.push_back(
          {"non-outward-crossing",
           "boundary reached without strictly outward flow at t=" + std::to_string(tc)});
      return traj;
    }

    // find the guard on this facet containing the crossing point
    int hit_event = -1;
    for (int ei : events_here) {
      const EventDef& e = H.events[ei];
      if (e.facet != facet_hit) continue;
      if (e.guard.contains(xc, cfg.event_tol)) {
        if (hit_event >= 0) {
          traj.diagnostics.push_back(
              {"guard-overlap", "crossing point lies in multiple guards; taking " +
                                    H.events[hit_event].id});
          break;
        }
        hit_event = ei;
      }
    }
    if (hit_event < 0) {
      seg.t_end = tc;
      traj.segments.push_back(std::move(seg));
      traj.status = TerminalStatus::Blocked;
      traj.diagnostics.push_back(
          {"assumption-2-state",
           "outward boundary state lies in no guard (t=" + std::to_string(tc) + ")"});
      return traj;
    }

    const EventDef& ev = H.events[hit_event];
    Vec x_next = ev.reset.apply(xc);
    seg.t_end = tc;
    seg.exit = ExitRecord{hit_event, xc, tc};
    traj.segments.push_back(std::move(seg));
    traj.events.push_back({hit_event, xc, x_next, tc});

    if (!H.locations[ev.target].invariant.contains(x_next, cfg.event_tol)) {
      traj.status = TerminalStatus::Blocked;
      traj.diagnostics.push_back(
          {"reset-outside-invariant",
           "reset of " + ev.id + " lands outside Inv(" + H.locations[ev.target].id +
               ")"});
      return traj;
    }
    if (static_cast<long>(traj.events.size()) >= cfg.max_events) {
      traj.status = TerminalStatus::Blocked;
      traj.diagnostics.push_back({"zeno-cutoff", "event cap reached"});
      return traj;
    }
    if (opts.max_segments > 0 &&
        static_cast<int>(traj.segments.size()) >= opts.max_segments) {
      traj.status = TerminalStatus::HorizonReached;
      traj.truncated = true;
      return traj;
    }

    loc_i = ev.target;
    x = std::move(x_next);
    t = tc;
  }
}

TrajectorySegment extend_segment(const TrajectorySegment& seg, double tau, double dt) {
  TrajectorySegment ext;
  ext.location = seg.location;
  ext.t0 = seg.t_end;
  ext.x0 = seg.eval(seg.t_end);
  ext.t_end = seg.t_end + tau;
  ext.A_ = seg.A_;
  ext.b_ = seg.b_;
  ext.invariant_checks = false;
  if (tau <= 0.0) return ext;
  long k = 0;
  while (true) {
    double tk = ext.t0 + static_cast<double>(k) * dt;
    if (tk >= ext.t_end) tk = ext.t_end;
    ext.ts.push_back(tk);
    ext.xs.push_back(ext.eval(tk));
    if (tk >= ext.t_end) break;
    ++k;
  }
  return ext;
}

void write_trajectory_csv(std::ostream& os, const HybridAutomaton& H,
                          const HybridTrajectory& traj) {
  os << "segment_index,location,t";
  for (int i = 1; i <= H.dim; ++i) os << ",x" << i;
  os << ",event\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return std::string(buf);
  };
  for (size_t si = 0; si < traj.segments.size(); ++si) {
    const auto& seg = traj.segments[si];
    for (size_t k = 0; k < seg.ts.size(); ++k) {
      os << si << "," << H.locations[seg.location].id << "," << num(seg.ts[k]);
      for (int i = 0; i < H.dim; ++i) os << "," << num(seg.xs[k](i));
      const bool is_exit = seg.exit && k + 1 == seg.ts.size();
      os << "," << (is_exit ? H.events[seg.exit->event_index].id : "") << "\n";
    }
  }
}

}  // namespace safehood
