#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include "safehood/bisim.hpp"
#include "safehood/model.hpp"

namespace safehood {

/// Exact affine flow x(dt) = e^{A dt} x0 + int_0^dt e^{A(dt-s)} b ds,
/// computed through the exponential of the augmented (n+1) matrix.
Vec flow(const Location& loc, const Eigen::Ref<const Vec>& x0, double dt);

/// True iff the flow strictly exits the invariant across the given facet at
/// x: facet-normal . (A x + b) > 0. Implements membership in the outward
/// boundary; tangential or inward flow yields false.
bool outward_flow_check(const Location& loc, int facet, const Eigen::Ref<const Vec>& x);

struct ExitRecord {
  int event_index = -1;
  Vec exit_point;
  double exit_time = 0.0;
};

struct TrajectorySegment {
  int location = -1;
  Vec x0;
  double t0 = 0.0;
  double t_end = 0.0;
  std::vector<double> ts;  // dense output grid, t0 .. t_end inclusive
  std::vector<Vec> xs;
  std::optional<ExitRecord> exit;
  bool invariant_checks = true;  // false for lag extensions past t_end

  // closed-form evaluation; valid for any t >= t0, including past t_end
  Vec eval(double t) const;
  TrajFn evaluator() const {
    return [this](double t) { return eval(t); };
  }

  // set by simulate
  Mat A_;
  Vec b_;
};

enum class TerminalStatus { HorizonReached, Blocked, UnsafeHit };

struct EventOccurrence {
  int event_index = -1;
  Vec trigger_state;
  Vec reset_state;
  double time = 0.0;
};

struct HybridTrajectory {
  std::vector<TrajectorySegment> segments;
  std::vector<EventOccurrence> events;
  TerminalStatus status = TerminalStatus::HorizonReached;
  bool truncated = false;  // stopped early by a segment cap, not by the model
  std::vector<Diagnostic> diagnostics;
  std::optional<double> unsafe_entry_time;
  int unsafe_set_index = -1;

  std::vector<int> event_sequence() const {
    std::vector<int> out;
    for (const auto& e : events) out.push_back(e.event_index);
    return out;
  }
};

struct SimulateOpts {
  int max_segments = -1;  // < 0: unbounded (up to cfg.max_events)
};

/// Advances the flow from (loc0, x0) over [t0, t_end], localizing outward
/// invariant crossings by bisection to event_tol and applying guard resets.
/// Terminal status records falsification (unsafe-hit) and modeling errors
/// (blocked: no guard at an outward crossing, reset outside the target
/// invariant, or the Zeno event cap).
HybridTrajectory simulate(const HybridAutomaton& H, int loc0,
                          const Eigen::Ref<const Vec>& x0, double t0, double t_end,
                          const VerificationConfig& cfg,
                          const SimulateOpts& opts = {});

/// Continuation of the segment's flow past t_end with invariant checks
/// disabled; the extension may leave Inv(location).
TrajectorySegment extend_segment(const TrajectorySegment& seg, double tau,
                                 double dt);

/// CSV dump: segment_index, location, t, x1..xn, event flag column.
void write_trajectory_csv(std::ostream& os, const HybridAutomaton& H,
                          const HybridTrajectory& traj);

inline DistanceResult min_dist_over_window(const TrajectorySegment& seg,
                                           const TimeWindows& windows,
                                           const PreparedComponent& target,
                                           const Mat& M, const MinimizeOpts& opts) {
  return min_dist_over_window(seg.evaluator(), windows, target, M, opts);
}

}  // namespace safehood
