#pragma once

#include <optional>

#include "safehood/simulate.hpp"

namespace safehood {

struct Neighborhood {
  enum class Kind { Robust, Safe };
  int location = -1;
  Vec center;
  double radius = 0.0;
  int metric_location = -1;  // phi^l the radius is measured in
  Kind kind = Kind::Robust;
};

/// Allowed part of a guard: the subset mapping into the next location's
/// neighborhood, g intersected with the reset-preimage of the ball. Carried
/// symbolically as the guard polytope plus one quadratic constraint.
struct AllowedGuardPart {
  int event_index = -1;
  Polytope guard;
  Vec facet_normal;       // hyperplane carrying the guard
  double facet_offset = 0.0;
  EllipsoidHole ball;  // allowed = {y in guard | ball.q(y) < ball.radius^2}

  bool trivially_empty() const { return ball.radius <= 0.0; }
};

AllowedGuardPart allowed_guard_part(const HybridAutomaton& H, int event_index,
                                    const Neighborhood& next,
                                    const Metrics& metrics);

/// Smallest q over the guard; the allowed part is empty iff this is at least
/// ball.radius^2. Exact in the plane; multi-start estimate otherwise.
double min_q_over_guard(const AllowedGuardPart& part);

/// Avoided set of one location: unsafe pieces plus active-guard pieces with
/// allowed parts carved out.
struct AvoidedSet {
  int location = -1;
  std::vector<AvoidedComponent> components;
  std::vector<AllowedGuardPart> allowed;
};

AvoidedSet build_avoided_set(
    const HybridAutomaton& H, int loc, bool last_location,
    const std::optional<AllowedGuardPart>& triggered_carve);

struct BottleneckRecord {
  enum class Kind { None, Unsafe, Guard };
  Kind kind = Kind::None;
  int component_id = -1;  // unsafe index or event index
  double t = 0.0;
  std::optional<Vec> witness;
  double value = kInf;
};

struct PreparedAvoided {
  std::vector<PreparedComponent> unsafe;
  std::vector<PreparedComponent> guards;
};
PreparedAvoided prepare_avoided(const AvoidedSet& avoided, const Mat& M);

/// Unsafe- and guard-distance minima over (possibly distinct) time windows.
/// Shared by the robust and safe paths so that the degenerate safe case is
/// arithmetically identical to the robust one.
struct GammaBase {
  double d_u = kInf;
  double d_g = kInf;
  BottleneckRecord bottleneck_u, bottleneck_g;
};
GammaBase gamma_base(const TrajFn& xi, const TimeWindows& unsafe_win,
                     const TimeWindows& guard_win, const PreparedAvoided& prep,
                     const Mat& M, const MinimizeOpts& opts);

std::pair<double, BottleneckRecord> min_over_components(
    const TrajFn& xi, const TimeWindows& win,
    const std::vector<PreparedComponent>& comps, const Mat& M,
    const MinimizeOpts& opts);

/// Raw radius: infimum of the avoided-set distance over the segment span.
/// An empty avoided set yields the configured radius cap.
std::pair<double, BottleneckRecord> robust_radius_raw(
    const TrajectorySegment& seg, const AvoidedSet& avoided,
    const QuadraticBisimFunction& qbf, const VerificationConfig& cfg);

struct ShrinkResult {
  double radius = 0.0;
  double tau_lag = 0.0;
  double gamma_tilde_at_lag = 0.0;  // min(gamma_in, unsafe/guard envelopes)
};

/// Event-time-lag compensation: shrinks gamma so that every trajectory in the
/// ball leaves the invariant before t_end + tau_lag while still avoiding the
/// avoided set. Guard distances skip `excluded` (pivot windows); unsafe
/// distances never do. `invariant` is the prepared invariant polytope of the
/// segment's location.
ShrinkResult shrinking(double gamma, const TrajectorySegment& seg,
                       const PreparedAvoided& prep,
                       const PreparedComponent& invariant,
                       const TimeWindows& excluded,
                       const QuadraticBisimFunction& qbf,
                       const VerificationConfig& cfg);

/// Everything the recursion needs from one segment: the shrunk radius, the
/// raw infimum, and the pieces used for classification. The safe path reuses
/// this so its degenerate case reproduces the robust numbers exactly.
struct SegmentCertificate {
  double gamma = 0.0;      // after shrinking (identity for the last location)
  double gamma_raw = 0.0;  // min(d_u, d_g) before shrinking, capped
  double d_u = kInf;
  double d_g = kInf;
  BottleneckRecord bottleneck;
  double tau_lag = 0.0;
};

SegmentCertificate robust_segment_certificate(
    const HybridAutomaton& H, const TrajectorySegment& seg,
    const QuadraticBisimFunction& qbf, const VerificationConfig& cfg,
    const std::optional<AllowedGuardPart>& triggered_carve, bool last_location);

struct RobustResult {
  std::vector<Neighborhood> neighborhoods;  // one per segment, index-aligned
  std::vector<BottleneckRecord> bottlenecks;
  std::vector<double> tau_lags;
  std::vector<double> unsafe_min_dist;  // per segment, for classification
  double tau_maxlead = 0.0;
  double tau_maxlag = 0.0;
  bool valid = false;  // false when the trajectory did not reach the horizon
};

/// Recursive robust-neighborhood computation, last location to first. The
/// first entry is the certificate around the simulated initial state.
RobustResult robust_neighborhood(const HybridAutomaton& H,
                                 const HybridTrajectory& traj,
                                 const Metrics& metrics,
                                 const VerificationConfig& cfg);

struct CriticalityClass {
  enum class Kind { Noncritical, GuardCritical, UnsafeCritical };
  Kind kind = Kind::Noncritical;
  BottleneckRecord bottleneck;
};

CriticalityClass classify_trajectory(const HybridTrajectory& traj,
                                     const RobustResult& result,
                                     const VerificationConfig& cfg);

}  // namespace safehood
