#pragma once

#include <random>
#include <string>

#include "safehood/safe.hpp"

namespace safehood {

enum class VerifyMode { Robust, Safe };

struct SampleRecord {
  Vec state;  // box center
  Vec box_lo, box_hi;
  int depth = 0;
  Neighborhood nbhd;
  CriticalityClass crit;
  bool covered = false;
};

struct CoverageReport {
  VerifyMode mode = VerifyMode::Robust;
  enum class Verdict { VerifiedSafe, Falsified, Inconclusive };
  Verdict verdict = Verdict::Inconclusive;
  double covered_fraction = 0.0;
  std::vector<SampleRecord> samples;
  std::optional<HybridTrajectory> counterexample;
  long simulations = 0;
  double wall_ms = 0.0;  // excluded from the reproducible report body
  int depth_reached = 0;
};

/// Resolves the deferred configuration fields: d_thr defaults to 0.2 times
/// the phi-diameter of the initial set when unset.
VerificationConfig resolve_config(const HybridAutomaton& H, const Metrics& metrics);

/// Verifies a compact initial box by recursive subdivision: the box is covered
/// iff the ball around its center contains every corner in the phi-metric.
/// Any root simulation entering the unsafe set falsifies. Point-shaped initial
/// sets are verified by a single sample.
CoverageReport cover_initial_set(const HybridAutomaton& H, const Metrics& metrics,
                                 const VerificationConfig& cfg, VerifyMode mode);

/// Counterexample extraction: the trajectory itself when some sample lies in
/// an unsafe polytope of its location, with the entry time refined.
std::optional<HybridTrajectory> falsify_check(const HybridTrajectory& traj);

/// JSON report (reproducible byte-for-byte: wall time is not included) and
/// the neighborhood dump used for plotting.
std::string report_to_json(const HybridAutomaton& H, const CoverageReport& report);
void write_neighborhood_csv(std::ostream& os, const HybridAutomaton& H,
                            const CoverageReport& report);

/// Uniform sample inside the open phi-ball.
Vec sample_in_ball(const Neighborhood& nbhd, const Mat& M, std::mt19937_64& rng);

/// Sampled soundness checks behind the robust and safe guarantees.
struct PropCheckStats {
  int n = 0;
  int seq_ok = 0;       // event sequence matched (robust) / tree prefix (safe)
  int time_ok = 0;      // event-time deviations within [-maxlead, +maxlag]
  int unsafe_hits = 0;
  int outside_invariant = 0;
};

PropCheckStats check_robust_samples(const HybridAutomaton& H, const Metrics& metrics,
                                    const VerificationConfig& cfg,
                                    const HybridTrajectory& nominal,
                                    const Neighborhood& nbhd, int n,
                                    unsigned long seed);

PropCheckStats check_safe_samples(const HybridAutomaton& H, const Metrics& metrics,
                                  const VerificationConfig& cfg,
                                  const SafeResult& result, int n,
                                  unsigned long seed);

}  // namespace safehood
