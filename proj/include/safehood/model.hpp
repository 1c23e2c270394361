#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safehood/geometry.hpp"

namespace safehood {

class ModelError : public std::runtime_error {
 public:
  ModelError(const std::string& locus, const std::string& what)
      : std::runtime_error(locus + ": " + what) {}
};

/// Reset maps are affine (continuous by construction). Any continuous reset
/// family could replace this type behind EventDef without touching the
/// neighborhood algorithms, which only evaluate apply() and preimages of
/// metric balls.
struct AffineMap {
  Mat R;
  Vec s;
  Vec apply(const Eigen::Ref<const Vec>& x) const { return R * x + s; }
};

struct Location {
  std::string id;
  Mat A;
  Vec b;
  Polytope invariant;
  std::optional<Mat> metric_override;  // user-supplied bisimulation matrix
  bool invariant_degenerate = false;   // flagged at load when not full-dimensional
};

struct EventDef {
  std::string id;
  int source = -1;
  int target = -1;
  Polytope guard;
  int facet = -1;  // invariant row whose hyperplane carries the guard
  AffineMap reset;
};

struct UnsafeSet {
  int location = -1;
  Polytope set;
};

struct InitialSpec {
  int location = -1;
  bool is_box = false;
  Vec point;    // when !is_box
  Vec lo, hi;   // when is_box
};

struct VerificationConfig {
  double d_thr = -1.0;  // < 0: resolved to 0.2 * phi-diameter of the initial set
  double tau_maxlead = 0.1;
  double tau_maxlag = 0.1;
  double alpha = 0.9;
  double t_end = 1.0;
  double event_tol = 1e-9;
  double dist_tol = 1e-9;
  double time_grid_dt = 1e-3;
  int max_recursion_depth = 8;
  int coverage_max_depth = 6;
  double radius_cap = 1e6;
  long max_events = 10000;
  unsigned long seed = 0;
  bool parallel = true;

  void validate() const;  // throws ModelError on out-of-range values
};

struct Diagnostic {
  std::string code;
  std::string message;
};

struct HybridAutomaton {
  int dim = 0;
  std::vector<Location> locations;
  std::vector<EventDef> events;
  std::vector<UnsafeSet> unsafe;
  InitialSpec initial;
  VerificationConfig config;

  int location_index(const std::string& id) const;
  std::vector<int> events_from(int loc) const;
  std::vector<int> unsafe_in(int loc) const;
};

/// Parses the JSON model document. Throws ModelError with a field locus on
/// schema violations, dimension mismatches, or unknown location ids.
HybridAutomaton load_model(const std::string& text);
HybridAutomaton load_model_file(const std::string& path);

/// Inverse of load_model up to formatting; numbers round-trip exactly.
std::string serialize(const HybridAutomaton& H);

/// Checks the standing assumptions: pairwise-disjoint guards per location,
/// guards on their invariant facet hyperplanes, well-posed dynamics (affine,
/// always passes), continuous resets (affine by construction). Returns one
/// diagnostic per violation; empty means all assumptions hold.
std::vector<Diagnostic> validate_assumptions(const HybridAutomaton& H);

}  // namespace safehood
