#pragma once

#include <memory>

#include "safehood/robust.hpp"

namespace safehood {

struct SafeNode;

/// One branch hanging off a pivot: the guard, the proximal state on its
/// closure, the recursively certified neighborhood after the (virtual) event,
/// and the depth of that neighborhood's reset-preimage around the proximal
/// state (the alpha-condition margin).
struct PivotBranch {
  int event_index = -1;
  Vec proximal_state;
  double margin = 0.0;
  std::shared_ptr<SafeNode> node;
  bool reused_chain = false;  // the triggered continuation, not a re-simulation
};

struct Pivot {
  int index = 0;  // k, 1-based
  double t_pivot = 0.0;
  double tau_lead = 0.0;
  double tau_lag = 0.0;
  TimeWindows window;  // [t-lead, t+lag] minus earlier pivot windows
  std::vector<PivotBranch> branches;
  double d_k = kInf;  // guard distance over the window with allowed parts carved
};

/// One recursion node: the certificate for the trajectory from entry_state at
/// entry_time to the global horizon. The triggered continuation and every
/// virtual-event branch are child nodes.
struct SafeNode {
  int location = -1;
  Vec entry_state;
  double entry_time = 0.0;
  double seg_end = 0.0;  // end of this node's first segment
  std::optional<int> triggered_event;
  std::shared_ptr<SafeNode> chain;
  std::vector<Pivot> pivots;
  double gamma_safe = 0.0;
  double gamma_robust = 0.0;
  SegmentCertificate robust_cert;  // embedded baseline, same arithmetic as robust
  double d_u = kInf;
  double d_g_windowed = kInf;  // guard distance outside the pivot windows
  double shrink_tau_lag = 0.0;
  HybridTrajectory sim;  // this node's first segment (+ triggering event)
  int depth = 0;
  std::vector<Diagnostic> diagnostics;
};

struct SafeResult {
  std::shared_ptr<SafeNode> root;
  Neighborhood neighborhood;  // safe ball around the queried initial state
  std::vector<double> radii_chain_safe;    // along the triggered chain
  std::vector<double> radii_chain_robust;  // embedded robust values, aligned
  bool valid = false;
};

/// Guards whose plain distance from xi(tau) does not exceed d.
std::vector<int> proximal_guards(const HybridAutomaton& H, int loc,
                                 const TrajFn& xi, double tau, double d,
                                 const QuadraticBisimFunction& qbf);

/// The state on cl(guard) closest to p in the location metric. Unique for a
/// positive-definite metric over a convex guard.
Vec proximal_state(const Eigen::Ref<const Vec>& p, const EventDef& event,
                   const QuadraticBisimFunction& qbf);

/// General safe-neighborhood computation. Simulates from (loc, x0), treats
/// the triggered event and every sufficiently close guard through the same
/// pivot mechanism, recurses on branch trajectories, and shrinks for event
/// time lag. The returned ball is a superset of the robust one.
SafeResult safe_neighborhood(const HybridAutomaton& H, const Metrics& metrics,
                             const VerificationConfig& cfg, int loc,
                             const Eigen::Ref<const Vec>& x0, double t0,
                             double t_end);

/// Single-guard basic case, implemented literally: one proximal pass, one
/// branch, one window split. Refuses structures it does not cover.
Neighborhood safe_neighborhood_basic(const HybridAutomaton& H,
                                     const Metrics& metrics,
                                     const VerificationConfig& cfg, int loc,
                                     const Eigen::Ref<const Vec>& x0, double t0,
                                     double t_end);

struct EventTreeNode {
  int location = -1;
  Vec entry_state;
  double entry_time = 0.0;
  struct Edge {
    int event_index = -1;
    bool is_virtual = false;
    double time = 0.0;  // nominal trigger / pivot time
    std::shared_ptr<EventTreeNode> child;
  };
  std::vector<Edge> edges;
};

EventTreeNode build_event_tree(const SafeResult& result);

/// True iff the event sequence (with times) follows some root path of the
/// tree, allowing per-event deviation in [-maxlead-tol, +maxlag+tol].
bool matches_event_tree_prefix(const EventTreeNode& root,
                               const std::vector<EventOccurrence>& events,
                               double maxlead, double maxlag, double tol);

struct EnlargedReach {
  HybridTrajectory root;
  struct Branch {
    int parent = -1;  // -1: off the root trajectory, else index into branches
    int via_event = -1;
    double t_star = 0.0;
    Vec from_state;
    HybridTrajectory traj;
  };
  std::vector<Branch> branches;
};

/// Root trajectory plus, for every critical state (guard-closure contact that
/// does not trigger), the virtual continuation, recursively and depth-capped.
EnlargedReach enlarged_reach(const HybridAutomaton& H, const Metrics& metrics,
                             const VerificationConfig& cfg, int loc,
                             const Eigen::Ref<const Vec>& x0, double t0,
                             double t_end);

}  // namespace safehood
