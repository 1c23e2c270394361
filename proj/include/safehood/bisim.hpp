#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "safehood/geometry.hpp"
#include "safehood/model.hpp"
#include "safehood/parallel.hpp"
#include "safehood/time_windows.hpp"

namespace safehood {

/// Per-location pseudo-metric phi(x, y) = sqrt((x-y)^T M (x-y)) that is
/// non-increasing along any pair of solutions of the location dynamics.
struct QuadraticBisimFunction {
  int location = -1;
  Mat M;

  double phi(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& y) const {
    Vec d = x - y;
    return std::sqrt(std::max(0.0, d.dot(M * d)));
  }
};

double phi(const Mat& M, const Eigen::Ref<const Vec>& x,
           const Eigen::Ref<const Vec>& y);

/// Solves A^T M + M A = -Q for symmetric positive definite M via the
/// Kronecker-vectorized dense system. Requires A Hurwitz.
/// Throws ModelError("lyapunov", ...) otherwise.
Mat solve_lyapunov(const Mat& A, const Mat& Q);

/// True iff M is symmetric positive definite and lambda_max(A^T M + M A)
/// does not exceed tol, i.e. M induces a valid bisimulation function.
bool check_bisimulation(const Mat& M, const Mat& A, double tol = 1e-9);

struct Metrics {
  std::vector<QuadraticBisimFunction> per_location;
  const QuadraticBisimFunction& at(int loc) const { return per_location.at(loc); }
};

/// Default metric per location: the user override when present, else
/// solve_lyapunov(A, I). Throws when a location is not Hurwitz and carries no
/// override ("supply M manually").
Metrics build_metrics(const HybridAutomaton& H);

struct DistanceResult {
  double value = kInf;
  std::optional<double> witness_time;
  std::optional<Vec> witness_point;
};

/// Exact minimizer of the convex quadratic (p-y)^T M (p-y) over {Hy <= h}.
/// Empty polytope yields +inf with no witness.
DistanceResult dist_point_to_polytope(const Mat& M, const Eigen::Ref<const Vec>& p,
                                      const Polytope& P);

/// Continuous state evaluator t -> x(t).
using TrajFn = std::function<Vec(double)>;

/// Prepared avoided-set component: geometry plus its precompiled projector.
struct PreparedComponent {
  AvoidedComponent comp;
  std::shared_ptr<PolytopeProjector> proj;
};
PreparedComponent prepare_component(const AvoidedComponent& comp, const Mat& M);

double dist_to_prepared(const Mat& M, const Eigen::Ref<const Vec>& p,
                        const PreparedComponent& pc, Vec* witness = nullptr);

struct MinimizeOpts {
  double anchor = 0.0;       // grid lattice origin (segment start time)
  double dt = 1e-3;          // dense-output grid step
  double refine_tol = 1e-9;  // golden-section bracket width target
  Exec exec = Exec::Serial;
};

/// Global minimum of t -> dist(xi(t), component) over a union of closed time
/// intervals: dense-grid sweep plus golden-section refinement of every local
/// bracket. Returns +inf for empty windows or an empty component.
DistanceResult min_dist_over_window(const TrajFn& xi, const TimeWindows& windows,
                                    const PreparedComponent& target, const Mat& M,
                                    const MinimizeOpts& opts);

}  // namespace safehood
