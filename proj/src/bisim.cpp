#include "safehood/bisim.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace safehood {

double phi(const Mat& M, const Eigen::Ref<const Vec>& x,
           const Eigen::Ref<const Vec>& y) {
  Vec d = x - y;
  return std::sqrt(std::max(0.0, d.dot(M * d)));
}

Mat solve_lyapunov(const Mat& A, const Mat& Q) {
  const int n = static_cast<int>(A.rows());
  Eigen::EigenSolver<Mat> es(A);
  for (int i = 0; i < n; ++i)
    if (es.eigenvalues()(i).real() >= -1e-12)
      throw ModelError("lyapunov",
                       "A is not Hurwitz: no quadratic bisimulation metric "
                       "constructed; supply M manually");
  // vec(A^T M + M A) = (I (x) A^T + A^T (x) I) vec(M)
  Mat K = Mat::Zero(n * n, n * n);
  const Mat At = A.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        K(i + j * n, k + j * n) += At(i, k);   // I (x) A^T
        K(i + j * n, i + k * n) += At(j, k);   // A^T (x) I acting from the right
      }
  Vec q(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) q(i + j * n) = -Q(i, j);
  Vec m = K.fullPivLu().solve(q);
  Mat M(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) M(i, j) = m(i + j * n);
  M = 0.5 * (M + M.transpose()).eval();
  const double resid = (At * M + M * A + Q).norm();
  if (resid > 1e-9 * (1.0 + Q.norm()))
    throw ModelError("lyapunov", "residual too large: " + std::to_string(resid));
  return M;
}

bool check_bisimulation(const Mat& M, const Mat& A, double tol) {
  if ((M - M.transpose()).norm() > tol * (1.0 + M.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Mat> esM(M);
  if (esM.eigenvalues().minCoeff() <= 0.0) return false;
  Mat S = A.transpose() * M + M * A;
  Eigen::SelfAdjointEigenSolver<Mat> esS(0.5 * (S + S.transpose()));
  return esS.eigenvalues().maxCoeff() <= tol;
}

Metrics build_metrics(const HybridAutomaton& H) {
  Metrics out;
  for (size_t i = 0; i < H.locations.size(); ++i) {
    const auto& loc = H.locations[i];
    QuadraticBisimFunction f;
    f.location = static_cast<int>(i);
    if (loc.metric_override) {
      f.M = *loc.metric_override;
      if (!check_bisimulation(f.M, loc.A, H.config.dist_tol))
        throw ModelError("locations." + loc.id + ".M",
                         "supplied matrix is not a bisimulation metric");
    } else {
      try {
        f.M = solve_lyapunov(loc.A, Mat::Identity(H.dim, H.dim));
      } catch (const ModelError&) {
        throw ModelError("locations." + loc.id,
                         "dynamics not Hurwitz and no metric supplied: no "
                         "quadratic bisimulation metric constructed; supply M "
                         "manually");
      }
    }
    out.per_location.push_back(std::move(f));
  }
  return out;
}

DistanceResult dist_point_to_polytope(const Mat& M, const Eigen::Ref<const Vec>& p,
                                      const Polytope& P) {
  PolytopeProjector proj(P, M);
  auto r = proj.project(p);
  DistanceResult out;
  if (r.witness) {
    out.value = std::sqrt(std::max(0.0, r.sq_dist));
    out.witness_point = std::move(r.witness);
  }
  return out;
}

PreparedComponent prepare_component(const AvoidedComponent& comp, const Mat& M) {
  PreparedComponent pc;
  pc.comp = comp;
  pc.proj = std::make_shared<PolytopeProjector>(comp.set, M);
  return pc;
}

double dist_to_prepared(const Mat& M, const Eigen::Ref<const Vec>& p,
                        const PreparedComponent& pc, Vec* witness) {
  auto r = dist_point_to_carved(M, p, pc.comp, *pc.proj);
  if (witness != nullptr && r.witness) *witness = *r.witness;
  return r.value;
}

namespace {

// golden-section minimization of g on [a, b] down to bracket width tol
std::pair<double, double> golden_min(const std::function<double(double)>& g,
                                     double a, double b, double tol) {
  constexpr double kPhi = 0.6180339887498949;
  double x1 = b - kPhi * (b - a);
  double x2 = a + kPhi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kPhi * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kPhi * (b - a);
      f2 = g(x2);
    }
  }
  const double t = 0.5 * (a + b);
  return {t, g(t)};
}

}  // namespace

DistanceResult min_dist_over_window(const TrajFn& xi, const TimeWindows& windows,
                                    const PreparedComponent& target, const Mat& M,
                                    const MinimizeOpts& opts) {
  DistanceResult out;
  if (windows.is_empty()) return out;
  if (target.comp.set.rows() > 0 && !target.proj->feasible()) return out;

  // grid points: lattice anchored at opts.anchor plus exact interval endpoints
  std::vector<double> ts;
  std::vector<long> interval_of;
  std::vector<std::pair<long, long>> spans;  // index range per interval
  for (const auto& [a, b] : windows.intervals()) {
    const long first = static_cast<long>(ts.size());
    ts.push_back(a);
    if (b > a) {
      long k = static_cast<long>(std::ceil((a - opts.anchor) / opts.dt - 1e-12));
      for (; ; ++k) {
        const double t = opts.anchor + static_cast<double>(k) * opts.dt;
        if (t >= b - 1e-15) break;
        if (t > a + 1e-15) ts.push_back(t);
      }
      ts.push_back(b);
    }
    spans.push_back({first, static_cast<long>(ts.size())});
  }

  const long n = static_cast<long>(ts.size());
  std::vector<double> vals(n);
  parallel_map(
      vals, [&](long i) { return dist_to_prepared(M, xi(ts[i]), target, nullptr); },
      opts.exec, /*uniform=*/true);

  // collect local-minimum brackets per interval (endpoints included)
  double best_v = kInf, best_t = 0.0;
  auto consider = [&](double t, double v) {
    if (v < best_v || (v == best_v && t < best_t)) {
      best_v = v;
      best_t = t;
    }
  };
  auto g = [&](double t) { return dist_to_prepared(M, xi(t), target, nullptr); };
  for (const auto& [first, last] : spans) {
    for (long i = first; i < last; ++i) {
      consider(ts[i], vals[i]);
      const bool left_ok = (i == first) || vals[i] <= vals[i - 1];
      const bool right_ok = (i == last - 1) || vals[i] <= vals[i + 1];
      if (!(left_ok && right_ok)) continue;
      const double a = (i == first) ? ts[i] : ts[i - 1];
      const double b = (i == last - 1) ? ts[i] : ts[i + 1];
      if (b - a > opts.refine_tol) {
        auto [t, v] = golden_min(g, a, b, opts.refine_tol);
        consider(t, v);
      }
    }
  }
  if (!std::isfinite(best_v)) return out;
  out.value = best_v;
  out.witness_time = best_t;
  Vec w;
  dist_to_prepared(M, xi(best_t), target, &w);
  out.witness_point = w;
  return out;
}

}  // namespace safehood
