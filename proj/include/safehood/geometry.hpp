#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace safehood {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex set {x | H x <= h}. Equality constraints are encoded as paired
/// opposite inequality rows. An empty H (zero rows) is the whole space.
struct Polytope {
  Mat H;  // m x n
  Vec h;  // m

  int dim() const { return static_cast<int>(H.cols()); }
  int rows() const { return static_cast<int>(H.rows()); }

  static Polytope whole_space(int n) {
    return Polytope{Mat::Zero(0, n), Vec::Zero(0)};
  }
  static Polytope box(const Vec& lo, const Vec& hi);

  /// Largest constraint violation at x, scaled per row; <= 0 means inside.
  double max_violation(const Eigen::Ref<const Vec>& x) const;
  bool contains(const Eigen::Ref<const Vec>& x, double tol) const {
    return max_violation(x) <= tol;
  }

  /// Copy with every row's offset reduced by eps (rows parallel to
  /// `keep_normal`, if given, are left untouched).
  Polytope shrunk(double eps, const Vec* keep_normal = nullptr) const;
};

/// Minimizer of (p - y)^T M (p - y) over a polytope, exact via enumeration of
/// candidate active sets (all independent row subsets of size <= n). The
/// solution map is affine in p per candidate, so repeated queries against the
/// same (polytope, metric) pair are cheap.
class PolytopeProjector {
 public:
  PolytopeProjector(const Polytope& P, const Mat& M);

  struct Result {
    double sq_dist = kInf;        // (p - y)^T M (p - y); +inf if P empty
    std::optional<Vec> witness;   // minimizer y
  };
  Result project(const Eigen::Ref<const Vec>& p) const;

  bool feasible() const { return feasible_; }

 private:
  struct Candidate {
    Mat C;   // y(p) = C p + d
    Vec d;
    Mat L;   // lambda(p) = L p + mu
    Vec mu;
    std::vector<int> active;
  };
  const Polytope P_;
  Mat M_;
  std::vector<Candidate> cands_;
  Vec row_scale_;
  bool feasible_ = false;
};

/// All vertices and extreme rays of a small polytope, found by enumerating
/// row subsets. Intended for low-dimensional validation and plotting.
struct VertexSet {
  std::vector<Vec> vertices;
  std::vector<Vec> rays;  // unit recession directions
};
VertexSet enumerate_vertices(const Polytope& P, double tol = 1e-9);

bool polytope_is_empty(const Polytope& P, double tol = 1e-9);

/// Open ellipsoid-preimage {y | (R y + s - c)^T M (R y + s - c) < radius^2}
/// carved out of an avoided set (the allowed part of a guard).
struct EllipsoidHole {
  Mat R;
  Vec s;
  Mat M;
  Vec c;
  double radius = 0.0;

  double q(const Eigen::Ref<const Vec>& y) const {
    Vec z = R * y + s - c;
    return z.dot(M * z);
  }
  bool contains(const Eigen::Ref<const Vec>& y) const {
    return radius > 0.0 && q(y) < radius * radius;
  }
};

/// One piece of an avoided set: a polytope, possibly with allowed parts
/// (open ellipsoid preimages) removed. `facet` carries the hyperplane a
/// guard lies on, used for exact one-dimensional carved queries in the plane.
struct AvoidedComponent {
  enum class Kind { Unsafe, Guard };
  Kind kind = Kind::Unsafe;
  int id = -1;  // unsafe index or event index
  Polytope set;
  std::vector<EllipsoidHole> holes;
  std::optional<std::pair<Vec, double>> facet;  // f . y = c containing `set`
};

struct CarvedDistResult {
  double value = kInf;  // metric distance, sqrt of the quadratic form
  std::optional<Vec> witness;
};

/// Distance from p to `comp.set` minus the union of its holes, in the metric
/// induced by M. Exact for n == 2 when a facet line is known; penalized
/// multi-start descent otherwise.
CarvedDistResult dist_point_to_carved(const Mat& M, const Eigen::Ref<const Vec>& p,
                                      const AvoidedComponent& comp,
                                      const PolytopeProjector& proj);

}  // namespace safehood
