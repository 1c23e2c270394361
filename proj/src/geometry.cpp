#include "safehood/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace safehood {

namespace {

void subsets_upto(int m, int kmax, std::vector<std::vector<int>>& out) {
  out.push_back({});
  std::vector<int> cur;
  // iterative lexicographic enumeration by subset size
  for (int k = 1; k <= kmax; ++k) {
    cur.assign(k, 0);
    for (int i = 0; i < k; ++i) cur[i] = i;
    if (k > m) break;
    while (true) {
      out.push_back(cur);
      int i = k - 1;
      while (i >= 0 && cur[i] == m - k + i) --i;
      if (i < 0) break;
      ++cur[i];
      for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
  }
}

}  // namespace

Polytope Polytope::box(const Vec& lo, const Vec& hi) {
  const int n = static_cast<int>(lo.size());
  Mat H(2 * n, n);
  Vec h(2 * n);
  H.setZero();
  for (int i = 0; i < n; ++i) {
    H(2 * i, i) = 1.0;
    h(2 * i) = hi(i);
    H(2 * i + 1, i) = -1.0;
    h(2 * i + 1) = -lo(i);
  }
  return Polytope{std::move(H), std::move(h)};
}

double Polytope::max_violation(const Eigen::Ref<const Vec>& x) const {
  if (rows() == 0) return -kInf;
  double worst = -kInf;
  for (int i = 0; i < rows(); ++i) {
    const double scale = 1.0 + H.row(i).norm() + std::abs(h(i));
    worst = std::max(worst, (H.row(i).dot(x) - h(i)) / scale);
  }
  return worst;
}

Polytope Polytope::shrunk(double eps, const Vec* keep_normal) const {
  Polytope out = *this;
  for (int i = 0; i < rows(); ++i) {
    const double nrm = H.row(i).norm();
    if (keep_normal != nullptr && nrm > 0.0) {
      const double cosang = std::abs(H.row(i).dot(*keep_normal)) /
                            (nrm * keep_normal->norm());
      if (cosang > 1.0 - 1e-9) continue;
    }
    out.h(i) -= eps * nrm;
  }
  return out;
}

PolytopeProjector::PolytopeProjector(const Polytope& P, const Mat& M)
    : P_(P), M_(M) {
  const int n = P.dim();
  const int m = P.rows();
  row_scale_ = Vec::Ones(std::max(m, 1));
  for (int i = 0; i < m; ++i)
    row_scale_(i) = 1.0 + P.H.row(i).norm() + std::abs(P.h(i));

  std::vector<std::vector<int>> subsets;
  subsets_upto(m, n, subsets);
  for (const auto& S : subsets) {
    const int k = static_cast<int>(S.size());
    Mat K(n + k, n + k);
    K.setZero();
    K.topLeftCorner(n, n) = 2.0 * M;
    for (int r = 0; r < k; ++r) {
      K.block(n + r, 0, 1, n) = P.H.row(S[r]);
      K.block(0, n + r, n, 1) = P.H.row(S[r]).transpose();
    }
    Eigen::FullPivLU<Mat> lu(K);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;  // dependent active rows; covered by a subset
    Mat Kinv = lu.inverse();
    Candidate c;
    c.C = Kinv.topLeftCorner(n, n) * 2.0 * M;
    c.L = Kinv.bottomLeftCorner(k, n) * 2.0 * M;
    Vec hs(k);
    for (int r = 0; r < k; ++r) hs(r) = P.h(S[r]);
    c.d = Kinv.topRightCorner(n, k) * hs;
    c.mu = Kinv.bottomRightCorner(k, k) * hs;
    c.active = S;
    cands_.push_back(std::move(c));
  }
  // feasibility probe: a nonempty polytope admits some optimal candidate
  feasible_ = project(Vec::Zero(n)).witness.has_value();
}

PolytopeProjector::Result PolytopeProjector::project(
    const Eigen::Ref<const Vec>& p) const {
  constexpr double kTol = 1e-9;
  Result best;
  for (const auto& c : cands_) {
    Vec y = c.C * p + c.d;
    Vec lam = c.L * p + c.mu;
    bool ok = true;
    for (int r = 0; r < lam.size() && ok; ++r)
      if (lam(r) < -kTol) ok = false;
    for (int i = 0; i < P_.rows() && ok; ++i)
      if (P_.H.row(i).dot(y) - P_.h(i) > kTol * row_scale_(i)) ok = false;
    if (!ok) continue;
    Vec e = p - y;
    const double sq = e.dot(M_ * e);
    if (sq < best.sq_dist) {
      best.sq_dist = sq;
      best.witness = std::move(y);
    }
  }
  if (!best.witness.has_value()) best.sq_dist = kInf;
  return best;
}

VertexSet enumerate_vertices(const Polytope& P, double tol) {
  VertexSet out;
  const int n = P.dim();
  const int m = P.rows();
  std::vector<std::vector<int>> subsets;
  subsets_upto(m, n, subsets);
  auto near_any = [&](const std::vector<Vec>& vs, const Vec& v) {
    for (const auto& w : vs)
      if ((w - v).norm() <= 1e-7 * (1.0 + v.norm())) return true;
    return false;
  };
  for (const auto& S : subsets) {
    if (static_cast<int>(S.size()) == n) {
      Mat A(n, n);
      Vec b(n);
      for (int r = 0; r < n; ++r) {
        A.row(r) = P.H.row(S[r]);
        b(r) = P.h(S[r]);
      }
      Eigen::FullPivLU<Mat> lu(A);
      lu.setThreshold(1e-10);
      if (!lu.isInvertible()) continue;
      Vec v = lu.solve(b);
      if (P.contains(v, tol) && !near_any(out.vertices, v)) out.vertices.push_back(v);
    } else if (static_cast<int>(S.size()) == n - 1 && n >= 1) {
      Mat A(std::max<int>(1, n - 1), n);
      A.setZero();
      for (int r = 0; r < n - 1; ++r) A.row(r) = P.H.row(S[r]);
      Eigen::FullPivLU<Mat> lu(A);
      lu.setThreshold(1e-10);
      Mat null = lu.kernel();
      if (null.cols() != 1) continue;
      Vec d = null.col(0).normalized();
      for (int sign = 0; sign < 2; ++sign) {
        Vec dir = (sign == 0) ? d : Vec(-d);
        bool recession = true;
        for (int i = 0; i < m; ++i)
          if (P.H.row(i).dot(dir) > tol) { recession = false; break; }
        if (recession && !near_any(out.rays, dir)) out.rays.push_back(dir);
      }
    }
  }
  return out;
}

bool polytope_is_empty(const Polytope& P, double /*tol*/) {
  if (P.rows() == 0) return false;
  PolytopeProjector proj(P, Mat::Identity(P.dim(), P.dim()));
  return !proj.feasible();
}

namespace {

struct Interval {
  double lo, hi;
};

// Remove the open interval (a, b) from each piece of `iv`.
std::vector<Interval> subtract_open(const std::vector<Interval>& iv, double a,
                                    double b) {
  std::vector<Interval> out;
  for (const auto& seg : iv) {
    if (b <= seg.lo || a >= seg.hi) {
      out.push_back(seg);
      continue;
    }
    if (a > seg.lo || (a == seg.lo)) {
      if (a >= seg.lo) out.push_back({seg.lo, std::min(a, seg.hi)});
    }
    if (b <= seg.hi) out.push_back({std::max(b, seg.lo), seg.hi});
  }
  std::vector<Interval> clean;
  for (const auto& s : out)
    if (s.hi >= s.lo) clean.push_back(s);
  return clean;
}

CarvedDistResult carved_line_search(const Mat& M, const Eigen::Ref<const Vec>& p,
                                    const AvoidedComponent& comp) {
  // Exact in the plane: parameterize the facet line, subtract hole intervals,
  // minimize the convex quadratic per remaining piece.
  const Vec f = comp.facet->first;
  const double c = comp.facet->second;
  const double fn2 = f.squaredNorm();
  Vec q0 = f * (c / fn2);
  Vec dir(2);
  dir << -f(1), f(0);
  dir.normalize();

  constexpr double kBig = 1e9;
  double ulo = -kBig, uhi = kBig;
  for (int i = 0; i < comp.set.rows(); ++i) {
    const double a = comp.set.H.row(i).dot(dir);
    const double b = comp.set.h(i) - comp.set.H.row(i).dot(q0);
    const double scale = 1.0 + comp.set.H.row(i).norm();
    if (a > 1e-12 * scale)
      uhi = std::min(uhi, b / a);
    else if (a < -1e-12 * scale)
      ulo = std::max(ulo, b / a);
    else if (b < -1e-9 * scale)
      return {};  // row parallel to the line and violated: empty set
  }
  if (ulo > uhi) return {};

  std::vector<Interval> pieces{{ulo, uhi}};
  for (const auto& hole : comp.holes) {
    if (hole.radius <= 0.0) continue;
    // q(y(u)) = alpha u^2 + beta u + delta
    Vec z0 = hole.R * q0 + hole.s - hole.c;
    Vec zd = hole.R * dir;
    const double alpha = zd.dot(hole.M * zd);
    const double beta = 2.0 * z0.dot(hole.M * zd);
    const double delta = z0.dot(hole.M * z0) - hole.radius * hole.radius;
    if (alpha > 1e-14) {
      const double disc = beta * beta - 4.0 * alpha * delta;
      if (disc <= 0.0) continue;
      const double r = std::sqrt(disc);
      pieces = subtract_open(pieces, (-beta - r) / (2.0 * alpha),
                             (-beta + r) / (2.0 * alpha));
    } else if (std::abs(beta) > 1e-14) {
      if (beta > 0.0)
        pieces = subtract_open(pieces, -kBig - 1.0, -delta / beta);
      else
        pieces = subtract_open(pieces, -delta / beta, kBig + 1.0);
    } else if (delta < 0.0) {
      return {};  // constant q below radius: entire line allowed
    }
    if (pieces.empty()) return {};
  }

  // objective F(u) = A u^2 + B u + C
  Vec e0 = p - q0;
  const double A = dir.dot(M * dir);
  const double B = -2.0 * e0.dot(M * dir);
  const double C = e0.dot(M * e0);
  CarvedDistResult best;
  double best_sq = kInf;
  for (const auto& seg : pieces) {
    double u = -B / (2.0 * A);
    u = std::clamp(u, seg.lo, seg.hi);
    const double sq = (A * u + B) * u + C;
    if (sq < best_sq) {
      best_sq = sq;
      best.witness = q0 + u * dir;
    }
  }
  if (best.witness.has_value()) best.value = std::sqrt(std::max(0.0, best_sq));
  return best;
}

CarvedDistResult carved_multistart(const Mat& M, const Eigen::Ref<const Vec>& p,
                                   const AvoidedComponent& comp,
                                   const PolytopeProjector& proj) {
  // Penalized projected descent from several starts. Approximate; the n == 2
  // path is exact and is the one exercised by the bundled models.
  auto objective = [&](const Vec& y, double w) {
    Vec e = p - y;
    double val = e.dot(M * e);
    for (const auto& hole : comp.holes) {
      if (hole.radius <= 0.0) continue;
      const double viol = hole.radius * hole.radius - hole.q(y);
      if (viol > 0.0) val += w * viol * viol;
    }
    return val;
  };
  std::vector<Vec> starts;
  auto base = proj.project(p);
  if (base.witness) starts.push_back(*base.witness);
  VertexSet vs = enumerate_vertices(comp.set);
  for (const auto& v : vs.vertices) starts.push_back(v);
  CarvedDistResult best;
  double best_sq = kInf;
  for (const auto& s0 : starts) {
    Vec y = s0;
    double w = 1e3;
    for (int outer = 0; outer < 6; ++outer, w *= 10.0) {
      double step = 0.1 * (1.0 + (p - y).norm());
      for (int it = 0; it < 60; ++it) {
        // numeric gradient of the penalized objective
        Vec g(y.size());
        const double f0 = objective(y, w);
        for (int j = 0; j < y.size(); ++j) {
          Vec yp = y;
          const double hstep = 1e-7 * (1.0 + std::abs(y(j)));
          yp(j) += hstep;
          g(j) = (objective(yp, w) - f0) / hstep;
        }
        Vec trial = y - step * g;
        auto pr = proj.project(trial);  // pull back onto the polytope
        if (!pr.witness) break;
        trial = *pr.witness;
        if (objective(trial, w) < f0) {
          y = trial;
          step *= 1.3;
        } else {
          step *= 0.5;
          if (step < 1e-12) break;
        }
      }
    }
    bool inside_hole = false;
    for (const auto& hole : comp.holes)
      if (hole.contains(y)) inside_hole = true;
    if (inside_hole) continue;
    Vec e = p - y;
    const double sq = e.dot(M * e);
    if (sq < best_sq) {
      best_sq = sq;
      best.witness = y;
    }
  }
  if (best.witness) best.value = std::sqrt(std::max(0.0, best_sq));
  return best;
}

}  // namespace

CarvedDistResult dist_point_to_carved(const Mat& M, const Eigen::Ref<const Vec>& p,
                                      const AvoidedComponent& comp,
                                      const PolytopeProjector& proj) {
  auto base = proj.project(p);
  if (!base.witness) return {};  // empty polytope: +inf
  bool in_hole = false;
  for (const auto& hole : comp.holes)
    if (hole.contains(*base.witness)) { in_hole = true; break; }
  if (!in_hole) {
    CarvedDistResult r;
    r.value = std::sqrt(std::max(0.0, base.sq_dist));
    r.witness = std::move(base.witness);
    return r;
  }
  if (p.size() == 2 && comp.facet.has_value()) return carved_line_search(M, p, comp);
  return carved_multistart(M, p, comp, proj);
}

}  // namespace safehood
