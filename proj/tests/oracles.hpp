#pragma once

// Brute-force reference kernels for cross-checking the distance machinery,
// independent of the library's active-set / golden-section path.
//
// Two routes are provided:
//  - grid_*: literal dense-grid search (step 1e-4 along faces), used for the
//    point/polytope instance checks;
//  - face_*: per-face closed-form projections with bisected hole boundaries,
//    used inside dense time sweeps where a full grid is too slow.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "safehood/robust.hpp"

namespace oracle {

using safehood::AvoidedComponent;
using safehood::EllipsoidHole;
using safehood::Mat;
using safehood::Polytope;
using safehood::Vec;

inline double phi_form(const Mat& M, const Vec& a, const Vec& b) {
  Vec d = a - b;
  return std::sqrt(std::max(0.0, d.dot(M * d)));
}

inline bool inside(const Polytope& P, const Vec& x, double tol = 1e-12) {
  for (int i = 0; i < P.rows(); ++i)
    if (P.H.row(i).dot(x) - P.h(i) > tol * (1.0 + std::abs(P.h(i)))) return false;
  return true;
}

inline bool in_hole(const std::vector<EllipsoidHole>& holes, const Vec& y) {
  for (const auto& h : holes)
    if (h.contains(y)) return true;
  return false;
}

struct Face {
  Vec q0, dir;    // line q0 + u * dir
  double ulo, uhi;
  bool ok = false;
};

inline Face face_of_row(const Polytope& P, int i, const Vec& p, double span) {
  Face f;
  Vec nrm = P.H.row(i).transpose();
  const double nn = nrm.norm();
  if (nn < 1e-14) return f;
  f.q0 = nrm * (P.h(i) / nrm.squaredNorm());
  f.dir = Vec(2);
  f.dir << -nrm(1), nrm(0);
  f.dir /= nn;
  const double uc = f.dir.dot(p - f.q0);
  f.ulo = uc - span;
  f.uhi = uc + span;
  for (int j = 0; j < P.rows(); ++j) {
    if (j == i) continue;
    const double a = P.H.row(j).dot(f.dir);
    const double b = P.h(j) - P.H.row(j).dot(f.q0);
    if (a > 1e-13)
      f.uhi = std::min(f.uhi, b / a);
    else if (a < -1e-13)
      f.ulo = std::max(f.ulo, b / a);
    else if (b < -1e-9)
      return f;  // face empty
  }
  f.ok = f.ulo <= f.uhi;
  return f;
}

// ---- literal dense-grid route ----

inline double grid_dist_carved(const Mat& M, const Vec& p,
                               const AvoidedComponent& comp, double step = 1e-4,
                               double span = 2.0) {
  if (comp.set.rows() == 0) return 0.0;
  if (inside(comp.set, p) && !in_hole(comp.holes, p)) return 0.0;
  double best = safehood::kInf;
  for (int i = 0; i < comp.set.rows(); ++i) {
    Face f = face_of_row(comp.set, i, p, span);
    if (!f.ok) continue;
    const long n = std::max(1L, std::lround((f.uhi - f.ulo) / step));
    for (long k = 0; k <= n; ++k) {
      const double u =
          f.ulo + (f.uhi - f.ulo) * static_cast<double>(k) / static_cast<double>(n);
      Vec y = f.q0 + u * f.dir;
      if (!in_hole(comp.holes, y)) best = std::min(best, phi_form(M, p, y));
    }
  }
  return best;
}

inline double grid_dist_plain(const Mat& M, const Vec& p, const Polytope& P,
                              double step = 1e-4, double span = 2.0) {
  AvoidedComponent c;
  c.set = P;
  return grid_dist_carved(M, p, c, step, span);
}

// ---- closed-form face route (for time sweeps) ----

inline double face_dist_carved(const Mat& M, const Vec& p,
                               const AvoidedComponent& comp, double span = 100.0) {
  if (comp.set.rows() == 0) return 0.0;
  if (inside(comp.set, p) && !in_hole(comp.holes, p)) return 0.0;
  double best = safehood::kInf;
  for (int i = 0; i < comp.set.rows(); ++i) {
    Face f = face_of_row(comp.set, i, p, span);
    if (!f.ok) continue;
    // candidate u values: the clamped metric projection, interval ends, and
    // hole rims around a carved-away projection (located by bisection; the
    // candidate kept is the feasible side of each bracket)
    std::vector<double> cands{f.ulo, f.uhi};
    const double dMd = f.dir.dot(M * f.dir);
    double uproj = f.ulo;
    bool have_proj = false;
    if (dMd > 1e-14) {
      uproj = std::clamp(f.dir.dot(M * (p - f.q0)) / dMd, f.ulo, f.uhi);
      cands.push_back(uproj);
      have_proj = true;
    }
    const Vec yproj = f.q0 + uproj * f.dir;
    const bool proj_carved = have_proj && in_hole(comp.holes, yproj);
    for (const auto& h : comp.holes) {
      if (h.radius <= 0.0 || !proj_carved) continue;
      auto qfn = [&](double u) {
        Vec y = f.q0 + u * f.dir;
        return h.q(y) - h.radius * h.radius;
      };
      auto scan = [&](double lo0, double hi0, int steps) {
        double prev_u = lo0, prev_v = qfn(lo0);
        for (int k = 1; k <= steps; ++k) {
          const double u = lo0 + (hi0 - lo0) * k / steps;
          const double v = qfn(u);
          if ((prev_v <= 0.0) != (v <= 0.0)) {
            double lo = prev_u, hi = u;
            for (int it = 0; it < 60; ++it) {
              const double mid = 0.5 * (lo + hi);
              if ((qfn(mid) <= 0.0) == (prev_v <= 0.0))
                lo = mid;
              else
                hi = mid;
            }
            cands.push_back((prev_v <= 0.0) ? hi : lo);
          }
          prev_u = u;
          prev_v = v;
        }
      };
      scan(std::max(f.ulo, uproj - 8.0), std::min(f.uhi, uproj + 8.0), 1024);
    }
    for (double u : cands) {
      Vec y = f.q0 + u * f.dir;
      if (inside(comp.set, y, 1e-9) && !in_hole(comp.holes, y))
        best = std::min(best, phi_form(M, p, y));
    }
  }
  return best;
}

// dense time-grid minimum of t -> dist(xi(t), comp), step 1e-4
inline double min_over_time(const std::function<Vec(double)>& xi, double a,
                            double b, const Mat& M, const AvoidedComponent& comp,
                            double tstep = 1e-4) {
  double best = safehood::kInf;
  if (b < a) return best;
  const long n = std::max(1L, static_cast<long>(std::ceil((b - a) / tstep)));
  for (long k = 0; k <= n; ++k) {
    const double t = a + (b - a) * static_cast<double>(k) / static_cast<double>(n);
    best = std::min(best, face_dist_carved(M, xi(t), comp));
  }
  return best;
}

inline double min_over_windows(const std::function<Vec(double)>& xi,
                               const safehood::TimeWindows& win, const Mat& M,
                               const AvoidedComponent& comp, double tstep = 1e-4) {
  double best = safehood::kInf;
  for (const auto& [a, b] : win.intervals())
    best = std::min(best, min_over_time(xi, a, b, M, comp, tstep));
  return best;
}

inline Polytope box2(double x1lo, double x1hi, double x2lo, double x2hi) {
  Vec lo(2), hi(2);
  lo << x1lo, x2lo;
  hi << x1hi, x2hi;
  return Polytope::box(lo, hi);
}

// random 2-D polytope with m rows around a random interior point; may be
// unbounded for small m
inline Polytope random_polytope(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vec c(2);
  c << 2.0 * unif(rng), 2.0 * unif(rng);
  Mat H(m, 2);
  Vec h(m);
  for (int i = 0; i < m; ++i) {
    const double ang = M_PI * unif(rng);
    H(i, 0) = std::cos(ang);
    H(i, 1) = std::sin(ang);
    h(i) = H.row(i).dot(c) + 0.2 + std::abs(unif(rng));
  }
  return Polytope{H, h};
}

inline Mat random_spd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.3, 2.0);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  const double a = ang(rng);
  Mat R(2, 2);
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = unif(rng);
  D(1, 1) = unif(rng);
  return R * D * R.transpose();
}

}  // namespace oracle

namespace oracle {
// absolute-tolerance comparison (doctest's Approx is relative-only)
inline bool near(double a, double b, double tol) {
  if (std::isinf(a) && std::isinf(b)) return true;
  return std::abs(a - b) <= tol;
}
}  // namespace oracle
