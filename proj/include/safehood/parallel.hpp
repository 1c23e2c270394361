#pragma once

#include <cstdlib>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#ifdef SAFEHOOD_HAS_OPENMP
#include <omp.h>
#endif

namespace safehood {

/// Execution policy for the data-parallel kernels. Serial is the reference
/// implementation; the OpenMP path must produce bit-identical results, which
/// the test suite asserts.
enum class Exec { Serial, Parallel };

/// Applies the SAFEHOOD_THREADS cap to the OpenMP runtime. No-op without
/// OpenMP or when the variable is unset.
inline void apply_thread_cap_from_env() {
#ifdef SAFEHOOD_HAS_OPENMP
  if (const char* v = std::getenv("SAFEHOOD_THREADS")) {
    const int cap = std::atoi(v);
    if (cap > 0) omp_set_num_threads(cap);
  }
#endif
}

inline bool in_parallel_region() {
#ifdef SAFEHOOD_HAS_OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

/// Argmin of f(i) over [0, n). Ties resolve to the lowest index, so the
/// parallel reduction matches the serial scan exactly.
template <typename F>
std::pair<double, long> grid_argmin(long n, F&& f, Exec exec) {
  double best = std::numeric_limits<double>::infinity();
  long best_i = -1;
#ifdef SAFEHOOD_HAS_OPENMP
  if (exec == Exec::Parallel && n > 64 && !in_parallel_region()) {
#pragma omp parallel
    {
      double loc = std::numeric_limits<double>::infinity();
      long loc_i = -1;
#pragma omp for nowait
      for (long i = 0; i < n; ++i) {
        const double v = f(i);
        if (v < loc || (v == loc && i < loc_i)) {
          loc = v;
          loc_i = i;
        }
      }
#pragma omp critical
      {
        if (loc < best || (loc == best && loc_i < best_i)) {
          best = loc;
          best_i = loc_i;
        }
      }
    }
    return {best, best_i};
  }
#endif
  (void)exec;
  for (long i = 0; i < n; ++i) {
    const double v = f(i);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  return {best, best_i};
}

/// Evaluates f(i) into out[i]; the parallel path writes disjoint slots.
/// `uniform` selects static scheduling for cheap same-cost iterations;
/// heterogeneous work (coverage boxes, whole simulations) stays dynamic.
template <typename T, typename F>
void parallel_map(std::vector<T>& out, F&& f, Exec exec, bool uniform = false) {
  const long n = static_cast<long>(out.size());
#ifdef SAFEHOOD_HAS_OPENMP
  if (exec == Exec::Parallel && n > 8 && !in_parallel_region()) {
    if (uniform) {
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) out[i] = f(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
      for (long i = 0; i < n; ++i) out[i] = f(i);
    }
    return;
  }
#endif
  (void)exec;
  (void)uniform;
  for (long i = 0; i < n; ++i) out[i] = f(i);
}

}  // namespace safehood
