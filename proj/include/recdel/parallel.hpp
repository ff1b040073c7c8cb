#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace recdel {

/// Caps the thread count used by parallel_for. 0 restores the runtime default.
void set_max_threads(int n);
int max_threads();

/// Static-schedule parallel loop over [0, n). Each iteration must be
/// independent; results written per-index stay deterministic regardless of
/// thread count. Exceptions must not escape the body.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t i = 0; i < n; ++i) {
    body(i);
  }
#else
  for (std::int64_t i = 0; i < n; ++i) {
    body(i);
  }
#endif
}

}  // namespace recdel
