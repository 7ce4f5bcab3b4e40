#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace loadcast {

// Work below this many flops runs serially; forking threads costs more than
// the loop body saves.
inline constexpr double kMinParallelFlops = 64.0 * 1024.0;

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs fn(i) for i in [0, n). Every index is computed by exactly one thread
// and each body must only write state owned by its index, so results are
// bit-identical to the serial loop regardless of thread count.
template <typename F>
void parallel_for(std::int64_t n, double flops_per_item, F&& fn) {
#ifdef _OPENMP
  if (static_cast<double>(n) * flops_per_item >= kMinParallelFlops) {
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
#else
  (void)flops_per_item;
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    fn(i);
  }
}

}  // namespace loadcast
