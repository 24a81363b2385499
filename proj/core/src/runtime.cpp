#include "bcm/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ on glibc

#if defined(__GLIBC__)
#include <malloc.h>
#endif
#if defined(BCM_HAVE_OPENMP)
#include <omp.h>
#endif

namespace bcm {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

void set_threads(int n) {
#if defined(BCM_HAVE_OPENMP)
  if (n >= 1) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#if defined(BCM_HAVE_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace bcm
