#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mmc {

/// Keeps large autodiff temporaries on the heap instead of fresh mmap'd pages.
/// The per-step matrices are a few hundred KB each; with glibc defaults every
/// one of them is mapped, faulted in and unmapped again, which can double the
/// wall time of a fit. Call once at program start.
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace mmc
