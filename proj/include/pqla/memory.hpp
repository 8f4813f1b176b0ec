#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pqla {

/// Monte Carlo loops allocate path-sized buffers per replication and keep small
/// results alive across replications. With glibc's adaptive mmap threshold the
/// large buffers move into the brk heap and the small survivors pin it, so RSS
/// grows without bound. A fixed threshold keeps large buffers in mmap.
inline void use_fixed_mmap_threshold() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 128 * 1024);
#endif
}

}  // namespace pqla
