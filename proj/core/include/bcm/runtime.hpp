#pragma once

namespace bcm {

/// Keeps freed heap memory mapped between the many short-lived space-time
/// buffers of a control solve (glibc only; no-op elsewhere).
void tune_allocator();

/// Worker threads for parallel loops; values < 1 keep the default.
void set_threads(int n);
int max_threads();

}  // namespace bcm
