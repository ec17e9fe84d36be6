#pragma once

#include <functional>

namespace canet {

/// Number of worker threads kernels may use. Read once from CANET_THREADS
/// (default 1); results are bitwise identical for a fixed value.
int kernel_threads();
void set_kernel_threads(int n);

/// Runs fn(i) for i in [begin, end). Each index is handled by exactly one
/// worker; callers must not let fn(i) write to memory shared across i.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace canet
