#pragma once

namespace mgsim {

// Worker count for OpenMP kernels: MGSIM_THREADS when set to a positive
// integer (capped at the OpenMP maximum), otherwise the OpenMP maximum.
int thread_count();

}  // namespace mgsim
