#include "mgsim/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace mgsim {

int thread_count() {
  const int max_threads = std::max(1, omp_get_max_threads());
  const char* env = std::getenv("MGSIM_THREADS");
  if (env == nullptr) {
    return max_threads;
  }
  try {
    const int requested = std::stoi(env);
    if (requested > 0) {
      return std::min(requested, max_threads);
    }
  } catch (const std::exception&) {
  }
  return max_threads;
}

}  // namespace mgsim
