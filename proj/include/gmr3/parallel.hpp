#pragma once

// Independent job loops (folds, bootstrap replicates, simulation
// replications). Each job writes only its own output slot, so results do not
// depend on scheduling or on the number of threads.

#include <cstddef>
#include <exception>
#include <mutex>

namespace gmr3 {

template <class Fn>
void parallel_jobs(std::size_t count, Fn&& fn) {
  std::exception_ptr first;
  std::mutex guard;
  const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long long k = 0; k < n; ++k) {
    try {
      fn(static_cast<std::size_t>(k));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace gmr3
