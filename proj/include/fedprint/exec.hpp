#pragma once

#include <cstddef>
#include <exception>

#include "fedprint/errors.hpp"

#ifdef FEDPRINT_HAVE_OPENMP
#include <omp.h>
#endif

namespace fedprint {

// How to spread independent work items over threads. threads == 1 is the
// serial reference path; 0 means use all hardware threads; > 1 pins the team
// size. Outputs are bit-identical across all settings because every item
// draws from its own derived seed and writes only its own slot.
struct ExecPolicy {
  int threads = 1;

  void validate() const {
    if (threads < 0) throw config_error("threads must be >= 0");
  }

  int resolved_threads() const {
    validate();
    if (threads != 0) return threads;
#ifdef FEDPRINT_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
  }
};

// Runs fn(0), ..., fn(count - 1). fn must touch only its own slot. The first
// exception raised is rethrown here so failures never escape a worker thread.
template <typename Fn>
void run_indexed(std::size_t count, const ExecPolicy& policy, Fn&& fn) {
  const int threads = policy.resolved_threads();
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
#ifdef FEDPRINT_HAVE_OPENMP
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      {
        if (!err) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
#else
  for (std::size_t i = 0; i < count; ++i) fn(i);
#endif
}

}  // namespace fedprint
