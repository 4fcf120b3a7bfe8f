#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace supgauss {

/// How a replication loop is executed. `threads == 0` lets the runtime decide.
struct Execution {
  enum class Mode { serial, parallel };
  Mode mode = Mode::parallel;
  int threads = 0;

  static Execution serial() { return {Mode::serial, 1}; }
  static Execution parallel(int threads = 0) { return {Mode::parallel, threads}; }
};

/// Process-wide cap applied when an Execution leaves `threads` at 0.
void set_default_thread_cap(int threads);
int default_thread_cap();

int resolved_threads(const Execution& exec);

/// Runs body(r, workspace) for r in [0, count). Each worker thread owns one
/// workspace built by make_workspace(). The body must write its result only to
/// slot r of caller-owned storage; iteration order is unspecified.
template <class MakeWorkspace, class Body>
void for_each_replication(std::size_t count, const Execution& exec, MakeWorkspace&& make_workspace,
                          Body&& body) {
  const int threads = resolved_threads(exec);
  if (exec.mode == Execution::Mode::serial || threads <= 1 || count < 2) {
    auto ws = make_workspace();
    for (std::size_t r = 0; r < count; ++r) body(r, ws);
    return;
  }
#ifdef _OPENMP
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<long long>(count);
#pragma omp parallel num_threads(threads)
  {
    auto ws = make_workspace();
#pragma omp for schedule(static)
    for (long long r = 0; r < n; ++r) {
      try {
        body(static_cast<std::size_t>(r), ws);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
#else
  auto ws = make_workspace();
  for (std::size_t r = 0; r < count; ++r) body(r, ws);
#endif
}

}  // namespace supgauss
