#include "supgauss/parallel.hpp"

#include <atomic>

namespace supgauss {

namespace {
std::atomic<int> g_thread_cap{0};
}

void set_default_thread_cap(int threads) { g_thread_cap.store(threads < 0 ? 0 : threads); }

int default_thread_cap() { return g_thread_cap.load(); }

int resolved_threads(const Execution& exec) {
  if (exec.mode == Execution::Mode::serial) return 1;
  int t = exec.threads > 0 ? exec.threads : g_thread_cap.load();
#ifdef _OPENMP
  if (t <= 0) t = omp_get_max_threads();
#endif
  return t > 0 ? t : 1;
}

}  // namespace supgauss
