#include "ecgdg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ecgdg {

namespace {

int initial_max_threads() {
  int hc = static_cast<int>(std::thread::hardware_concurrency());
  if (hc <= 0) hc = 1;
  int cap = std::min(hc, 8);
  if (const char* env = std::getenv("ECGDG_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) cap = std::min(cap, v);
  }
  return cap;
}

std::atomic<int> g_max_threads{initial_max_threads()};

}  // namespace

int max_threads() { return g_max_threads.load(); }

void set_max_threads(int n) { g_max_threads.store(std::max(1, n)); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int workers = max_threads();
  // Below this, thread startup costs more than the work.
  if (workers <= 1 || n < 4096) {
    fn(0, n);
    return;
  }
  workers = static_cast<int>(std::min<int64_t>(workers, n));
  int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) {
    int64_t begin = w * chunk;
    int64_t end = std::min<int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(0, std::min<int64_t>(chunk, n));
  for (auto& t : pool) t.join();
}

}  // namespace ecgdg
