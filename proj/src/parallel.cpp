#include "gcr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gcr {

unsigned default_thread_count() {
  if (const char* env = std::getenv("GCR_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      // fall through to hardware default
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for_worker(
    std::size_t num_tasks, unsigned threads,
    const std::function<void(std::size_t, unsigned)>& body) {
  if (num_tasks == 0) return;
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, threads), num_tasks));
  if (workers == 1) {
    for (std::size_t t = 0; t < num_tasks; ++t) body(t, 0);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<bool> stop{false};

  auto run = [&](unsigned worker) {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t t = next.fetch_add(1);
      if (t >= num_tasks) break;
      try {
        body(t, worker);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

void parallel_for(std::size_t num_tasks, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  parallel_for_worker(num_tasks, threads,
                      [&](std::size_t t, unsigned) { body(t); });
}

}  // namespace gcr
