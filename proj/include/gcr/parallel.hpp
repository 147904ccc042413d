#pragma once

#include <cstddef>
#include <functional>

namespace gcr {

// Number of worker threads to use when the caller does not say: GCR_THREADS
// if set and positive, otherwise std::thread::hardware_concurrency().
unsigned default_thread_count();

// Runs body(task) for every task in [0, num_tasks) on up to `threads`
// workers. Tasks are handed out dynamically; body must only write state
// owned by its task index. The first exception thrown by any task is
// rethrown on the calling thread after all workers have joined.
void parallel_for(std::size_t num_tasks, unsigned threads,
                  const std::function<void(std::size_t task)>& body);

// Same, but also passes the index of the worker running the task, in
// [0, min(threads, num_tasks)). Use it to address per-worker scratch.
void parallel_for_worker(
    std::size_t num_tasks, unsigned threads,
    const std::function<void(std::size_t task, unsigned worker)>& body);

}  // namespace gcr
