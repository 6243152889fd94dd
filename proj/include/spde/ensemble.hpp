#pragma once

#include <cstddef>
#include <exception>
#include <type_traits>
#include <vector>

#include <omp.h>

namespace spde {

/// Worker count: explicit request if positive, then SPDE_REACT_WORKERS, then
/// the OpenMP default.
int resolve_workers(int requested);

/// Serial reference: results[r] = task(r) in run order.
template <class Task>
auto map_runs_serial(std::size_t n_runs, Task&& task) {
  using Result = std::invoke_result_t<Task&, std::size_t>;
  std::vector<Result> results(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) results[r] = task(r);
  return results;
}

/// Same contract as map_runs_serial, runs distributed over an OpenMP pool of
/// `workers` threads. Each result slot is written by exactly one run, so the
/// output does not depend on scheduling. The first exception by run index is
/// rethrown after the loop.
template <class Task>
auto map_runs(std::size_t n_runs, int workers, Task&& task) {
  using Result = std::invoke_result_t<Task&, std::size_t>;
  if (workers <= 1) return map_runs_serial(n_runs, task);
  std::vector<Result> results(n_runs);
  std::vector<std::exception_ptr> errors(n_runs);
  const auto n = static_cast<long long>(n_runs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long r = 0; r < n; ++r) {
    try {
      results[static_cast<std::size_t>(r)] = task(static_cast<std::size_t>(r));
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace spde
