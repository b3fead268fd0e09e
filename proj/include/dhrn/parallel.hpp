#pragma once
// Task-parallel loop over a fixed task list. Callers partition work into
// tasks whose boundaries do not depend on the thread count and write results
// per task index, so outputs are identical for any degree of parallelism.

#include <cstddef>
#include <functional>

namespace dhrn {

void set_thread_count(std::size_t n);
std::size_t thread_count();

void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& fn);

}  // namespace dhrn
