#pragma once

#include <cstdint>
#include <utility>

namespace hydemic {

// Worker count: HYDEMIC_THREADS if set (clamped to [1, 256]), otherwise
// hardware concurrency. Read once on first use.
int worker_count();

namespace detail {
using RangeFn = void (*)(void* ctx, int64_t begin, int64_t end);
void parallel_run(int64_t n, RangeFn fn, void* ctx);
}  // namespace detail

// Runs fn(i) for i in [0, n). Iterations must write to disjoint outputs;
// each index is evaluated by exactly one worker with a sequential inner
// order, so results are independent of the worker count.
template <typename F>
void parallel_for(int64_t n, F&& fn) {
  auto thunk = [](void* ctx, int64_t begin, int64_t end) {
    auto& f = *static_cast<std::remove_reference_t<F>*>(ctx);
    for (int64_t i = begin; i < end; ++i) f(i);
  };
  detail::parallel_run(n, thunk, const_cast<std::remove_reference_t<F>*>(&fn));
}

}  // namespace hydemic
