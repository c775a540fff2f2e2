#include "hydemic/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace hydemic {

int worker_count() {
  static const int count = [] {
    if (const char* env = std::getenv("HYDEMIC_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1) return static_cast<int>(v > 256 ? 256 : v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return count;
}

namespace {

// Minimal blocking pool. Work is split into fixed chunks; workers pull
// chunk indices from an atomic counter, so which worker runs a chunk is
// irrelevant to the result.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int64_t n, int64_t chunk, detail::RangeFn fn, void* ctx) {
    {
      std::lock_guard lock(mutex_);
      n_ = n;
      chunk_ = chunk;
      fn_ = fn;
      ctx_ = ctx;
      next_chunk_.store(0, std::memory_order_relaxed);
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_start_.notify_all();
    drain();  // the calling thread participates
    std::unique_lock lock(mutex_);
    cv_done_.wait(lock, [this] { return pending_ == 0; });
  }

 private:
  void drain() {
    const int64_t chunks = (n_ + chunk_ - 1) / chunk_;
    for (;;) {
      const int64_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) break;
      const int64_t begin = c * chunk_;
      const int64_t end = begin + chunk_ > n_ ? n_ : begin + chunk_;
      fn_(ctx_, begin, end);
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      drain();
      {
        std::lock_guard lock(mutex_);
        if (--pending_ == 0) cv_done_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_start_;
  std::condition_variable cv_done_;
  std::atomic<int64_t> next_chunk_{0};
  int64_t n_ = 0;
  int64_t chunk_ = 1;
  detail::RangeFn fn_ = nullptr;
  void* ctx_ = nullptr;
  uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

}  // namespace

namespace detail {

void parallel_run(int64_t n, RangeFn fn, void* ctx) {
  if (n <= 0) return;
  const int workers = worker_count();
  if (workers == 1 || n < 4) {
    fn(ctx, 0, n);
    return;
  }
  static Pool pool(worker_count() - 1);
  const int64_t chunk = (n + workers * 4 - 1) / (workers * 4);
  pool.run(n, chunk < 1 ? 1 : chunk, fn, ctx);
}

}  // namespace detail

}  // namespace hydemic
