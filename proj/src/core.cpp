#include "finola/core.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

namespace finola {

namespace {

/// Minimal persistent pool. Workers are spawned on first use and kept alive
/// so repeated propagate_parallel calls pay dispatch cost only, not thread
/// creation.
class WorkerPool {
 public:
  static WorkerPool& instance() {
    static WorkerPool pool;
    return pool;
  }

  void run(int count, int workers, const std::function<void(int, int)>& fn) {
    if (count <= 0) return;
    if (workers > count) workers = count;
    if (workers <= 1) {
      fn(0, count);
      return;
    }
    ensure_workers(workers);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      pending_ = workers;
      const int base = count / workers;
      const int extra = count % workers;
      int begin = 0;
      for (int w = 0; w < workers; ++w) {
        const int len = base + (w < extra ? 1 : 0);
        tasks_.push_back([fn, begin, end = begin + len] { fn(begin, end); });
        begin += len;
      }
    }
    task_cv_.notify_all();
    std::unique_lock<std::mutex> lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0 && tasks_.empty(); });
  }

 private:
  WorkerPool() = default;
  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    task_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void ensure_workers(int workers) {
    std::lock_guard<std::mutex> lock(mutex_);
    while (static_cast<int>(threads_.size()) < workers)
      threads_.emplace_back([this] { worker_loop(); });
  }

  void worker_loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        task_cv_.wait(lock, [this] { return stop_ || !tasks_.empty(); });
        if (stop_ && tasks_.empty()) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
      {
        std::lock_guard<std::mutex> lock(mutex_);
        --pending_;
      }
      done_cv_.notify_all();
    }
  }

  std::mutex mutex_;
  std::condition_variable task_cv_;
  std::condition_variable done_cv_;
  std::deque<std::function<void()>> tasks_;
  std::vector<std::thread> threads_;
  int pending_ = 0;
  bool stop_ = false;
};

}  // namespace

void pool_run_partitioned(int count, int workers, const std::function<void(int, int)>& fn) {
  WorkerPool::instance().run(count, workers, fn);
}

FeatureMap propagate_parallel(const LatentSet& q_set, const FinolaParams& p, int width, int height,
                              int workers) {
  if (q_set.paths() != 1)
    throw ShapeMismatchError("propagate_parallel: expected a single path, got " +
                             std::to_string(q_set.paths()));
  const GridPos pos = q_set.positions[0];
  detail::check_position<double>(pos, width, height);
  const Vector<double>& q = q_set.vectors[0];
  const int c = static_cast<int>(q.size());

  FeatureMap h(width, height, c);
  h.at(pos.x, pos.y) = q;
  detail::fill_row<double>(h, pos.y, pos.x, p);
  pool_run_partitioned(width, workers, [&](int begin, int end) {
    for (int x = begin; x < end; ++x) detail::fill_column<double>(h, x, pos.y, p);
  });

  FeatureMap v(width, height, c);
  v.at(pos.x, pos.y) = q;
  detail::fill_column<double>(v, pos.x, pos.y, p);
  pool_run_partitioned(height, workers, [&](int begin, int end) {
    for (int y = begin; y < end; ++y) detail::fill_row<double>(v, y, pos.x, p);
  });

  h.data = 0.5 * (h.data + v.data);
  return h;
}

}  // namespace finola
