#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace groupmatch::search_detail {

/// Fixed set of threads running index-parallel jobs. `run` blocks until every
/// index is processed; the calling thread participates as worker 0.
class WorkerPool {
 public:
  /// 0 means one worker per hardware thread.
  explicit WorkerPool(unsigned threads);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const { return static_cast<unsigned>(threads_.size()) + 1; }

  /// Calls fn(index, worker) for index in [0, n). Rethrows the first exception.
  void run(std::size_t n, const std::function<void(std::size_t, unsigned)>& fn);

 private:
  void work(unsigned worker);
  void drain(unsigned worker);

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t, unsigned)>* job_ = nullptr;
  std::size_t total_ = 0;
  std::size_t next_ = 0;
  std::size_t chunk_ = 1;
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace groupmatch::search_detail
