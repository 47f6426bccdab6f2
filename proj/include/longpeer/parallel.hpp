#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace longpeer {

// Runs fn(0..count-1) across up to `threads` workers (0 = hardware count).
// Work items must be independent; result reduction stays with the caller so
// totals are accumulated in index order regardless of scheduling.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace longpeer
