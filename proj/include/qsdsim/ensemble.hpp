#pragma once

// Replica ensembles. Replica r always draws from substream (root, salt, r)
// and replicas are grouped into fixed-size blocks whose partial results are
// merged in block order, so the output does not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "qsdsim/random.hpp"

namespace qsdsim {

struct Parallelism {
  unsigned threads = 1;
  std::size_t block_size = 2048;
};

template <class Acc>
concept Mergeable = std::copyable<Acc> && requires(Acc& a, const Acc& b) { a.merge(b); };

/// Runs body(r, rng, acc) for r in [0, replicas) and returns the merged accumulator.
template <Mergeable Acc, class Body>
Acc run_ensemble(std::size_t replicas, std::uint64_t root, std::uint64_t salt,
                 const Acc& zero, Body&& body, Parallelism par = {}) {
  const std::size_t block = std::max<std::size_t>(1, par.block_size);
  const std::size_t nblocks = (replicas + block - 1) / block;
  std::vector<Acc> partial(nblocks, zero);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (std::size_t b; (b = next.fetch_add(1)) < nblocks;) {
        std::size_t end = std::min(replicas, (b + 1) * block);
        for (std::size_t r = b * block; r < end; ++r) {
          RandomStream rng = RandomStream::substream(root, salt, r);
          body(r, rng, partial[b]);
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(nblocks);
    }
  };

  unsigned threads = std::max(1u, std::min<unsigned>(par.threads, static_cast<unsigned>(nblocks)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  Acc out = zero;
  for (const Acc& p : partial) out.merge(p);
  return out;
}

/// Running sums for a mean and its standard error.
struct MeanAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  void merge(const MeanAccumulator& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double variance() const {
    if (count < 2) return 0.0;
    double n = static_cast<double>(count);
    double v = (sum_sq - sum * sum / n) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }
  double stderr_of_mean() const {
    return count ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

}  // namespace qsdsim
