// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fbmac {

/// Worker count used by the library: the last value passed to
/// set_worker_count, else FBMAC_THREADS, else the number of logical cores.
int worker_count();

/// Overrides the worker count; pass 0 to return to the environment default.
void set_worker_count(int workers);

namespace detail {
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Calls fn(i) for every i in [0, count). Indices are handed out dynamically,
/// so fn must write its result to slot i rather than accumulate. Calls made
/// from inside a running parallel_for execute serially on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers =
      detail::in_parallel_region
          ? 1
          : std::min<std::size_t>(static_cast<std::size_t>(std::max(1, worker_count())), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    const bool outer = detail::in_parallel_region;
    detail::in_parallel_region = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
    detail::in_parallel_region = outer;
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Splits [0, total) into fixed-size blocks, evaluates fn(block, begin, end)
/// for each and returns the per-block results in block order. The block
/// layout depends only on (total, block_size), never on the worker count.
template <typename T, typename Fn>
std::vector<T> map_blocks(std::size_t total, std::size_t block_size, Fn&& fn) {
  const std::size_t blocks = total == 0 ? 0 : (total + block_size - 1) / block_size;
  std::vector<T> out(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * block_size;
    const std::size_t end = std::min(total, begin + block_size);
    out[b] = fn(b, begin, end);
  });
  return out;
}

/// Accumulates fn(acc, i) over [0, total) in fixed blocks and merges the
/// block accumulators in block order with Acc::merge, so the result is
/// independent of the worker count.
template <typename Acc, typename Fn>
Acc reduce_blocks(std::size_t total, std::size_t block_size, Fn&& fn) {
  auto parts = map_blocks<Acc>(total, block_size, [&](std::size_t, std::size_t begin, std::size_t end) {
    Acc acc;
    for (std::size_t i = begin; i < end; ++i) fn(acc, i);
    return acc;
  });
  Acc result;
  for (const auto& part : parts) result.merge(part);
  return result;
}

}  // namespace fbmac
