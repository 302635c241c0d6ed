/*
 * Copyright 2026 The RISE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// OpenMP loop helpers. Kernels built on these write into per-index slots and
// reduce serially afterwards, so results do not depend on the thread count.

#ifndef RISE_PARALLEL_HPP_
#define RISE_PARALLEL_HPP_

#include <cstdint>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rise::parallel {

// Thread count used by the library kernels when the caller passes 0.
int DefaultThreads();
void SetDefaultThreads(int threads);

inline int Resolve(int threads) {
  return threads > 0 ? threads : DefaultThreads();
}

// Runs body(i) for i in [0, n). Exceptions thrown by body are rethrown on the
// calling thread (first one wins).
template <typename Body>
void For(int64_t n, int threads, Body&& body) {
  threads = Resolve(threads);
  if (threads <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

// Static chunked variant for cheap per-index bodies.
template <typename Body>
void ForStatic(int64_t n, int threads, Body&& body) {
  threads = Resolve(threads);
  if (threads <= 1 || n < 1024) {
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace rise::parallel

#endif  // RISE_PARALLEL_HPP_
