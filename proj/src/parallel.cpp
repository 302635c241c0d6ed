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

#include "rise/parallel.hpp"

#include <atomic>

namespace rise::parallel {
namespace {

int HardwareThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::atomic<int> g_default_threads{0};

}  // namespace

int DefaultThreads() {
  const int t = g_default_threads.load();
  return t > 0 ? t : HardwareThreads();
}

void SetDefaultThreads(int threads) { g_default_threads.store(threads); }

}  // namespace rise::parallel
