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

// Serial reference kernels against their parallel counterparts.
//
// usage: rise_bench [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "rise/drbaselines.hpp"
#include "rise/parallel.hpp"
#include "rise/policy.hpp"

namespace {

using rise::Action;
using rise::RowMatrix;

// Best of three wall times, in seconds.
double Time(const std::function<void()>& fn) {
  double best = 1e300;
  for (int k = 0; k < 3; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

void Report(const std::string& name, double serial, double fast) {
  std::printf("%-36s %10.4f s %10.4f s %8.1fx\n", name.c_str(), serial, fast,
              serial / fast);
}

void BenchTree(int n, int p, int threads) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> z(0, 1);
  RowMatrix x(n, p);
  rise::ScoreTable s;
  s.gamma_plus.resize(n);
  s.gamma_minus.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = z(gen);
    s.gamma_plus[i] = x(i, 0) * x(i, 1 % p) + z(gen);
    s.gamma_minus[i] = z(gen);
  }
  const double ref = Time([&] { rise::FitPolicyTreeReference(x, s, 2); });
  const double fast = Time([&] { rise::FitPolicyTree(x, s, 2, threads); });
  Report("policy tree n=" + std::to_string(n) + " p=" + std::to_string(p), ref,
         fast);
}

void BenchInfimum(int n, int threads) {
  const auto draw = rise::Generate(
      {rise::ScenarioKind::kExample2, rise::SensitiveKind::kDiscrete, 1.0}, n, 2);
  const auto om = rise::OutcomeModel::FromFunction(draw.oracle.mean_fn);
  const auto prod = rise::DiscreteSpecFromData(draw.data).LevelProduct();
  const double ref = Time([&] {
    rise::InfimumOverLevelsReference(om, draw.data.x(), prod, Action::kPlus);
  });
  const double fast = Time([&] {
    rise::InfimumOverLevels(om, draw.data.x(), prod, Action::kPlus, threads);
  });
  Report("infimum over levels n=" + std::to_string(n), ref, fast);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : rise::parallel::DefaultThreads();
  std::printf("threads: %d\n", threads);
  std::printf("%-36s %12s %12s %9s\n", "kernel", "serial", "parallel", "speedup");
  BenchTree(400, 3, threads);
  BenchTree(1500, 4, threads);
  BenchInfimum(20000, threads);
  BenchInfimum(200000, threads);
  return 0;
}
