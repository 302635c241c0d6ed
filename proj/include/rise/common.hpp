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

#ifndef RISE_COMMON_HPP_
#define RISE_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rise {

// Binary action, canonical {-1, +1} encoding.
enum class Action : int8_t { kMinus = -1, kPlus = 1 };

inline constexpr Action kBothActions[2] = {Action::kMinus, Action::kPlus};

inline double ToSign(Action a) { return static_cast<double>(a); }
inline bool IsTreated(Action a) { return a == Action::kPlus; }
inline Action Opposite(Action a) {
  return a == Action::kPlus ? Action::kMinus : Action::kPlus;
}
inline int ArmIndex(Action a) { return a == Action::kPlus ? 1 : 0; }

// Error hierarchy. Every failure surfaced by the library is one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or enum combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// CSV ingestion failure; the message names row and column.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// A precondition of a fitting routine does not hold.
class FitError : public Error {
 public:
  using Error::Error;
};

// Iterative fit failed to decrease its loss; carries the per-epoch trace.
class ConvergenceError : public FitError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> trace)
      : FitError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

// An estimator is undefined on the given inputs.
class EvalError : public Error {
 public:
  using Error::Error;
};

// SplitMix64 finalizer.
inline uint64_t MixBits(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t HashName(std::string_view name) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seeded generator with named sub-streams. Streams derived from the same
// (seed, name) pair are identical; distinct names are independent.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(MixBits(seed)) {}

  Rng Stream(std::string_view name) const {
    return Rng(MixBits(seed_ ^ MixBits(HashName(name))));
  }
  Rng Stream(std::string_view name, uint64_t index) const {
    return Stream(name).Stream(std::to_string(index));
  }

  uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  double Uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double Normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  bool Bernoulli(double p) { return Uniform() < p; }
  double Beta(double alpha, double beta) {
    const double x = std::gamma_distribution<double>(alpha, 1.0)(engine_);
    const double y = std::gamma_distribution<double>(beta, 1.0)(engine_);
    return x / (x + y);
  }
  uint64_t Next() { return engine_(); }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

inline double Expit(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace rise

#endif  // RISE_COMMON_HPP_
