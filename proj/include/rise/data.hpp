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

// Tabular causal data: rows (x, s, a, y), synthetic benchmark generators with
// oracle access to E(Y | X, S, A), CSV ingestion and train/test splitting.

#ifndef RISE_DATA_HPP_
#define RISE_DATA_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rise/common.hpp"

namespace rise {

using Index = Eigen::Index;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::span<const double> RowSpan(const RowMatrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<size_t>(m.cols())};
}

enum class SensitiveKind { kDiscrete, kContinuous };

// Read-only view of one row.
struct Sample {
  std::span<const double> x;
  std::span<const double> s;
  Action a;
  double y;
};

// Immutable after construction. Discrete sensitive coordinates hold their
// level codes as doubles.
class Dataset {
 public:
  Dataset(RowMatrix x, RowMatrix s, std::vector<Action> a, Vector y,
          std::vector<std::string> feature_names,
          std::vector<std::string> sensitive_names,
          std::vector<SensitiveKind> s_kind);

  Index size() const { return x_.rows(); }
  Index num_features() const { return x_.cols(); }
  Index num_sensitive() const { return s_.cols(); }

  const RowMatrix& x() const { return x_; }
  const RowMatrix& s() const { return s_; }
  const std::vector<Action>& a() const { return a_; }
  const Vector& y() const { return y_; }
  const std::vector<std::string>& feature_names() const {
    return feature_names_;
  }
  const std::vector<std::string>& sensitive_names() const {
    return sensitive_names_;
  }
  const std::vector<SensitiveKind>& s_kind() const { return s_kind_; }

  Sample sample(Index i) const {
    return {RowSpan(x_, i), RowSpan(s_, i), a_[i], y_[i]};
  }

  Index CountAction(Action action) const;
  std::vector<Index> RowsWithAction(Action action) const;
  Dataset Subset(std::span<const Index> rows) const;
  // Same rows with the feature matrix replaced.
  Dataset WithFeatures(RowMatrix x) const;
  // Same rows with outcomes replaced.
  Dataset WithOutcomes(Vector y) const;

 private:
  RowMatrix x_;
  RowMatrix s_;
  std::vector<Action> a_;
  Vector y_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> sensitive_names_;
  std::vector<SensitiveKind> s_kind_;
};

// Sorted distinct values of each discrete sensitive column.
std::vector<std::vector<double>> ObservedLevels(const Dataset& ds);

// Per-column affine map to zero mean / unit sample sd. Columns flagged as
// non-continuous (or with zero variance) are passed through centered-only or
// untouched.
class Standardizer {
 public:
  Standardizer() = default;
  // Columns with at most two distinct values are treated as indicators and
  // left as-is when skip_indicators is set.
  static Standardizer Fit(const RowMatrix& m, bool skip_indicators);

  RowMatrix Apply(const RowMatrix& m) const;
  void ApplyInPlace(std::span<double> row) const;
  Index dim() const { return static_cast<Index>(mean_.size()); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }
  // Indices of zero-variance columns seen during Fit.
  const std::vector<Index>& degenerate() const { return degenerate_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<Index> degenerate_;
};

// ---- Synthetic benchmarks --------------------------------------------------

enum class ScenarioKind {
  kExample1,
  kExample2,
  kNoiseS,
  kPositivityViolation,
  kConfoundingViolation,
};

struct SyntheticScenario {
  ScenarioKind kind = ScenarioKind::kExample1;
  SensitiveKind s_kind = SensitiveKind::kDiscrete;
  double noise_sd = 1.0;
};

ScenarioKind ParseScenarioKind(const std::string& name);
std::string ToString(ScenarioKind kind);
SensitiveKind ParseSensitiveKind(const std::string& name);
std::string ToString(SensitiveKind kind);

// True when the treatment assignment is a known Bernoulli(0.5) design.
bool IsRandomized(ScenarioKind kind);

using MeanFn = std::function<double(std::span<const double> x,
                                    std::span<const double> s, Action a)>;
using PropensityFn =
    std::function<double(std::span<const double> x, std::span<const double> s)>;

// Ground truth of a generating process, as a function of the latent
// covariates.
struct OracleModel {
  MeanFn mean_fn;
  PropensityFn propensity_fn;
  double noise_sd = 1.0;
};

struct SyntheticDraw {
  Dataset data;
  OracleModel oracle;
  // Covariates the outcome was generated from. Equal to data.x() except under
  // the confounding violation, where data.x() carries measurement noise.
  RowMatrix latent_x;
};

// Pure function of (scenario, n, seed).
SyntheticDraw Generate(const SyntheticScenario& scenario, Index n,
                       uint64_t seed);

// Builds the oracle without drawing data.
OracleModel MakeOracle(const SyntheticScenario& scenario);

// ---- CSV ingestion ---------------------------------------------------------

struct CsvSchema {
  std::vector<std::string> features;
  std::vector<std::string> sensitive;
  // One per sensitive column; defaults to continuous when empty.
  std::vector<SensitiveKind> sensitive_kinds;
  std::string action;
  // Raw cell text -> action. Empty means {"0","-1"} -> -1 and {"1"} -> +1.
  std::vector<std::pair<std::string, Action>> action_codes;
  std::string outcome;
  // (column, transform) pairs; the only transform is "log1p".
  std::vector<std::pair<std::string, std::string>> transforms;
};

Dataset LoadCsv(const std::string& path, const CsvSchema& schema);

// Shuffled disjoint partition. Non-indicator feature columns are standardized
// with train statistics when standardize is set.
std::pair<Dataset, Dataset> Split(const Dataset& ds, double train_fraction,
                                  uint64_t seed, bool standardize = true);

}  // namespace rise

#endif  // RISE_DATA_HPP_
