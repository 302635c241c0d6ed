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

// Supervised building blocks: mean regression, pinball-loss quantile
// regression and weighted binary classification, with linear and small
// feed-forward variants and k-fold grid selection.

#ifndef RISE_LEARNERS_HPP_
#define RISE_LEARNERS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rise/data.hpp"
#include "rise/network.hpp"

namespace rise {

enum class Family { kLinear, kFeedforward };

struct LearnerConfig {
  Family family = Family::kFeedforward;
  std::vector<int> hidden_layers = {32};  // feedforward only
  Activation activation = Activation::kRelu;
  double learning_rate = 1e-2;
  int epochs = 40;
  int batch_size = 64;
  double ridge_penalty = 1e-4;
  uint64_t seed = 0;
  // Epochs without improving on the initial loss before giving up.
  int patience = 10;

  bool operator==(const LearnerConfig&) const = default;
};

nlohmann::json ToJson(const LearnerConfig& cfg);
// Missing keys keep their defaults; unknown keys and bad values throw
// ConfigError.
LearnerConfig LearnerConfigFromJson(const nlohmann::json& j);
void Validate(const LearnerConfig& cfg);

// Linear, then feed-forward with 1-2 layers x {32, 64} units, relu, learning
// rates {1e-2, 1e-3}, epochs {100, 200}.
std::vector<LearnerConfig> DefaultGrid();

enum class PredictorKind { kMean, kQuantile, kClassifierScore };

// Fitted model. Inputs are standardized internally with statistics of the
// fit data; predictions are on the original target scale.
class Predictor {
 public:
  Predictor() = default;

  PredictorKind kind() const { return kind_; }
  double tau() const { return tau_; }
  Index input_dim() const { return input_.dim(); }
  const LearnerConfig& config() const { return config_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  // Per-epoch training loss (empty for closed-form fits).
  const std::vector<double>& loss_trace() const { return trace_; }

  double Predict(std::span<const double> x) const;
  Vector PredictBatch(const RowMatrix& x) const;

  // Linear family only: raw-scale (slope_1, ..., slope_p, intercept).
  Vector LinearCoefficients() const;

  nlohmann::json ToJson() const;

 private:
  friend class PredictorBuilder;

  PredictorKind kind_ = PredictorKind::kMean;
  double tau_ = 0.5;
  LearnerConfig config_;
  Standardizer input_;
  double target_center_ = 0.0;
  double target_scale_ = 1.0;
  Network net_;
  std::vector<std::string> warnings_;
  std::vector<double> trace_;
};

// weights may be empty (unweighted).
Predictor FitMean(const RowMatrix& x, const Vector& y, const Vector& weights,
                  const LearnerConfig& cfg);

Predictor FitQuantile(const RowMatrix& x, const Vector& y, double tau,
                      const LearnerConfig& cfg);

// labels in {-1, +1}. The score's sign is the class decision.
Predictor FitWeightedClassifier(const RowMatrix& x, const Vector& labels,
                                const Vector& weights,
                                const LearnerConfig& cfg);

enum class Task { kMean, kQuantile, kClassifier };

struct TrainingData {
  RowMatrix x;
  Vector y;        // targets, or labels in {-1, +1} for the classifier
  Vector weights;  // may be empty
  double tau = 0.5;
};

Predictor Fit(Task task, const TrainingData& data, const LearnerConfig& cfg);

// Out-of-fold loss of one config: squared error, pinball loss, or weighted
// 0-1 loss, averaged over folds.
double CrossValidatedLoss(Task task, const TrainingData& data,
                          const LearnerConfig& cfg, int folds, uint64_t seed,
                          int threads = 0);

// Grid element with the smallest out-of-fold loss; ties go to the earlier
// element. Folds are fitted concurrently.
LearnerConfig Tune(Task task, const TrainingData& data,
                   std::span<const LearnerConfig> grid, int folds,
                   uint64_t seed, int threads = 0);

}  // namespace rise

#endif  // RISE_LEARNERS_HPP_
