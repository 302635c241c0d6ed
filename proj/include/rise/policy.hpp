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

// Robust decision-rule learning with sensitive variables.
//
// A rule d(x) may only read x, yet the outcome depends on a sensitive S that
// is observed during training. RISE scores each arm by a risk functional G of
// E(Y | X, S, A) over S (infimum for discrete S, tau-quantile for continuous
// S), then learns d by weighted classification: label sgn(g1 - g2), weight
// |g1 - g2|. The mean-optimal baselines (Base, Exp) are built the same way
// with G replaced by a conditional mean.

#ifndef RISE_POLICY_HPP_
#define RISE_POLICY_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rise/data.hpp"
#include "rise/learners.hpp"

namespace rise {

struct SensitiveSpec {
  SensitiveKind kind = SensitiveKind::kDiscrete;
  // Discrete only: one level set per sensitive variable.
  std::vector<std::vector<double>> levels;
  double tau = 0.25;  // continuous only
  size_t level_cap = 4096;

  void Validate() const;
  // Cartesian product of the level sets, first variable slowest.
  std::vector<std::vector<double>> LevelProduct() const;
};

// Discrete spec with the levels observed in ds.
SensitiveSpec DiscreteSpecFromData(const Dataset& ds, size_t level_cap = 4096);
SensitiveSpec ContinuousSpec(double tau);

// Maps a raw sensitive row to model inputs: discrete variables with more than
// two levels are one-hot encoded, everything else passes through.
class SensitiveEncoder {
 public:
  SensitiveEncoder() = default;
  static SensitiveEncoder Fit(const Dataset& ds);
  Index width() const { return width_; }
  void Encode(std::span<const double> s, std::span<double> out) const;

 private:
  std::vector<std::vector<double>> one_hot_levels_;  // empty = pass-through
  Index width_ = 0;
};

// T-learner: one regression per arm, or an injected ground-truth function.
class OutcomeModel {
 public:
  OutcomeModel(Predictor minus, Predictor plus, bool use_s,
               SensitiveEncoder encoder);
  static OutcomeModel FromFunction(MeanFn fn, bool use_s = true);

  bool use_s() const { return use_s_; }
  bool is_function() const { return static_cast<bool>(fn_); }
  const Predictor& arm(Action a) const;

  double Predict(std::span<const double> x, std::span<const double> s,
                 Action a) const;
  // Row-wise predictions; s is ignored when use_s is false.
  Vector PredictBatch(const RowMatrix& x, const RowMatrix& s, Action a,
                      int threads = 0) const;
  // Same sensitive row for every x.
  Vector PredictAtLevel(const RowMatrix& x, std::span<const double> s,
                        Action a, int threads = 0) const;

  nlohmann::json ToJson() const;

 private:
  OutcomeModel() = default;
  RowMatrix Inputs(const RowMatrix& x, const RowMatrix* s,
                   std::span<const double> fixed_s) const;

  std::optional<std::array<Predictor, 2>> arms_;
  MeanFn fn_;
  bool use_s_ = true;
  SensitiveEncoder encoder_;
};

// Throws FitError when an arm is missing or smaller than its input width.
OutcomeModel FitOutcomeModels(const Dataset& train, bool use_s,
                              const LearnerConfig& cfg);

struct ArmValues {
  Vector plus;   // g1: G under action +1
  Vector minus;  // g2: G under action -1
};

// Discrete: minimum of om over the level product at each x_i.
// Continuous: per arm, tau-quantile regression of om(x_i, s_i, a) on x_i.
ArmValues ComputeG(const Dataset& train, const OutcomeModel& om,
                   const SensitiveSpec& spec, const LearnerConfig& cfg,
                   int threads = 0);

// min over levels of om(x_i, level, arm); parallel over row blocks.
Vector InfimumOverLevels(const OutcomeModel& om, const RowMatrix& x,
                         const std::vector<std::vector<double>>& product,
                         Action arm, int threads = 0);
// Unit-at-a-time serial version of InfimumOverLevels.
Vector InfimumOverLevelsReference(
    const OutcomeModel& om, const RowMatrix& x,
    const std::vector<std::vector<double>>& product, Action arm);

struct ContrastTable {
  Vector g1;
  Vector g2;
  Vector label;   // sgn(g1 - g2), +1 on ties
  Vector weight;  // |g1 - g2|
};

ContrastTable BuildContrast(const Vector& g1, const Vector& g2);

// Sum over units of 1{d_i = +1} (g1_i - g2_i) for a decision vector d.
double ContrastObjective(const ContrastTable& table,
                         std::span<const Action> decisions);
// Sum of weight_i over units where decisions disagree with the label.
double WeightedMisclassification(const ContrastTable& table,
                                 std::span<const Action> decisions);

enum class MethodTag { kRise, kBase, kExp, kPtBase, kPtExp, kOracle };

std::string ToString(MethodTag tag);
MethodTag ParseMethodTag(const std::string& name);

// Real-valued score over x; sign is the decision.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual double Score(std::span<const double> x) const = 0;
  virtual Vector ScoreBatch(const RowMatrix& x) const;
  virtual nlohmann::json ToJson() const = 0;
};

class PredictorScore : public ScoreModel {
 public:
  explicit PredictorScore(Predictor model) : model_(std::move(model)) {}
  double Score(std::span<const double> x) const override;
  Vector ScoreBatch(const RowMatrix& x) const override;
  nlohmann::json ToJson() const override;

 private:
  Predictor model_;
};

// Yhat_{+1}(x) - Yhat_{-1}(x) of an outcome model fitted without s.
class ArmDifferenceScore : public ScoreModel {
 public:
  explicit ArmDifferenceScore(OutcomeModel om);
  double Score(std::span<const double> x) const override;
  Vector ScoreBatch(const RowMatrix& x) const override;
  nlohmann::json ToJson() const override;

 private:
  OutcomeModel om_;
};

class ConstantScore : public ScoreModel {
 public:
  explicit ConstantScore(double value) : value_(value) {}
  double Score(std::span<const double>) const override { return value_; }
  nlohmann::json ToJson() const override;

 private:
  double value_;
};

class FunctionScore : public ScoreModel {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  FunctionScore(Fn fn, std::string label)
      : fn_(std::move(fn)), label_(std::move(label)) {}
  double Score(std::span<const double> x) const override { return fn_(x); }
  nlohmann::json ToJson() const override;

 private:
  Fn fn_;
  std::string label_;
};

// Decision rule x -> {-1, +1}. A zero score is resolved by a coin seeded from
// (tie_seed, x), so repeated and concurrent calls agree.
class Policy {
 public:
  Policy(std::shared_ptr<const ScoreModel> score, MethodTag method,
         uint64_t tie_seed, nlohmann::json provenance = {});

  double Score(std::span<const double> x) const { return score_->Score(x); }
  Action Decide(std::span<const double> x) const;
  std::vector<Action> DecideBatch(const RowMatrix& x) const;

  MethodTag method() const { return method_; }
  uint64_t tie_seed() const { return tie_seed_; }
  // Method tag, learner configs and flattened parameters.
  nlohmann::json Describe() const;

 private:
  Action TieBreak(std::span<const double> x) const;

  std::shared_ptr<const ScoreModel> score_;
  MethodTag method_;
  uint64_t tie_seed_;
  nlohmann::json provenance_;
};

struct RiseConfigs {
  LearnerConfig outcome;
  LearnerConfig g;  // quantile regressions (continuous S)
  LearnerConfig classifier;
};

Policy FitRise(const Dataset& train, const SensitiveSpec& spec,
               const RiseConfigs& cfgs, uint64_t tie_seed, int threads = 0);
// RISE with a given outcome model (fitted with use_s = true, or an oracle).
Policy FitRiseWith(const Dataset& train, const OutcomeModel& om,
                   const SensitiveSpec& spec, const LearnerConfig& cfg_g,
                   const LearnerConfig& cfg_clf, uint64_t tie_seed,
                   int threads = 0);

Policy FitBase(const Dataset& train, const LearnerConfig& cfg,
               uint64_t tie_seed);
Policy FitBaseWith(const OutcomeModel& om_without_s, uint64_t tie_seed);

struct ExpConfigs {
  LearnerConfig outcome;
  LearnerConfig projection;
  LearnerConfig classifier;
};

// Per arm, mean regression of om(x_i, s_i, a) on x_i, predicted at train x.
ArmValues ProjectPseudoOutcomes(const Dataset& train, const OutcomeModel& om,
                                const LearnerConfig& cfg_proj, int threads = 0);

Policy FitExp(const Dataset& train, const SensitiveSpec& spec,
              const ExpConfigs& cfgs, uint64_t tie_seed, int threads = 0);
Policy FitExpWith(const Dataset& train, const OutcomeModel& om,
                  const LearnerConfig& cfg_proj, const LearnerConfig& cfg_clf,
                  uint64_t tie_seed, int threads = 0);

// Contrast -> weighted classifier on x, or a zero score when every weight is
// zero.
Policy PolicyFromContrast(const Dataset& train, const ContrastTable& table,
                          const LearnerConfig& cfg_clf, MethodTag method,
                          uint64_t tie_seed, nlohmann::json provenance);

}  // namespace rise

#endif  // RISE_POLICY_HPP_
