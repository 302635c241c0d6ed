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

// Doubly-robust policy-tree baselines: AIPW scores per arm, then an exact
// search over axis-aligned trees of depth at most two.

#ifndef RISE_DRBASELINES_HPP_
#define RISE_DRBASELINES_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "rise/data.hpp"
#include "rise/learners.hpp"
#include "rise/policy.hpp"

namespace rise {

inline constexpr double kPropensityClip = 0.01;

// P(A = +1 | x [, s]): a known design constant or a fitted logistic model.
class Propensity {
 public:
  static Propensity Known(double p_plus);
  static Propensity Fitted(Predictor clf, bool use_s, SensitiveEncoder enc);

  bool known() const { return !clf_.has_value(); }
  // Clipped to [kPropensityClip, 1 - kPropensityClip] when fitted.
  double Plus(std::span<const double> x, std::span<const double> s) const;
  Vector PlusBatch(const RowMatrix& x, const RowMatrix& s) const;
  nlohmann::json ToJson() const;

 private:
  Propensity() = default;
  double constant_ = 0.5;
  std::optional<Predictor> clf_;
  bool use_s_ = false;
  SensitiveEncoder encoder_;
};

// Throws FitError when only one arm is present.
Propensity FitPropensity(const Dataset& train, bool use_s,
                         const LearnerConfig& cfg);

struct ScoreTable {
  Vector gamma_plus;
  Vector gamma_minus;

  Index size() const { return gamma_plus.size(); }
  double gamma(Index i, Action a) const {
    return IsTreated(a) ? gamma_plus[i] : gamma_minus[i];
  }
};

// gamma_a(i) = mu_a(i) + 1{a_i = a} (y_i - mu_a(i)) / p_a(i). mu reads s only
// when om.use_s().
ScoreTable AipwScores(const Dataset& train, const OutcomeModel& om,
                      const Propensity& prop, int threads = 0);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  Action action = Action::kMinus;  // leaves only
  int left = -1;   // x[feature] <= threshold
  int right = -1;
};

class TreePolicy {
 public:
  TreePolicy() : nodes_{TreeNode{}} {}
  explicit TreePolicy(std::vector<TreeNode> nodes);
  static TreePolicy Leaf(Action a);
  static TreePolicy Stump(int feature, double threshold, Action left,
                          Action right);

  Action Decide(std::span<const double> x) const;
  int depth() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  nlohmann::json ToJson() const;

 private:
  std::vector<TreeNode> nodes_;  // root at 0
};

// Sum over rows of gamma_{d(x_i)}(i), accumulated in row order.
double TreeObjective(const TreePolicy& tree, const RowMatrix& x,
                     const ScoreTable& scores);

// Exact maximizer over trees of depth <= depth (1 or 2) whose thresholds are
// midpoints between consecutive distinct values of a feature in x. Among
// equal objectives the earliest candidate wins, ordering candidates as: leaf
// -1, leaf +1, then splits by (feature, threshold, left child, right child)
// with children ordered the same way. One sweep per root feature, run in
// parallel; O(p^2 n log n).
TreePolicy FitPolicyTree(const RowMatrix& x, const ScoreTable& scores,
                         int depth, int threads = 0);
// Serial O(p^2 n^2) version of FitPolicyTree with the same tie-breaking.
TreePolicy FitPolicyTreeReference(const RowMatrix& x, const ScoreTable& scores,
                                  int depth);

class TreeScore : public ScoreModel {
 public:
  explicit TreeScore(TreePolicy tree) : tree_(std::move(tree)) {}
  double Score(std::span<const double> x) const override {
    return ToSign(tree_.Decide(x));
  }
  nlohmann::json ToJson() const override;
  const TreePolicy& tree() const { return tree_; }

 private:
  TreePolicy tree_;
};

// PT-Base when om ignores s, PT-Exp when it reads s.
Policy FitPolicyTreeWith(const Dataset& train, const OutcomeModel& om,
                         const Propensity& prop, int depth, uint64_t tie_seed,
                         int threads = 0);

}  // namespace rise

#endif  // RISE_DRBASELINES_HPP_
