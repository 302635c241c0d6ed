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

// Test-set evaluation: worst-case objective, value, vulnerable subgroup, and
// aggregation over replications.

#ifndef RISE_EVAL_HPP_
#define RISE_EVAL_HPP_

#include <optional>
#include <string>
#include <vector>

#include "rise/data.hpp"
#include "rise/learners.hpp"
#include "rise/policy.hpp"

namespace rise {

enum class EvalSource { kOracle, kFitted };

// Outcome model bound to one test set. G values, the worst arm and the
// vulnerable flags are computed once per unit at construction.
class EvalModel {
 public:
  // latent_x: covariates the oracle reads (defaults to test.x()). quantile_cfg
  // is used only for continuous specs.
  static EvalModel Oracle(const Dataset& test, MeanFn mean_fn,
                          const SensitiveSpec& spec,
                          const LearnerConfig& quantile_cfg,
                          const RowMatrix* latent_x = nullptr,
                          int threads = 0);
  // om must have been fitted on training data only.
  static EvalModel Fitted(const Dataset& test, OutcomeModel om,
                          const SensitiveSpec& spec,
                          const LearnerConfig& quantile_cfg, int threads = 0);

  EvalSource source() const { return source_; }
  Index size() const { return static_cast<Index>(g_plus_.size()); }
  const SensitiveSpec& spec() const { return spec_; }

  // E(Y | x_i, s, a) for test unit i.
  double Mean(Index i, std::span<const double> s, Action a) const;
  // At the unit's own s.
  double MeanObserved(Index i, Action a) const {
    return IsTreated(a) ? observed_plus_[i] : observed_minus_[i];
  }
  double G(Index i, Action a) const {
    return IsTreated(a) ? g_plus_[i] : g_minus_[i];
  }
  Action WorstArm(Index i) const {
    return g_plus_[i] < g_minus_[i] ? Action::kPlus : Action::kMinus;
  }
  bool Vulnerable(Index i) const { return vulnerable_[i] != 0; }
  const std::vector<char>& vulnerable_flags() const { return vulnerable_; }
  Index num_vulnerable() const;

 private:
  EvalModel() = default;
  void Prepare(const Dataset& test, const LearnerConfig& quantile_cfg,
               int threads);
  double FlatTolerance(double scale) const;

  EvalSource source_ = EvalSource::kOracle;
  SensitiveSpec spec_;
  OutcomeModel model_ = OutcomeModel::FromFunction({});
  RowMatrix x_;  // what model_ reads
  std::vector<double> g_plus_, g_minus_;
  std::vector<double> observed_plus_, observed_minus_;
  std::vector<char> vulnerable_;
};

// Discrete: a* = arm with the smaller infimum; vulnerable iff s attains it
// (tolerance 1e-9 for oracle models, 0.05 x range over levels for fitted
// ones). Continuous: vulnerable iff E(Y | x, s, a*) <= Q_{a*}(x). A unit whose
// outcome does not move with s is never vulnerable.
bool IdentifyVulnerable(const EvalModel& em, Index i);

struct GroupMetric {
  std::optional<double> all;
  std::optional<double> vulnerable;
};

// Mean over test units of G(d(x_i)); empty test throws EvalError.
GroupMetric EstimateObjective(const Policy& policy, const EvalModel& em,
                              const Dataset& test);
GroupMetric EstimateObjective(std::span<const Action> decisions,
                              const EvalModel& em);

// Self-normalized IPW with design propensity P(A = +1) = pi_plus. Throws
// EvalError when no unit matches d; flags only restrict the vulnerable sum.
GroupMetric EstimateValueRandomized(std::span<const Action> decisions,
                                    const Dataset& test, double pi_plus,
                                    const std::vector<char>* flags = nullptr);
// Plug-in mean of E(Y | x_i, s_i, d(x_i)).
GroupMetric EstimateValueObservational(std::span<const Action> decisions,
                                       const EvalModel& em);

enum class ValueDesign { kRandomized, kObservational };

struct MetricsRow {
  std::string method;
  std::optional<double> objective_all;
  std::optional<double> objective_vulnerable;
  std::optional<double> value_all;
  std::optional<double> value_vulnerable;
  Index n_vulnerable = 0;
};

MetricsRow Evaluate(const std::string& method, const Policy& policy,
                    const EvalModel& em, const Dataset& test,
                    ValueDesign design, double pi_plus = 0.5);

struct AggregateCell {
  std::string method;
  std::string metric;  // objective | value
  std::string group;   // all | vulnerable
  std::optional<double> mean;
  std::optional<double> se;
  int count = 0;       // replications with a value
};

struct AggregateReport {
  int replications = 0;
  std::vector<AggregateCell> cells;  // method-major; objective before value, all before vulnerable
  std::vector<std::string> warnings;
};

// Methods ordered base, exp, pt_base, pt_exp, rise, then others by name.
std::vector<std::string> CanonicalMethodOrder(std::vector<std::string> methods);

// rows[r] holds every method's row for replication r. Throws EvalError when
// method sets differ between replications.
AggregateReport Aggregate(const std::vector<std::vector<MetricsRow>>& rows);

}  // namespace rise

#endif  // RISE_EVAL_HPP_
