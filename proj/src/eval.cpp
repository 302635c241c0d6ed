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

#include "rise/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

namespace rise {

namespace {

constexpr double kOracleTolerance = 1e-9;
constexpr double kFittedRangeFraction = 0.05;
constexpr int kFlatProbes = 16;

std::optional<double> MeanOf(double sum, Index count) {
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

EvalModel EvalModel::Oracle(const Dataset& test, MeanFn mean_fn,
                            const SensitiveSpec& spec,
                            const LearnerConfig& quantile_cfg,
                            const RowMatrix* latent_x, int threads) {
  if (!mean_fn) throw ConfigError("oracle evaluation needs a mean function");
  EvalModel em;
  em.source_ = EvalSource::kOracle;
  em.spec_ = spec;
  em.model_ = OutcomeModel::FromFunction(std::move(mean_fn), true);
  em.x_ = latent_x ? *latent_x : test.x();
  if (em.x_.rows() != test.size()) {
    throw ConfigError("latent covariates do not match the test rows");
  }
  em.Prepare(test, quantile_cfg, threads);
  return em;
}

EvalModel EvalModel::Fitted(const Dataset& test, OutcomeModel om,
                            const SensitiveSpec& spec,
                            const LearnerConfig& quantile_cfg, int threads) {
  if (!om.use_s()) {
    throw ConfigError("evaluation model must read the sensitive variables");
  }
  EvalModel em;
  em.source_ = EvalSource::kFitted;
  em.spec_ = spec;
  em.model_ = std::move(om);
  em.x_ = test.x();
  em.Prepare(test, quantile_cfg, threads);
  return em;
}

double EvalModel::FlatTolerance(double scale) const {
  return kOracleTolerance * std::max(1.0, std::abs(scale));
}

void EvalModel::Prepare(const Dataset& test, const LearnerConfig& quantile_cfg,
                        int threads) {
  const Index n = test.size();
  if (n == 0) throw EvalError("empty test set");
  spec_.Validate();
  if (spec_.kind == SensitiveKind::kDiscrete &&
      static_cast<Index>(spec_.levels.size()) != test.num_sensitive()) {
    throw ConfigError("spec does not match the sensitive columns of the test set");
  }
  const Vector obs_plus = model_.PredictBatch(x_, test.s(), Action::kPlus, threads);
  const Vector obs_minus = model_.PredictBatch(x_, test.s(), Action::kMinus, threads);
  observed_plus_.assign(obs_plus.data(), obs_plus.data() + n);
  observed_minus_.assign(obs_minus.data(), obs_minus.data() + n);
  vulnerable_.assign(n, 0);

  if (spec_.kind == SensitiveKind::kDiscrete) {
    const auto product = spec_.LevelProduct();
    const double inf = std::numeric_limits<double>::infinity();
    std::array<Vector, 2> lo = {Vector::Constant(n, inf), Vector::Constant(n, inf)};
    std::array<Vector, 2> hi = {Vector::Constant(n, -inf), Vector::Constant(n, -inf)};
    for (const auto& level : product) {
      for (Action a : kBothActions) {
        const Vector v = model_.PredictAtLevel(x_, level, a, threads);
        lo[ArmIndex(a)] = lo[ArmIndex(a)].cwiseMin(v);
        hi[ArmIndex(a)] = hi[ArmIndex(a)].cwiseMax(v);
      }
    }
    g_plus_.assign(lo[1].data(), lo[1].data() + n);
    g_minus_.assign(lo[0].data(), lo[0].data() + n);
    for (Index i = 0; i < n; ++i) {
      const Action worst = WorstArm(i);
      const double g = G(i, worst);
      const double range = hi[ArmIndex(worst)][i] - g;
      if (range <= FlatTolerance(g)) continue;
      const double tol = source_ == EvalSource::kOracle
                             ? FlatTolerance(g)
                             : kFittedRangeFraction * range;
      vulnerable_[i] = (MeanObserved(i, worst) - g <= tol) ? 1 : 0;
    }
    return;
  }

  for (Action a : kBothActions) {
    const Vector pseudo = IsTreated(a) ? obs_plus : obs_minus;
    LearnerConfig cfg = quantile_cfg;
    cfg.seed = Rng(quantile_cfg.seed)
                   .Stream(IsTreated(a) ? "eval.quantile.plus"
                                        : "eval.quantile.minus")
                   .Next();
    const Predictor q = FitQuantile(x_, pseudo, spec_.tau, cfg);
    const Vector g = q.PredictBatch(x_);
    (IsTreated(a) ? g_plus_ : g_minus_).assign(g.data(), g.data() + n);
  }
  // Spread over probed s values, to detect outcomes that ignore s.
  std::array<Vector, 2> lo = {obs_minus, obs_plus};
  std::array<Vector, 2> hi = lo;
  const int probes = static_cast<int>(std::min<Index>(kFlatProbes, n));
  for (int k = 0; k < probes; ++k) {
    const Index row = static_cast<Index>(k) * n / probes;
    for (Action a : kBothActions) {
      const Vector v = model_.PredictAtLevel(x_, RowSpan(test.s(), row), a, threads);
      lo[ArmIndex(a)] = lo[ArmIndex(a)].cwiseMin(v);
      hi[ArmIndex(a)] = hi[ArmIndex(a)].cwiseMax(v);
    }
  }
  for (Index i = 0; i < n; ++i) {
    const Action worst = WorstArm(i);
    const int k = ArmIndex(worst);
    const double obs = MeanObserved(i, worst);
    if (hi[k][i] - lo[k][i] <= FlatTolerance(obs)) continue;
    vulnerable_[i] = obs <= G(i, worst) ? 1 : 0;
  }
}

double EvalModel::Mean(Index i, std::span<const double> s, Action a) const {
  return model_.Predict(RowSpan(x_, i), s, a);
}

Index EvalModel::num_vulnerable() const {
  return static_cast<Index>(
      std::count(vulnerable_.begin(), vulnerable_.end(), char{1}));
}

bool IdentifyVulnerable(const EvalModel& em, Index i) {
  return em.Vulnerable(i);
}

GroupMetric EstimateObjective(std::span<const Action> decisions,
                              const EvalModel& em) {
  if (decisions.empty()) throw EvalError("empty test set");
  if (static_cast<Index>(decisions.size()) != em.size()) {
    throw EvalError("decisions do not match the evaluation model");
  }
  double all = 0.0, vul = 0.0;
  Index n_vul = 0;
  for (size_t i = 0; i < decisions.size(); ++i) {
    const double g = em.G(static_cast<Index>(i), decisions[i]);
    all += g;
    if (em.Vulnerable(static_cast<Index>(i))) {
      vul += g;
      ++n_vul;
    }
  }
  return {MeanOf(all, static_cast<Index>(decisions.size())), MeanOf(vul, n_vul)};
}

GroupMetric EstimateObjective(const Policy& policy, const EvalModel& em,
                              const Dataset& test) {
  if (test.size() == 0) throw EvalError("empty test set");
  const auto d = policy.DecideBatch(test.x());
  return EstimateObjective(d, em);
}

GroupMetric EstimateValueRandomized(std::span<const Action> decisions,
                                    const Dataset& test, double pi_plus,
                                    const std::vector<char>* flags) {
  if (!(pi_plus > 0.0 && pi_plus < 1.0)) {
    throw EvalError("design propensity must lie in (0, 1)");
  }
  if (static_cast<Index>(decisions.size()) != test.size()) {
    throw EvalError("decisions do not match the test set");
  }
  double num = 0.0, den = 0.0, vnum = 0.0, vden = 0.0;
  for (Index i = 0; i < test.size(); ++i) {
    if (test.a()[i] != decisions[i]) continue;
    const double w =
        1.0 / (IsTreated(test.a()[i]) ? pi_plus : 1.0 - pi_plus);
    num += w * test.y()[i];
    den += w;
    if (flags && (*flags)[i]) {
      vnum += w * test.y()[i];
      vden += w;
    }
  }
  if (den == 0.0) throw EvalError("no test unit received the policy's action");
  GroupMetric out;
  out.all = num / den;
  if (vden > 0.0) out.vulnerable = vnum / vden;
  return out;
}

GroupMetric EstimateValueObservational(std::span<const Action> decisions,
                                       const EvalModel& em) {
  if (decisions.empty()) throw EvalError("empty test set");
  if (static_cast<Index>(decisions.size()) != em.size()) {
    throw EvalError("decisions do not match the evaluation model");
  }
  double all = 0.0, vul = 0.0;
  Index n_vul = 0;
  for (size_t i = 0; i < decisions.size(); ++i) {
    const double v = em.MeanObserved(static_cast<Index>(i), decisions[i]);
    all += v;
    if (em.Vulnerable(static_cast<Index>(i))) {
      vul += v;
      ++n_vul;
    }
  }
  return {MeanOf(all, static_cast<Index>(decisions.size())), MeanOf(vul, n_vul)};
}

MetricsRow Evaluate(const std::string& method, const Policy& policy,
                    const EvalModel& em, const Dataset& test,
                    ValueDesign design, double pi_plus) {
  if (test.size() == 0) throw EvalError("empty test set");
  const auto d = policy.DecideBatch(test.x());
  MetricsRow row;
  row.method = method;
  row.n_vulnerable = em.num_vulnerable();
  const GroupMetric obj = EstimateObjective(d, em);
  const GroupMetric val =
      design == ValueDesign::kRandomized
          ? EstimateValueRandomized(d, test, pi_plus, &em.vulnerable_flags())
          : EstimateValueObservational(d, em);
  row.objective_all = obj.all;
  row.value_all = val.all;
  if (row.n_vulnerable > 0) {
    row.objective_vulnerable = obj.vulnerable;
    row.value_vulnerable = val.vulnerable;
  }
  return row;
}

std::vector<std::string> CanonicalMethodOrder(std::vector<std::string> methods) {
  static const std::map<std::string, int> kRank = {
      {"base", 0}, {"exp", 1}, {"pt_base", 2}, {"pt_exp", 3}, {"rise", 4}};
  auto rank = [](const std::string& m) {
    auto it = kRank.find(m);
    return it == kRank.end() ? 5 : it->second;
  };
  std::sort(methods.begin(), methods.end(),
            [&](const std::string& a, const std::string& b) {
              const int ra = rank(a), rb = rank(b);
              return ra != rb ? ra < rb : a < b;
            });
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  return methods;
}

AggregateReport Aggregate(const std::vector<std::vector<MetricsRow>>& rows) {
  if (rows.empty()) throw EvalError("no replications to aggregate");
  std::set<std::string> reference;
  for (const auto& r : rows.front()) reference.insert(r.method);
  for (size_t rep = 0; rep < rows.size(); ++rep) {
    std::set<std::string> seen;
    for (const auto& r : rows[rep]) {
      if (!seen.insert(r.method).second) {
        throw EvalError("replication " + std::to_string(rep) +
                        " reports method '" + r.method + "' twice");
      }
    }
    if (seen != reference) {
      throw EvalError("replication " + std::to_string(rep) +
                      " has a different method set");
    }
  }

  AggregateReport report;
  report.replications = static_cast<int>(rows.size());
  if (rows.size() == 1) {
    report.warnings.push_back(
        "single replication: standard errors reported as 0");
  }
  using Field = std::optional<double> MetricsRow::*;
  const std::array<std::tuple<const char*, const char*, Field>, 4> kFields = {{
      {"objective", "all", &MetricsRow::objective_all},
      {"objective", "vulnerable", &MetricsRow::objective_vulnerable},
      {"value", "all", &MetricsRow::value_all},
      {"value", "vulnerable", &MetricsRow::value_vulnerable},
  }};
  const auto methods = CanonicalMethodOrder(
      std::vector<std::string>(reference.begin(), reference.end()));
  for (const auto& method : methods) {
    for (const auto& [metric, group, field] : kFields) {
      std::vector<double> values;
      for (const auto& rep : rows) {
        for (const auto& r : rep) {
          if (r.method == method && (r.*field).has_value()) {
            values.push_back(*(r.*field));
          }
        }
      }
      AggregateCell cell{method, metric, group, std::nullopt, std::nullopt,
                         static_cast<int>(values.size())};
      if (!values.empty()) {
        const bool identical =
            std::all_of(values.begin(), values.end(),
                        [&](double v) { return v == values.front(); });
        double sum = 0.0;
        for (double v : values) sum += v;
        const double m = sum / static_cast<double>(values.size());
        cell.mean = identical ? values.front() : m;
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        cell.se = (identical || values.size() < 2)
                      ? 0.0
                      : std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                            std::sqrt(static_cast<double>(values.size()));
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace rise
