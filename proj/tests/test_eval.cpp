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

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rise/eval.hpp"

namespace {

using rise::Action;
using rise::RowMatrix;
using rise::Vector;

// One unit per cell of the toy table.
rise::Dataset ToyCells() {
  RowMatrix x(4, 1), s(4, 1);
  x << 0.25, 0.25, 0.75, 0.75;
  s << 0, 1, 0, 1;
  return rise::Dataset(x, s, std::vector<Action>(4, Action::kPlus), Vector::Zero(4),
                       {"x"}, {"s"}, {rise::SensitiveKind::kDiscrete});
}

rise::MeanFn ToyMean() {
  return [](std::span<const double> x, std::span<const double> s, Action a) {
    return oracle::Example1(x[0], s[0], static_cast<int>(a));
  };
}

rise::Policy Rule(double sign_left) {
  return rise::Policy(std::make_shared<rise::FunctionScore>(
                          [=](std::span<const double> x) {
                            return x[0] <= 0.5 ? sign_left : -sign_left;
                          },
                          "rule"),
                      rise::MethodTag::kOracle, 0);
}

rise::MetricsRow Row(const std::string& method, double v) {
  rise::MetricsRow r;
  r.method = method;
  r.objective_all = v;
  r.value_all = v;
  return r;
}

const rise::AggregateCell& Cell(const rise::AggregateReport& rep,
                                const std::string& method,
                                const std::string& metric,
                                const std::string& group) {
  for (const auto& c : rep.cells) {
    if (c.method == method && c.metric == metric && c.group == group) return c;
  }
  FAIL("missing cell");
  return rep.cells.front();
}

}  // namespace

TEST_CASE("toy objective, value and vulnerable cells") {
  const auto test = ToyCells();
  rise::SensitiveSpec spec;
  spec.levels = {{0, 1}};
  const auto em = rise::EvalModel::Oracle(test, ToyMean(), spec, rise::LearnerConfig{});

  // Vulnerable: s = 1 on the left (cell 0), s = 0 on the right (cell 5).
  CHECK(em.vulnerable_flags() == std::vector<char>{0, 1, 1, 0});
  CHECK(em.WorstArm(0) == Action::kPlus);
  CHECK(em.WorstArm(2) == Action::kMinus);

  const auto robust = Rule(-1);    // -1 left, +1 right
  const auto mean_opt = Rule(+1);  // +1 left, -1 right
  const auto r = rise::Evaluate("rise", robust, em, test,
                                rise::ValueDesign::kObservational);
  CHECK(std::abs(*r.objective_all - 12.0) < 1e-9);
  CHECK(std::abs(*r.value_all - 13.0) < 1e-9);
  CHECK(std::abs(*r.value_vulnerable - 14.0) < 1e-9);
  CHECK(r.n_vulnerable == 2);

  const auto b = rise::Evaluate("base", mean_opt, em, test,
                                rise::ValueDesign::kObservational);
  CHECK(std::abs(*b.objective_all - 2.5) < 1e-9);
  CHECK(std::abs(*b.value_all - 15.5) < 1e-9);
  CHECK(std::abs(*b.value_vulnerable - 2.5) < 1e-9);
}

TEST_CASE("self-normalized IPW by hand") {
  RowMatrix x = RowMatrix::Zero(4, 1), s = RowMatrix::Zero(4, 1);
  Vector y(4);
  y << 1, 2, 3, 4;
  const rise::Dataset test(x, s,
                           {Action::kMinus, Action::kPlus, Action::kMinus, Action::kPlus},
                           y, {"x"}, {"s"}, {rise::SensitiveKind::kDiscrete});
  const std::vector<Action> d(4, Action::kPlus);
  const auto v = rise::EstimateValueRandomized(d, test, 0.5);
  CHECK(*v.all == doctest::Approx(3.0));
  const std::vector<char> flags = {1, 1, 1, 0};
  CHECK(*rise::EstimateValueRandomized(d, test, 0.5, &flags).vulnerable ==
        doctest::Approx(2.0));
  // Full matching at pi = 0.5 is the sample mean.
  const std::vector<Action> own = test.a();
  CHECK(*rise::EstimateValueRandomized(own, test, 0.5).all == doctest::Approx(2.5));
  const std::vector<Action> none(4, Action::kMinus);
  const rise::Dataset treated(x, s, d, y, {"x"}, {"s"},
                              {rise::SensitiveKind::kDiscrete});
  CHECK_THROWS_AS(rise::EstimateValueRandomized(none, treated, 0.5), rise::EvalError);
}

TEST_CASE("constant outcome gives constant value") {
  const auto test = ToyCells();
  rise::SensitiveSpec spec;
  spec.levels = {{0, 1}};
  const auto em = rise::EvalModel::Oracle(
      test, [](auto, auto, Action) { return 4.0; }, spec, rise::LearnerConfig{});
  const std::vector<Action> d = {Action::kPlus, Action::kMinus, Action::kMinus,
                                 Action::kPlus};
  CHECK(*rise::EstimateValueObservational(d, em).all == 4.0);
  CHECK(*rise::EstimateObjective(d, em).all == 4.0);
  // Flat in s: nobody is vulnerable.
  CHECK(em.num_vulnerable() == 0);
  CHECK_FALSE(rise::EstimateObjective(d, em).vulnerable.has_value());
}

TEST_CASE("vulnerable flags under affine outcome maps") {
  for (auto sk : {rise::SensitiveKind::kDiscrete, rise::SensitiveKind::kContinuous}) {
    const auto draw =
        rise::Generate({rise::ScenarioKind::kExample2, sk, 1.0}, 1500, 8);
    const auto spec = sk == rise::SensitiveKind::kDiscrete
                          ? rise::DiscreteSpecFromData(draw.data)
                          : rise::ContinuousSpec(0.25);
    rise::LearnerConfig q;
    q.epochs = 30;
    q.seed = 3;
    const auto fn = draw.oracle.mean_fn;
    const auto a = rise::EvalModel::Oracle(draw.data, fn, spec, q);
    const auto b = rise::EvalModel::Oracle(
        draw.data, [fn](auto x, auto s, Action act) { return 3 * fn(x, s, act) + 7; },
        spec, q);
    int same = 0;
    for (rise::Index i = 0; i < draw.data.size(); ++i) {
      same += a.Vulnerable(i) == b.Vulnerable(i);
    }
    if (sk == rise::SensitiveKind::kDiscrete) {
      CHECK(same == draw.data.size());
    } else {
      CHECK(same >= 0.98 * draw.data.size());
    }
    CHECK(a.num_vulnerable() > 0);
  }
}

TEST_CASE("infimum objective never exceeds the plug-in value") {
  const auto draw = rise::Generate(
      {rise::ScenarioKind::kExample2, rise::SensitiveKind::kDiscrete, 1.0}, 2000, 9);
  const auto em = rise::EvalModel::Oracle(draw.data, draw.oracle.mean_fn,
                                          rise::DiscreteSpecFromData(draw.data),
                                          rise::LearnerConfig{});
  std::mt19937_64 gen(1);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<Action> d(draw.data.size());
    for (auto& v : d) v = gen() & 1 ? Action::kPlus : Action::kMinus;
    CHECK(*rise::EstimateObjective(d, em).all <=
          *rise::EstimateValueObservational(d, em).all);
  }
}

TEST_CASE("plug-in value agrees with a Monte-Carlo rollout") {
  const auto draw = rise::Generate(
      {rise::ScenarioKind::kExample1, rise::SensitiveKind::kDiscrete, 1.0}, 10000, 10);
  const auto em = rise::EvalModel::Oracle(draw.data, draw.oracle.mean_fn,
                                          rise::DiscreteSpecFromData(draw.data),
                                          rise::LearnerConfig{});
  const auto d = Rule(-1).DecideBatch(draw.data.x());
  const double plug = *rise::EstimateValueObservational(d, em).all;
  std::mt19937_64 gen(77);
  std::normal_distribution<double> noise(0, draw.oracle.noise_sd);
  double sum = 0, sq = 0;
  const double n = draw.data.size();
  for (rise::Index i = 0; i < draw.data.size(); ++i) {
    const double y = draw.oracle.mean_fn(rise::RowSpan(draw.latent_x, i),
                                         rise::RowSpan(draw.data.s(), i), d[i]) +
                     noise(gen);
    sum += y;
    sq += y * y;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(plug - mean) <= 3 * se);
}

TEST_CASE("aggregation") {
  SUBCASE("identical replications") {
    const auto rep = rise::Aggregate(
        {{Row("rise", 10)}, {Row("rise", 10)}, {Row("rise", 10)}});
    const auto& c = Cell(rep, "rise", "objective", "all");
    CHECK(*c.mean == 10);
    CHECK(*c.se == 0);
    CHECK(c.count == 3);
    CHECK(rep.warnings.empty());
    CHECK_FALSE(Cell(rep, "rise", "value", "vulnerable").mean.has_value());
  }
  SUBCASE("two replications") {
    const auto rep = rise::Aggregate({{Row("rise", 9)}, {Row("rise", 11)}});
    const auto& c = Cell(rep, "rise", "value", "all");
    CHECK(*c.mean == doctest::Approx(10));
    // sample sd sqrt(2) over sqrt(2) replications
    CHECK(*c.se == doctest::Approx(1.0));
  }
  SUBCASE("single replication warns") {
    const auto rep = rise::Aggregate({{Row("rise", 9)}});
    CHECK(*Cell(rep, "rise", "value", "all").se == 0);
    CHECK(rep.warnings.size() == 1);
  }
  SUBCASE("method order and consistency") {
    const auto rep = rise::Aggregate({{Row("rise", 1), Row("base", 2)}});
    CHECK(rep.cells.front().method == "base");
    CHECK(rep.cells.size() == 8);
    CHECK_THROWS_AS(rise::Aggregate({{Row("rise", 1)}, {Row("base", 1)}}),
                    rise::EvalError);
    CHECK_THROWS_AS(rise::Aggregate({}), rise::EvalError);
  }
  CHECK(rise::CanonicalMethodOrder({"zeta", "rise", "alpha", "exp", "base"}) ==
        std::vector<std::string>{"base", "exp", "rise", "alpha", "zeta"});
}
