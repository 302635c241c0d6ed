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

#include "rise/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "rise/parallel.hpp"

namespace rise {

// ---- SensitiveSpec ---------------------------------------------------------

void SensitiveSpec::Validate() const {
  if (kind == SensitiveKind::kContinuous) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
    return;
  }
  if (levels.empty()) throw ConfigError("discrete spec needs level sets");
  size_t product = 1;
  for (const auto& set : levels) {
    if (set.empty()) throw ConfigError("empty level set");
    for (double v : set) {
      if (!std::isfinite(v)) throw ConfigError("non-finite level value");
    }
    if (product > level_cap / set.size() + 1) {
      throw ConfigError("level product exceeds the cap of " +
                        std::to_string(level_cap));
    }
    product *= set.size();
  }
  if (product > level_cap) {
    throw ConfigError("level product " + std::to_string(product) +
                      " exceeds the cap of " + std::to_string(level_cap));
  }
}

std::vector<std::vector<double>> SensitiveSpec::LevelProduct() const {
  Validate();
  if (kind != SensitiveKind::kDiscrete) {
    throw ConfigError("level product requested for a continuous spec");
  }
  std::vector<std::vector<double>> out = {{}};
  for (const auto& set : levels) {
    std::vector<std::vector<double>> next;
    next.reserve(out.size() * set.size());
    for (const auto& prefix : out) {
      for (double v : set) {
        auto row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    }
    out = std::move(next);
  }
  return out;
}

SensitiveSpec DiscreteSpecFromData(const Dataset& ds, size_t level_cap) {
  SensitiveSpec spec;
  spec.kind = SensitiveKind::kDiscrete;
  spec.levels = ObservedLevels(ds);
  spec.level_cap = level_cap;
  spec.Validate();
  return spec;
}

SensitiveSpec ContinuousSpec(double tau) {
  SensitiveSpec spec;
  spec.kind = SensitiveKind::kContinuous;
  spec.tau = tau;
  spec.Validate();
  return spec;
}

namespace {

void CheckSpecMatchesData(const SensitiveSpec& spec, const Dataset& ds) {
  spec.Validate();
  if (ds.num_sensitive() == 0) {
    throw ConfigError("dataset has no sensitive columns");
  }
  if (spec.kind == SensitiveKind::kDiscrete &&
      static_cast<Index>(spec.levels.size()) != ds.num_sensitive()) {
    throw ConfigError("spec declares " + std::to_string(spec.levels.size()) +
                      " sensitive variables, data has " +
                      std::to_string(ds.num_sensitive()));
  }
}

LearnerConfig WithSeed(LearnerConfig cfg, std::string_view stream) {
  cfg.seed = Rng(cfg.seed).Stream(stream).Next();
  return cfg;
}

}  // namespace

// ---- SensitiveEncoder ------------------------------------------------------

SensitiveEncoder SensitiveEncoder::Fit(const Dataset& ds) {
  SensitiveEncoder enc;
  for (Index j = 0; j < ds.num_sensitive(); ++j) {
    std::vector<double> levels;
    if (ds.s_kind()[j] == SensitiveKind::kDiscrete) {
      std::set<double> distinct;
      for (Index i = 0; i < ds.size(); ++i) distinct.insert(ds.s()(i, j));
      if (distinct.size() > 2) levels.assign(distinct.begin(), distinct.end());
    }
    enc.width_ += levels.empty() ? 1 : static_cast<Index>(levels.size());
    enc.one_hot_levels_.push_back(std::move(levels));
  }
  return enc;
}

void SensitiveEncoder::Encode(std::span<const double> s,
                              std::span<double> out) const {
  size_t k = 0;
  for (size_t j = 0; j < one_hot_levels_.size(); ++j) {
    const auto& levels = one_hot_levels_[j];
    if (levels.empty()) {
      out[k++] = s[j];
      continue;
    }
    for (double v : levels) out[k++] = (s[j] == v) ? 1.0 : 0.0;
  }
}

// ---- OutcomeModel ----------------------------------------------------------

OutcomeModel::OutcomeModel(Predictor minus, Predictor plus, bool use_s,
                           SensitiveEncoder encoder)
    : arms_(std::array<Predictor, 2>{std::move(minus), std::move(plus)}),
      use_s_(use_s),
      encoder_(std::move(encoder)) {}

OutcomeModel OutcomeModel::FromFunction(MeanFn fn, bool use_s) {
  OutcomeModel om;
  om.fn_ = std::move(fn);
  om.use_s_ = use_s;
  return om;
}

const Predictor& OutcomeModel::arm(Action a) const {
  if (!arms_) throw FitError("outcome model wraps a function, not predictors");
  return (*arms_)[ArmIndex(a)];
}

RowMatrix OutcomeModel::Inputs(const RowMatrix& x, const RowMatrix* s,
                               std::span<const double> fixed_s) const {
  if (!use_s_) return x;
  const Index p = x.cols();
  RowMatrix in(x.rows(), p + encoder_.width());
  in.leftCols(p) = x;
  for (Index i = 0; i < x.rows(); ++i) {
    std::span<double> out(in.data() + i * in.cols() + p,
                          static_cast<size_t>(encoder_.width()));
    encoder_.Encode(s ? RowSpan(*s, i) : fixed_s, out);
  }
  return in;
}

double OutcomeModel::Predict(std::span<const double> x,
                             std::span<const double> s, Action a) const {
  if (fn_) return fn_(x, s, a);
  if (!use_s_) return arm(a).Predict(x);
  std::vector<double> in(x.begin(), x.end());
  in.resize(x.size() + encoder_.width());
  encoder_.Encode(s, {in.data() + x.size(), static_cast<size_t>(encoder_.width())});
  return arm(a).Predict(in);
}

Vector OutcomeModel::PredictBatch(const RowMatrix& x, const RowMatrix& s,
                                  Action a, int threads) const {
  if (fn_) {
    Vector out(x.rows());
    parallel::ForStatic(x.rows(), threads, [&](int64_t i) {
      out[i] = fn_(RowSpan(x, i), RowSpan(s, i), a);
    });
    return out;
  }
  return arm(a).PredictBatch(Inputs(x, &s, {}));
}

Vector OutcomeModel::PredictAtLevel(const RowMatrix& x,
                                    std::span<const double> s, Action a,
                                    int threads) const {
  if (fn_) {
    Vector out(x.rows());
    parallel::ForStatic(x.rows(), threads, [&](int64_t i) {
      out[i] = fn_(RowSpan(x, i), s, a);
    });
    return out;
  }
  return arm(a).PredictBatch(Inputs(x, nullptr, s));
}

nlohmann::json OutcomeModel::ToJson() const {
  nlohmann::json j;
  j["use_s"] = use_s_;
  if (fn_) {
    j["source"] = "function";
  } else {
    j["source"] = "fitted";
    j["arm_minus"] = arm(Action::kMinus).ToJson();
    j["arm_plus"] = arm(Action::kPlus).ToJson();
  }
  return j;
}

OutcomeModel FitOutcomeModels(const Dataset& train, bool use_s,
                              const LearnerConfig& cfg) {
  const SensitiveEncoder encoder =
      use_s ? SensitiveEncoder::Fit(train) : SensitiveEncoder();
  const Index width = train.num_features() + (use_s ? encoder.width() : 0);
  std::array<std::optional<Predictor>, 2> fitted;
  for (Action a : kBothActions) {
    const auto rows = train.RowsWithAction(a);
    if (rows.empty()) {
      throw FitError(std::string("arm ") + (IsTreated(a) ? "+1" : "-1") +
                     " has no training samples");
    }
    if (static_cast<Index>(rows.size()) < width) {
      throw FitError("arm " + std::string(IsTreated(a) ? "+1" : "-1") +
                     " has " + std::to_string(rows.size()) +
                     " samples for " + std::to_string(width) + " inputs");
    }
    const Dataset arm = train.Subset(rows);
    RowMatrix in = arm.x();
    if (use_s) {
      in.conservativeResize(Eigen::NoChange, width);
      for (Index i = 0; i < arm.size(); ++i) {
        encoder.Encode(RowSpan(arm.s(), i),
                       {in.data() + i * width + arm.num_features(),
                        static_cast<size_t>(encoder.width())});
      }
    }
    fitted[ArmIndex(a)] = FitMean(
        in, arm.y(), Vector(),
        WithSeed(cfg, IsTreated(a) ? "outcome.plus" : "outcome.minus"));
  }
  return OutcomeModel(std::move(*fitted[0]), std::move(*fitted[1]), use_s,
                      encoder);
}

// ---- G and contrasts -------------------------------------------------------

Vector InfimumOverLevels(const OutcomeModel& om, const RowMatrix& x,
                         const std::vector<std::vector<double>>& product,
                         Action arm, int threads) {
  constexpr Index kBlock = 512;
  const Index n = x.rows();
  Vector out = Vector::Constant(n, std::numeric_limits<double>::infinity());
  const Index blocks = (n + kBlock - 1) / kBlock;
  parallel::For(blocks, threads, [&](int64_t b) {
    const Index start = b * kBlock;
    const Index len = std::min(kBlock, n - start);
    const RowMatrix xb = x.middleRows(start, len);
    for (const auto& level : product) {
      const Vector v = om.PredictAtLevel(xb, level, arm, 1);
      for (Index k = 0; k < len; ++k) {
        out[start + k] = std::min(out[start + k], v[k]);
      }
    }
  });
  return out;
}

Vector InfimumOverLevelsReference(
    const OutcomeModel& om, const RowMatrix& x,
    const std::vector<std::vector<double>>& product, Action arm) {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& level : product) {
      best = std::min(best, om.Predict(RowSpan(x, i), level, arm));
    }
    out[i] = best;
  }
  return out;
}

ArmValues ComputeG(const Dataset& train, const OutcomeModel& om,
                   const SensitiveSpec& spec, const LearnerConfig& cfg,
                   int threads) {
  CheckSpecMatchesData(spec, train);
  if (!om.use_s()) {
    throw ConfigError("G requires an outcome model that uses s");
  }
  ArmValues g;
  if (spec.kind == SensitiveKind::kDiscrete) {
    const auto product = spec.LevelProduct();
    g.plus = InfimumOverLevels(om, train.x(), product, Action::kPlus, threads);
    g.minus = InfimumOverLevels(om, train.x(), product, Action::kMinus, threads);
    return g;
  }
  for (Action a : kBothActions) {
    const Vector pseudo = om.PredictBatch(train.x(), train.s(), a, threads);
    const Predictor q = FitQuantile(
        train.x(), pseudo, spec.tau,
        WithSeed(cfg, IsTreated(a) ? "quantile.plus" : "quantile.minus"));
    (IsTreated(a) ? g.plus : g.minus) = q.PredictBatch(train.x());
  }
  return g;
}

ContrastTable BuildContrast(const Vector& g1, const Vector& g2) {
  if (g1.size() != g2.size()) throw FitError("contrast inputs differ in length");
  ContrastTable t{g1, g2, Vector(g1.size()), Vector(g1.size())};
  for (Index i = 0; i < g1.size(); ++i) {
    const double diff = g1[i] - g2[i];
    t.label[i] = diff < 0.0 ? -1.0 : 1.0;
    t.weight[i] = std::abs(diff);
  }
  return t;
}

double ContrastObjective(const ContrastTable& table,
                         std::span<const Action> decisions) {
  double total = 0.0;
  for (size_t i = 0; i < decisions.size(); ++i) {
    if (IsTreated(decisions[i])) total += table.g1[i] - table.g2[i];
  }
  return total;
}

double WeightedMisclassification(const ContrastTable& table,
                                 std::span<const Action> decisions) {
  double total = 0.0;
  for (size_t i = 0; i < decisions.size(); ++i) {
    if (ToSign(decisions[i]) * table.label[i] < 0.0) total += table.weight[i];
  }
  return total;
}

// ---- Scores and policies ---------------------------------------------------

std::string ToString(MethodTag tag) {
  switch (tag) {
    case MethodTag::kRise:
      return "rise";
    case MethodTag::kBase:
      return "base";
    case MethodTag::kExp:
      return "exp";
    case MethodTag::kPtBase:
      return "pt_base";
    case MethodTag::kPtExp:
      return "pt_exp";
    case MethodTag::kOracle:
      return "oracle";
  }
  return "oracle";
}

MethodTag ParseMethodTag(const std::string& name) {
  static const std::map<std::string, MethodTag> kTags = {
      {"rise", MethodTag::kRise},     {"base", MethodTag::kBase},
      {"exp", MethodTag::kExp},       {"pt_base", MethodTag::kPtBase},
      {"pt_exp", MethodTag::kPtExp},  {"oracle", MethodTag::kOracle},
  };
  auto it = kTags.find(name);
  if (it == kTags.end()) throw ConfigError("unknown method '" + name + "'");
  return it->second;
}

Vector ScoreModel::ScoreBatch(const RowMatrix& x) const {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out[i] = Score(RowSpan(x, i));
  return out;
}

double PredictorScore::Score(std::span<const double> x) const {
  return model_.Predict(x);
}

Vector PredictorScore::ScoreBatch(const RowMatrix& x) const {
  return model_.PredictBatch(x);
}

nlohmann::json PredictorScore::ToJson() const {
  return {{"type", "classifier"}, {"model", model_.ToJson()}};
}

ArmDifferenceScore::ArmDifferenceScore(OutcomeModel om) : om_(std::move(om)) {
  if (om_.use_s()) {
    throw ConfigError("arm-difference score must not depend on s");
  }
}

double ArmDifferenceScore::Score(std::span<const double> x) const {
  return om_.Predict(x, {}, Action::kPlus) - om_.Predict(x, {}, Action::kMinus);
}

Vector ArmDifferenceScore::ScoreBatch(const RowMatrix& x) const {
  const RowMatrix none(x.rows(), 0);
  return om_.PredictBatch(x, none, Action::kPlus) -
         om_.PredictBatch(x, none, Action::kMinus);
}

nlohmann::json ArmDifferenceScore::ToJson() const {
  return {{"type", "arm_difference"}, {"outcome_model", om_.ToJson()}};
}

nlohmann::json ConstantScore::ToJson() const {
  return {{"type", "constant"}, {"value", value_}};
}

nlohmann::json FunctionScore::ToJson() const {
  return {{"type", "function"}, {"label", label_}};
}

Policy::Policy(std::shared_ptr<const ScoreModel> score, MethodTag method,
               uint64_t tie_seed, nlohmann::json provenance)
    : score_(std::move(score)),
      method_(method),
      tie_seed_(tie_seed),
      provenance_(std::move(provenance)) {
  if (!score_) throw ConfigError("policy needs a score model");
}

Action Policy::TieBreak(std::span<const double> x) const {
  uint64_t h = MixBits(tie_seed_);
  for (double v : x) h = MixBits(h ^ std::bit_cast<uint64_t>(v));
  return (h & 1ULL) ? Action::kPlus : Action::kMinus;
}

Action Policy::Decide(std::span<const double> x) const {
  const double s = score_->Score(x);
  if (s > 0.0) return Action::kPlus;
  if (s < 0.0) return Action::kMinus;
  return TieBreak(x);
}

std::vector<Action> Policy::DecideBatch(const RowMatrix& x) const {
  const Vector scores = score_->ScoreBatch(x);
  std::vector<Action> out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    if (scores[i] > 0.0) {
      out[i] = Action::kPlus;
    } else if (scores[i] < 0.0) {
      out[i] = Action::kMinus;
    } else {
      out[i] = TieBreak(RowSpan(x, i));
    }
  }
  return out;
}

nlohmann::json Policy::Describe() const {
  nlohmann::json j;
  j["method"] = ToString(method_);
  j["tie_seed"] = tie_seed_;
  j["provenance"] = provenance_;
  j["score"] = score_->ToJson();
  return j;
}

Policy PolicyFromContrast(const Dataset& train, const ContrastTable& table,
                          const LearnerConfig& cfg_clf, MethodTag method,
                          uint64_t tie_seed, nlohmann::json provenance) {
  if (table.weight.size() != train.size()) {
    throw FitError("contrast table does not match the training rows");
  }
  provenance["classifier"] = ToJson(cfg_clf);
  if (!(table.weight.maxCoeff() > 0.0)) {
    provenance["note"] = "all contrast weights are zero";
    return Policy(std::make_shared<ConstantScore>(0.0), method, tie_seed,
                  std::move(provenance));
  }
  Predictor clf = FitWeightedClassifier(train.x(), table.label, table.weight,
                                        WithSeed(cfg_clf, "classifier"));
  return Policy(std::make_shared<PredictorScore>(std::move(clf)), method,
                tie_seed, std::move(provenance));
}

Policy FitRiseWith(const Dataset& train, const OutcomeModel& om,
                   const SensitiveSpec& spec, const LearnerConfig& cfg_g,
                   const LearnerConfig& cfg_clf, uint64_t tie_seed,
                   int threads) {
  const ArmValues g = ComputeG(train, om, spec, cfg_g, threads);
  nlohmann::json prov;
  prov["sensitive"] = ToString(spec.kind);
  if (spec.kind == SensitiveKind::kContinuous) {
    prov["tau"] = spec.tau;
    prov["quantile"] = ToJson(cfg_g);
  }
  return PolicyFromContrast(train, BuildContrast(g.plus, g.minus), cfg_clf,
                            MethodTag::kRise, tie_seed, std::move(prov));
}

Policy FitRise(const Dataset& train, const SensitiveSpec& spec,
               const RiseConfigs& cfgs, uint64_t tie_seed, int threads) {
  CheckSpecMatchesData(spec, train);
  const OutcomeModel om = FitOutcomeModels(train, /*use_s=*/true, cfgs.outcome);
  return FitRiseWith(train, om, spec, cfgs.g, cfgs.classifier, tie_seed,
                     threads);
}

Policy FitBaseWith(const OutcomeModel& om_without_s, uint64_t tie_seed) {
  nlohmann::json prov;
  if (!om_without_s.is_function()) {
    prov["outcome"] = ToJson(om_without_s.arm(Action::kPlus).config());
  }
  return Policy(std::make_shared<ArmDifferenceScore>(om_without_s),
                MethodTag::kBase, tie_seed, std::move(prov));
}

Policy FitBase(const Dataset& train, const LearnerConfig& cfg,
               uint64_t tie_seed) {
  return FitBaseWith(FitOutcomeModels(train, /*use_s=*/false, cfg), tie_seed);
}

ArmValues ProjectPseudoOutcomes(const Dataset& train, const OutcomeModel& om,
                                const LearnerConfig& cfg_proj, int threads) {
  if (!om.use_s()) {
    throw ConfigError("Exp requires an outcome model that uses s");
  }
  ArmValues e;
  for (Action a : kBothActions) {
    const Vector pseudo = om.PredictBatch(train.x(), train.s(), a, threads);
    const Predictor proj = FitMean(
        train.x(), pseudo, Vector(),
        WithSeed(cfg_proj, IsTreated(a) ? "projection.plus" : "projection.minus"));
    (IsTreated(a) ? e.plus : e.minus) = proj.PredictBatch(train.x());
  }
  return e;
}

Policy FitExpWith(const Dataset& train, const OutcomeModel& om,
                  const LearnerConfig& cfg_proj, const LearnerConfig& cfg_clf,
                  uint64_t tie_seed, int threads) {
  const ArmValues e = ProjectPseudoOutcomes(train, om, cfg_proj, threads);
  nlohmann::json prov;
  prov["projection"] = ToJson(cfg_proj);
  return PolicyFromContrast(train, BuildContrast(e.plus, e.minus), cfg_clf,
                            MethodTag::kExp, tie_seed, std::move(prov));
}

Policy FitExp(const Dataset& train, const SensitiveSpec& spec,
              const ExpConfigs& cfgs, uint64_t tie_seed, int threads) {
  CheckSpecMatchesData(spec, train);
  const OutcomeModel om = FitOutcomeModels(train, /*use_s=*/true, cfgs.outcome);
  return FitExpWith(train, om, cfgs.projection, cfgs.classifier, tie_seed,
                    threads);
}

}  // namespace rise
