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

#include "rise/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rise/drbaselines.hpp"
#include "rise/parallel.hpp"
#include "rise/policy.hpp"

namespace rise {

namespace fs = std::filesystem;

// ---- Config ----------------------------------------------------------------

namespace {

const std::vector<std::string> kKnownMethods = {"base", "exp", "pt_base",
                                                "pt_exp", "rise"};

std::vector<LearnerConfig> GridFromJson(const nlohmann::json& j,
                                        const std::string& key) {
  if (j.is_string()) {
    if (j.get<std::string>() == "default_grid") return DefaultGrid();
    throw ConfigError(key + ": unknown grid preset '" + j.get<std::string>() +
                      "'");
  }
  if (j.is_object()) return {LearnerConfigFromJson(j)};
  if (!j.is_array() || j.empty()) {
    throw ConfigError(key + ": expected a learner object or a non-empty list");
  }
  std::vector<LearnerConfig> grid;
  for (const auto& item : j) grid.push_back(LearnerConfigFromJson(item));
  return grid;
}

nlohmann::ordered_json GridToJson(const std::vector<LearnerConfig>& grid) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& cfg : grid) {
    arr.push_back(nlohmann::ordered_json::parse(ToJson(cfg).dump()));
  }
  return arr;
}

ValueDesign ParseDesign(const std::string& name) {
  if (name == "randomized") return ValueDesign::kRandomized;
  if (name == "observational") return ValueDesign::kObservational;
  throw ConfigError("unknown design '" + name + "'");
}

std::string ToString(ValueDesign d) {
  return d == ValueDesign::kRandomized ? "randomized" : "observational";
}

CsvSource CsvFromJson(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("csv: expected an object");
  CsvSource src;
  for (const auto& [key, value] : j.items()) {
    if (key == "path") {
      src.path = value.get<std::string>();
    } else if (key == "features") {
      src.schema.features = value.get<std::vector<std::string>>();
    } else if (key == "sensitive") {
      src.schema.sensitive = value.get<std::vector<std::string>>();
    } else if (key == "sensitive_kinds") {
      for (const auto& k : value) {
        src.schema.sensitive_kinds.push_back(
            ParseSensitiveKind(k.get<std::string>()));
      }
    } else if (key == "action") {
      src.schema.action = value.get<std::string>();
    } else if (key == "action_codes") {
      for (const auto& [code, act] : value.items()) {
        const int v = act.get<int>();
        if (v != 1 && v != -1) {
          throw ConfigError("csv.action_codes: values must be -1 or 1");
        }
        src.schema.action_codes.emplace_back(
            code, v > 0 ? Action::kPlus : Action::kMinus);
      }
    } else if (key == "outcome") {
      src.schema.outcome = value.get<std::string>();
    } else if (key == "transforms") {
      for (const auto& [col, t] : value.items()) {
        src.schema.transforms.emplace_back(col, t.get<std::string>());
      }
    } else if (key == "design") {
      src.design = ParseDesign(value.get<std::string>());
    } else {
      throw ConfigError("csv: unknown key '" + key + "'");
    }
  }
  if (src.path.empty()) throw ConfigError("csv: missing path");
  if (!base_dir.empty() && fs::path(src.path).is_relative()) {
    src.path = (fs::path(base_dir) / src.path).lexically_normal().string();
  }
  return src;
}

}  // namespace

void RunConfig::Validate() const {
  if (scenario.has_value() == csv.has_value()) {
    throw ConfigError("exactly one of scenario and csv must be given");
  }
  if (methods.empty()) throw ConfigError("methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) ==
        kKnownMethods.end()) {
      throw ConfigError("unknown method '" + m + "'");
    }
    if (!seen.insert(m).second) throw ConfigError("duplicate method '" + m + "'");
  }
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (scenario && (n_train < 20 || n_test < 2)) {
    throw ConfigError("n_train must be >= 20 and n_test >= 2");
  }
  if (scenario && !(scenario->noise_sd >= 0.0)) {
    throw ConfigError("noise_sd must be >= 0");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (tree_depth != 1 && tree_depth != 2) {
    throw ConfigError("tree_depth must be 1 or 2");
  }
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  for (const auto* grid :
       {&outcome, &quantile, &projection, &classifier, &propensity}) {
    if (grid->empty()) throw ConfigError("learner grids must not be empty");
    for (const auto& c : *grid) rise::Validate(c);
  }
  if (csv) {
    if (csv->schema.features.empty() || csv->schema.sensitive.empty() ||
        csv->schema.action.empty() || csv->schema.outcome.empty()) {
      throw ConfigError("csv needs features, sensitive, action and outcome");
    }
  }
}

RunConfig RunConfigFromJson(const nlohmann::json& root,
                            const std::string& base_dir) {
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  const nlohmann::json& j =
      (root.contains("config") && root.contains("build")) ? root.at("config")
                                                          : root;
  RunConfig cfg;
  std::optional<ScenarioKind> kind;
  double noise_sd = 1.0;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "scenario") {
        kind = ParseScenarioKind(value.get<std::string>());
      } else if (key == "csv") {
        cfg.csv = CsvFromJson(value, base_dir);
      } else if (key == "s_kind") {
        cfg.s_kind = ParseSensitiveKind(value.get<std::string>());
      } else if (key == "noise_sd") {
        noise_sd = value.get<double>();
      } else if (key == "tau") {
        cfg.tau = value.get<double>();
      } else if (key == "n_train") {
        cfg.n_train = value.get<Index>();
      } else if (key == "n_test") {
        cfg.n_test = value.get<Index>();
      } else if (key == "train_fraction") {
        cfg.train_fraction = value.get<double>();
      } else if (key == "replications") {
        cfg.replications = value.get<int>();
      } else if (key == "methods") {
        cfg.methods = value.get<std::vector<std::string>>();
      } else if (key == "outcome") {
        cfg.outcome = GridFromJson(value, key);
      } else if (key == "quantile") {
        cfg.quantile = GridFromJson(value, key);
      } else if (key == "projection") {
        cfg.projection = GridFromJson(value, key);
      } else if (key == "classifier") {
        cfg.classifier = GridFromJson(value, key);
      } else if (key == "propensity") {
        cfg.propensity = GridFromJson(value, key);
      } else if (key == "cv_folds") {
        cfg.cv_folds = value.get<int>();
      } else if (key == "tree_depth") {
        cfg.tree_depth = value.get<int>();
      } else if (key == "base_seed") {
        cfg.base_seed = value.get<uint64_t>();
      } else if (key == "output_dir") {
        cfg.output_dir = value.get<std::string>();
      } else if (key == "parallelism") {
        cfg.parallelism = value.get<int>();
      } else if (key == "threads") {
        cfg.threads = value.get<int>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (kind) cfg.scenario = SyntheticScenario{*kind, cfg.s_kind, noise_sd};
  cfg.Validate();
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return RunConfigFromJson(j, fs::path(path).parent_path().string());
}

nlohmann::json ToJson(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  if (cfg.scenario) {
    j["scenario"] = ToString(cfg.scenario->kind);
    j["noise_sd"] = cfg.scenario->noise_sd;
  }
  if (cfg.csv) {
    nlohmann::ordered_json c;
    c["path"] = cfg.csv->path;
    c["features"] = cfg.csv->schema.features;
    c["sensitive"] = cfg.csv->schema.sensitive;
    std::vector<std::string> kinds;
    for (auto k : cfg.csv->schema.sensitive_kinds) kinds.push_back(ToString(k));
    c["sensitive_kinds"] = kinds;
    c["action"] = cfg.csv->schema.action;
    nlohmann::ordered_json codes = nlohmann::ordered_json::object();
    for (const auto& [code, a] : cfg.csv->schema.action_codes) {
      codes[code] = static_cast<int>(a);
    }
    c["action_codes"] = codes;
    c["outcome"] = cfg.csv->schema.outcome;
    nlohmann::ordered_json tr = nlohmann::ordered_json::object();
    for (const auto& [col, t] : cfg.csv->schema.transforms) tr[col] = t;
    c["transforms"] = tr;
    c["design"] = ToString(cfg.csv->design);
    j["csv"] = c;
  }
  j["s_kind"] = ToString(cfg.s_kind);
  j["tau"] = cfg.tau;
  j["n_train"] = cfg.n_train;
  j["n_test"] = cfg.n_test;
  j["train_fraction"] = cfg.train_fraction;
  j["replications"] = cfg.replications;
  j["methods"] = cfg.methods;
  j["outcome"] = GridToJson(cfg.outcome);
  j["quantile"] = GridToJson(cfg.quantile);
  j["projection"] = GridToJson(cfg.projection);
  j["classifier"] = GridToJson(cfg.classifier);
  j["propensity"] = GridToJson(cfg.propensity);
  j["cv_folds"] = cfg.cv_folds;
  j["tree_depth"] = cfg.tree_depth;
  j["base_seed"] = cfg.base_seed;
  j["output_dir"] = cfg.output_dir;
  j["parallelism"] = cfg.parallelism;
  j["threads"] = cfg.threads;
  return nlohmann::json::parse(j.dump());
}

// ---- Replications ----------------------------------------------------------

namespace {

bool Wants(const RunConfig& cfg, const std::string& method) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), method) !=
         cfg.methods.end();
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Picks a learner for one role: the single grid entry, or the CV winner.
class LearnerChooser {
 public:
  LearnerChooser(const RunConfig& cfg, const Rng& rng, int threads)
      : cfg_(cfg), rng_(rng), threads_(threads) {}

  LearnerConfig Seeded(const LearnerConfig& c, const std::string& role) const {
    LearnerConfig out = c;
    out.seed = MixBits(c.seed ^ rng_.Stream("learner." + role).Next());
    return out;
  }

  LearnerConfig Choose(const std::vector<LearnerConfig>& grid, Task task,
                       const TrainingData& data, const std::string& role) const {
    if (grid.size() == 1) return Seeded(grid.front(), role);
    std::vector<LearnerConfig> seeded;
    for (const auto& c : grid) seeded.push_back(Seeded(c, role));
    return Tune(task, data, seeded, cfg_.cv_folds,
                rng_.Stream("cv." + role).Next(), threads_);
  }

 private:
  const RunConfig& cfg_;
  Rng rng_;
  int threads_;
};

// [x | s | a] rows for tuning the outcome learner on pooled data.
RowMatrix PooledInputs(const Dataset& ds) {
  const Index p = ds.num_features();
  const Index q = ds.num_sensitive();
  RowMatrix in(ds.size(), p + q + 1);
  in.leftCols(p) = ds.x();
  in.middleCols(p, q) = ds.s();
  for (Index i = 0; i < ds.size(); ++i) in(i, p + q) = ToSign(ds.a()[i]);
  return in;
}

RowMatrix WithSensitive(const Dataset& ds) {
  RowMatrix in(ds.size(), ds.num_features() + ds.num_sensitive());
  in.leftCols(ds.num_features()) = ds.x();
  in.rightCols(ds.num_sensitive()) = ds.s();
  return in;
}

struct ReplicationData {
  Dataset train;
  Dataset test;
  std::optional<OracleModel> oracle;
  RowMatrix test_latent_x;
  ValueDesign design = ValueDesign::kObservational;
  double pi_plus = 0.5;
  bool known_propensity = false;
};

ReplicationData Draw(const RunConfig& cfg, const Rng& rng) {
  if (cfg.scenario) {
    SyntheticDraw train = Generate(*cfg.scenario, cfg.n_train,
                                   rng.Stream("train").Next());
    SyntheticDraw test = Generate(*cfg.scenario, cfg.n_test,
                                  rng.Stream("test").Next());
    const bool randomized = IsRandomized(cfg.scenario->kind);
    return {std::move(train.data),
            std::move(test.data),
            std::move(test.oracle),
            std::move(test.latent_x),
            randomized ? ValueDesign::kRandomized : ValueDesign::kObservational,
            0.5,
            randomized};
  }
  const Dataset all = LoadCsv(cfg.csv->path, cfg.csv->schema);
  auto [train, test] = Split(all, cfg.train_fraction, rng.Stream("split").Next());
  ReplicationData out{std::move(train), std::move(test), std::nullopt,
                      RowMatrix(), cfg.csv->design, 0.5, false};
  if (out.design == ValueDesign::kRandomized) {
    out.pi_plus = static_cast<double>(out.train.CountAction(Action::kPlus)) /
                  static_cast<double>(out.train.size());
    out.known_propensity = true;
  }
  return out;
}

}  // namespace

ReplicationResult RunReplication(const RunConfig& cfg, int replication) {
  ReplicationResult result;
  result.replication = replication;
  result.seed = cfg.base_seed + static_cast<uint64_t>(replication);
  const Rng rng(result.seed);
  const int threads = cfg.threads;
  const LearnerChooser chooser(cfg, rng, threads);

  Timer shared_timer;
  ReplicationData d = Draw(cfg, rng);
  const Dataset& train = d.train;
  const SensitiveSpec spec = cfg.s_kind == SensitiveKind::kDiscrete
                                 ? DiscreteSpecFromData(train)
                                 : ContinuousSpec(cfg.tau);

  const bool need_om_s = Wants(cfg, "exp") || Wants(cfg, "pt_exp") ||
                         Wants(cfg, "rise") || !d.oracle.has_value();
  const bool need_om_x = Wants(cfg, "base") || Wants(cfg, "pt_base");
  const bool need_prop = Wants(cfg, "pt_base") || Wants(cfg, "pt_exp");

  const LearnerConfig cfg_out = chooser.Choose(
      cfg.outcome, Task::kMean, {PooledInputs(train), train.y(), Vector(), 0.5},
      "outcome");
  std::optional<OutcomeModel> om_s, om_x;
  if (need_om_s) om_s = FitOutcomeModels(train, true, cfg_out);
  if (need_om_x) om_x = FitOutcomeModels(train, false, cfg_out);
  std::optional<Propensity> prop;
  if (need_prop) {
    if (d.known_propensity) {
      prop = Propensity::Known(d.pi_plus);
    } else {
      Vector labels(train.size());
      for (Index i = 0; i < train.size(); ++i) labels[i] = ToSign(train.a()[i]);
      const LearnerConfig cfg_prop = chooser.Choose(
          cfg.propensity, Task::kClassifier,
          {WithSensitive(train), labels, Vector::Ones(train.size()), 0.5},
          "propensity");
      prop = FitPropensity(train, true, cfg_prop);
    }
  }
  LearnerConfig cfg_q = chooser.Seeded(cfg.quantile.front(), "quantile");
  if (spec.kind == SensitiveKind::kContinuous && cfg.quantile.size() > 1) {
    const Vector pseudo =
        om_s->PredictBatch(train.x(), train.s(), Action::kPlus, threads);
    cfg_q = chooser.Choose(cfg.quantile, Task::kQuantile,
                           {train.x(), pseudo, Vector(), spec.tau}, "quantile");
  }
  result.seconds.emplace_back("shared", shared_timer.Seconds());

  auto tie_seed = [&](const std::string& m) {
    return rng.Stream("tie." + m).Next();
  };
  auto contrast_policy = [&](const ContrastTable& table, MethodTag tag,
                             const std::string& m, nlohmann::json prov) {
    const LearnerConfig cfg_clf = chooser.Choose(
        cfg.classifier, Task::kClassifier,
        {train.x(), table.label, table.weight, 0.5}, "classifier." + m);
    return PolicyFromContrast(train, table, cfg_clf, tag, tie_seed(m),
                              std::move(prov));
  };

  std::vector<std::pair<std::string, Policy>> policies;
  for (const auto& m : CanonicalMethodOrder(cfg.methods)) {
    Timer t;
    if (m == "base") {
      policies.emplace_back(m, FitBaseWith(*om_x, tie_seed(m)));
    } else if (m == "exp") {
      const LearnerConfig cfg_proj = chooser.Choose(
          cfg.projection, Task::kMean,
          {train.x(), om_s->PredictBatch(train.x(), train.s(), Action::kPlus, threads),
           Vector(), 0.5},
          "projection");
      const ArmValues e = ProjectPseudoOutcomes(train, *om_s, cfg_proj, threads);
      policies.emplace_back(
          m, contrast_policy(BuildContrast(e.plus, e.minus), MethodTag::kExp, m,
                             {{"projection", ToJson(cfg_proj)}}));
    } else if (m == "pt_base") {
      policies.emplace_back(m, FitPolicyTreeWith(train, *om_x, *prop,
                                                 cfg.tree_depth, tie_seed(m),
                                                 threads));
    } else if (m == "pt_exp") {
      policies.emplace_back(m, FitPolicyTreeWith(train, *om_s, *prop,
                                                 cfg.tree_depth, tie_seed(m),
                                                 threads));
    } else if (m == "rise") {
      const ArmValues g = ComputeG(train, *om_s, spec, cfg_q, threads);
      nlohmann::json prov = {{"sensitive", ToString(spec.kind)}};
      if (spec.kind == SensitiveKind::kContinuous) prov["tau"] = spec.tau;
      policies.emplace_back(
          m, contrast_policy(BuildContrast(g.plus, g.minus), MethodTag::kRise,
                             m, std::move(prov)));
    }
    result.seconds.emplace_back(m, t.Seconds());
  }

  Timer eval_timer;
  const LearnerConfig cfg_eval_q = chooser.Seeded(cfg_q, "eval");
  const EvalModel em =
      d.oracle ? EvalModel::Oracle(d.test, d.oracle->mean_fn, spec, cfg_eval_q,
                                   &d.test_latent_x, threads)
               : EvalModel::Fitted(
                     d.test,
                     FitOutcomeModels(train, true,
                                      chooser.Seeded(cfg_out, "eval.outcome")),
                     spec, cfg_eval_q, threads);
  for (const auto& [m, policy] : policies) {
    result.rows.push_back(Evaluate(m, policy, em, d.test, d.design, d.pi_plus));
  }
  result.seconds.emplace_back("evaluation", eval_timer.Seconds());
  return result;
}

RunOutput Execute(const RunConfig& cfg) {
  cfg.Validate();
  RunOutput out;
  out.replications.resize(cfg.replications);
  RunConfig inner = cfg;
  if (cfg.parallelism > 1) inner.threads = 1;
  parallel::For(cfg.replications, cfg.parallelism, [&](int64_t r) {
    out.replications[r] = RunReplication(inner, static_cast<int>(r));
  });
  std::vector<std::vector<MetricsRow>> rows;
  for (const auto& rep : out.replications) rows.push_back(rep.rows);
  out.aggregate = Aggregate(rows);
  return out;
}

// ---- Output ----------------------------------------------------------------

std::string BuildId() {
  std::string id = "rise 0.1.0";
#ifdef __VERSION__
  id += "; compiler " + std::string(__VERSION__);
#endif
#ifdef NDEBUG
  id += "; release";
#else
  id += "; debug";
#endif
  return id;
}

namespace {

nlohmann::ordered_json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string Number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string ResultsJsonl(const std::vector<ReplicationResult>& reps) {
  std::string text;
  for (const auto& rep : reps) {
    for (const auto& row : rep.rows) {
      nlohmann::ordered_json j;
      j["replication"] = rep.replication;
      j["seed"] = rep.seed;
      j["method"] = row.method;
      j["objective_all"] = OptionalJson(row.objective_all);
      j["objective_vulnerable"] = OptionalJson(row.objective_vulnerable);
      j["value_all"] = OptionalJson(row.value_all);
      j["value_vulnerable"] = OptionalJson(row.value_vulnerable);
      j["n_vulnerable"] = row.n_vulnerable;
      text += j.dump() + "\n";
    }
  }
  return text;
}

std::string TimingsJsonl(const std::vector<ReplicationResult>& reps) {
  std::string text;
  for (const auto& rep : reps) {
    nlohmann::ordered_json j;
    j["replication"] = rep.replication;
    nlohmann::ordered_json secs;
    for (const auto& [stage, s] : rep.seconds) secs[stage] = s;
    j["wall_seconds"] = secs;
    text += j.dump() + "\n";
  }
  return text;
}

std::string AggregateCsv(const AggregateReport& report) {
  std::string text = "method,metric,group,mean,se\n";
  for (const auto& c : report.cells) {
    text += c.method + "," + c.metric + "," + c.group + "," +
            (c.mean ? Number(*c.mean) : "") + "," +
            (c.se ? Number(*c.se) : "") + "\n";
  }
  return text;
}

nlohmann::json Manifest(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["build"] = BuildId();
  j["config"] = nlohmann::ordered_json::parse(ToJson(cfg).dump());
  j["seed_rule"] = "replication r uses base_seed + r";
  std::vector<uint64_t> seeds;
  for (int r = 0; r < cfg.replications; ++r) {
    seeds.push_back(cfg.base_seed + static_cast<uint64_t>(r));
  }
  j["seeds"] = seeds;
  return nlohmann::json::parse(j.dump());
}

RunOutput Run(const RunConfig& cfg) {
  cfg.Validate();
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error("cannot create output directory '" + dir.string() + "'");
  }
  // Fail before the expensive part when the directory is not writable.
  WriteFile(dir / "manifest.json", Manifest(cfg).dump(2) + "\n");
  RunOutput out = Execute(cfg);
  WriteFile(dir / "results.jsonl", ResultsJsonl(out.replications));
  WriteFile(dir / "aggregate.csv", AggregateCsv(out.aggregate));
  WriteFile(dir / "timings.jsonl", TimingsJsonl(out.replications));
  return out;
}

// ---- Summary table ---------------------------------------------------------

std::string FormatMean(double mean) {
  if (!std::isfinite(mean)) return Number(mean);
  auto decimals_for = [](double v) {
    if (v == 0.0) return 2;
    const int digits = static_cast<int>(std::floor(std::log10(std::abs(v)))) + 1;
    return std::max(0, 3 - digits);
  };
  int decimals = decimals_for(mean);
  const double scale = std::pow(10.0, decimals);
  const double rounded = std::round(mean * scale) / scale;
  if (rounded != 0.0) decimals = std::min(decimals, decimals_for(rounded));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, mean);
  return buf;
}

std::string FormatCell(std::optional<double> mean, std::optional<double> se) {
  if (!mean) return "-";
  std::string cell = FormatMean(*mean);
  if (se) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), " (%.2f)", *se);
    cell += buf;
  }
  return cell;
}

std::vector<AggregateCell> ParseAggregateCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw IngestionError("aggregate line " + std::to_string(line_no) + ": " +
                         why);
  };
  auto parse_number = [&](const std::string& field) -> std::optional<double> {
    if (field.empty()) return std::nullopt;
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      fail("'" + field + "' is not a number");
    }
    if (used != field.size()) fail("'" + field + "' is not a number");
    return v;
  };
  std::vector<AggregateCell> cells;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "method,metric,group,mean,se") {
        fail("expected header 'method,metric,group,mean,se'");
      }
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 5) {
      fail("expected 5 fields, found " + std::to_string(fields.size()));
    }
    if (fields[1] != "objective" && fields[1] != "value") {
      fail("unknown metric '" + fields[1] + "'");
    }
    if (fields[2] != "all" && fields[2] != "vulnerable") {
      fail("unknown group '" + fields[2] + "'");
    }
    if (fields[0].empty()) fail("empty method");
    AggregateCell c{fields[0], fields[1], fields[2], parse_number(fields[3]),
                    parse_number(fields[4]), 0};
    cells.push_back(std::move(c));
  }
  if (!header) {
    line_no = std::max(line_no, 1);
    fail("missing header");
  }
  return cells;
}

std::string SummaryTable(const std::vector<AggregateCell>& cells) {
  static const std::array<std::pair<const char*, const char*>, 4> kColumns = {{
      {"objective", "all"},
      {"objective", "vulnerable"},
      {"value", "all"},
      {"value", "vulnerable"},
  }};
  std::vector<std::string> methods;
  for (const auto& c : cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
      methods.push_back(c.method);
    }
  }
  std::vector<std::vector<std::string>> table;
  table.push_back({"Method", "Obj. (all)", "Obj. (vulnerable)", "Value (all)",
                   "Value (vulnerable)"});
  for (const auto& m : methods) {
    std::vector<std::string> row = {m};
    for (const auto& [metric, group] : kColumns) {
      std::string cell = "-";
      for (const auto& c : cells) {
        if (c.method == m && c.metric == metric && c.group == group) {
          cell = FormatCell(c.mean, c.se);
        }
      }
      row.push_back(cell);
    }
    table.push_back(std::move(row));
  }
  std::vector<size_t> width(5, 0);
  for (const auto& row : table) {
    for (size_t k = 0; k < row.size(); ++k) {
      width[k] = std::max(width[k], row[k].size());
    }
  }
  std::string out;
  for (const auto& row : table) {
    std::string line;
    for (size_t k = 0; k < row.size(); ++k) {
      line += row[k];
      if (k + 1 < row.size()) line += std::string(width[k] - row[k].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace rise
