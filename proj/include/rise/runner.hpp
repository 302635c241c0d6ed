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

// Experiment runner behind the command-line tool: config parsing, seeded
// replications of generate -> fit -> evaluate, and output files.

#ifndef RISE_RUNNER_HPP_
#define RISE_RUNNER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rise/data.hpp"
#include "rise/eval.hpp"
#include "rise/learners.hpp"

namespace rise {

struct CsvSource {
  std::string path;
  CsvSchema schema;
  ValueDesign design = ValueDesign::kObservational;
};

struct RunConfig {
  std::optional<SyntheticScenario> scenario;
  std::optional<CsvSource> csv;
  SensitiveKind s_kind = SensitiveKind::kDiscrete;
  double tau = 0.25;
  Index n_train = 8000;
  Index n_test = 2000;
  double train_fraction = 0.8;
  int replications = 100;
  std::vector<std::string> methods = {"base", "exp", "pt_base", "pt_exp",
                                      "rise"};
  // One entry fixes the learner; several are selected by cv_folds-fold CV.
  std::vector<LearnerConfig> outcome = {LearnerConfig{}};
  std::vector<LearnerConfig> quantile = {LearnerConfig{}};
  std::vector<LearnerConfig> projection = {LearnerConfig{}};
  std::vector<LearnerConfig> classifier = {LearnerConfig{}};
  std::vector<LearnerConfig> propensity = {LearnerConfig{}};
  int cv_folds = 3;
  int tree_depth = 2;
  uint64_t base_seed = 0;
  std::string output_dir = "rise_out";
  int parallelism = 1;  // concurrent replications
  int threads = 1;      // kernel threads inside one replication

  void Validate() const;
};

// Accepts a config object, or a manifest written by Run (its "config" key).
// Relative csv paths resolve against base_dir.
RunConfig RunConfigFromJson(const nlohmann::json& j,
                            const std::string& base_dir = "");
RunConfig LoadRunConfig(const std::string& path);
nlohmann::json ToJson(const RunConfig& cfg);

struct ReplicationResult {
  int replication = 0;
  uint64_t seed = 0;
  std::vector<MetricsRow> rows;  // in canonical method order
  std::vector<std::pair<std::string, double>> seconds;  // per method
};

// One replication; pure function of (cfg, replication).
ReplicationResult RunReplication(const RunConfig& cfg, int replication);

struct RunOutput {
  std::vector<ReplicationResult> replications;
  AggregateReport aggregate;
};

// All replications; writes nothing.
RunOutput Execute(const RunConfig& cfg);

// Execute, then write results.jsonl, aggregate.csv, manifest.json and
// timings.jsonl under cfg.output_dir.
RunOutput Run(const RunConfig& cfg);

std::string BuildId();

// Line-delimited records; wall time is kept out so reruns are byte-identical.
std::string ResultsJsonl(const std::vector<ReplicationResult>& reps);
std::string AggregateCsv(const AggregateReport& report);
std::string TimingsJsonl(const std::vector<ReplicationResult>& reps);
nlohmann::json Manifest(const RunConfig& cfg);

// "mean (se)" cell: mean to 3 significant digits, se to 2 decimals.
std::string FormatCell(std::optional<double> mean, std::optional<double> se);
std::string FormatMean(double mean);
// Throws IngestionError naming the offending line.
std::vector<AggregateCell> ParseAggregateCsv(const std::string& text);
std::string SummaryTable(const std::vector<AggregateCell>& cells);

}  // namespace rise

#endif  // RISE_RUNNER_HPP_
