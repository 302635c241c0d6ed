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

// rise run --config <path> [--reps N] [--seed S] [--out DIR] [--parallel K]
// rise summarize --in <aggregate.csv>
//
// Exit codes: 0 success, 1 config error, 2 runtime error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "rise/runner.hpp"

namespace {

constexpr int kConfigExit = 1;
constexpr int kRuntimeExit = 2;

int Fail(int code, const std::string& what) {
  std::cerr << "rise: " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust decision rules with sensitive variables"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> reps;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> parallel;
  auto* run = app.add_subcommand("run", "run an experiment from a config");
  run->add_option("--config", config_path, "JSON config or manifest")
      ->required();
  run->add_option("--reps", reps, "number of replications");
  run->add_option("--seed", seed, "base seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--parallel", parallel, "concurrent replications");

  std::string aggregate_path;
  auto* summarize =
      app.add_subcommand("summarize", "print an aggregate.csv as a table");
  summarize->add_option("--in", aggregate_path, "aggregate.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kConfigExit;
  }

  if (run->parsed()) {
    rise::RunConfig cfg;
    try {
      cfg = rise::LoadRunConfig(config_path);
      if (reps) cfg.replications = *reps;
      if (seed) cfg.base_seed = *seed;
      if (out_dir) cfg.output_dir = *out_dir;
      if (parallel) cfg.parallelism = *parallel;
      cfg.Validate();
    } catch (const rise::ConfigError& e) {
      return Fail(kConfigExit, e.what());
    }
    try {
      const rise::RunOutput out = rise::Run(cfg);
      for (const auto& w : out.aggregate.warnings) {
        std::cerr << "rise: warning: " << w << "\n";
      }
      std::cout << rise::SummaryTable(out.aggregate.cells);
    } catch (const rise::ConfigError& e) {
      return Fail(kConfigExit, e.what());
    } catch (const std::exception& e) {
      return Fail(kRuntimeExit, e.what());
    }
    return 0;
  }

  std::ifstream in(aggregate_path, std::ios::binary);
  if (!in) return Fail(kRuntimeExit, "cannot open '" + aggregate_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    std::cout << rise::SummaryTable(rise::ParseAggregateCsv(buf.str()));
  } catch (const std::exception& e) {
    return Fail(kRuntimeExit, e.what());
  }
  return 0;
}
