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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rise/runner.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json SmallConfig(const std::string& out) {
  const json learner = {{"epochs", 5}};
  return {{"scenario", "example1"}, {"s_kind", "discrete"},
          {"n_train", 200},         {"n_test", 80},
          {"replications", 2},      {"base_seed", 3},
          {"outcome", learner},     {"projection", learner},
          {"classifier", learner},  {"quantile", learner},
          {"propensity", learner},  {"output_dir", out}};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path TempDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rise_runner_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config validation") {
  const auto ok = SmallConfig("x");
  CHECK_NOTHROW(rise::RunConfigFromJson(ok));
  auto bad = ok;
  bad["bogus"] = 1;
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad["tau"] = 1.5;
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad["methods"] = {"rise", "rise"};
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad["methods"] = {"magic"};
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad["tree_depth"] = 3;
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad["scenario"] = "example9";
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad.erase("scenario");
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  bad = ok;
  bad["replications"] = 0;
  CHECK_THROWS_AS(rise::RunConfigFromJson(bad), rise::ConfigError);
  CHECK_THROWS_AS(rise::LoadRunConfig("/nonexistent/config.json"), rise::ConfigError);
  const auto grid = rise::RunConfigFromJson(json{{"scenario", "example1"},
                                                 {"outcome", "default_grid"}});
  CHECK(grid.outcome.size() == 17);
}

TEST_CASE("cell formatting") {
  CHECK(rise::FormatCell(12.04, 0.014) == "12.0 (0.01)");
  CHECK(rise::FormatCell(std::nullopt, std::nullopt) == "-");
  CHECK(rise::FormatMean(7.14) == "7.14");
  CHECK(rise::FormatMean(9.996) == "10.0");
  CHECK(rise::FormatMean(123.4) == "123");
  CHECK(rise::FormatMean(-2.5) == "-2.50");
}

TEST_CASE("aggregate csv parsing") {
  const std::string good =
      "method,metric,group,mean,se\n"
      "rise,objective,all,12.04,0.014\n"
      "rise,objective,vulnerable,,\n";
  const auto cells = rise::ParseAggregateCsv(good);
  REQUIRE(cells.size() == 2);
  CHECK(*cells[0].mean == 12.04);
  CHECK_FALSE(cells[1].mean.has_value());
  const auto table = rise::SummaryTable(cells);
  CHECK(table.find("12.0 (0.01)") != std::string::npos);
  CHECK(table.find("Obj. (vulnerable)") != std::string::npos);

  auto error_of = [](const std::string& text) {
    try {
      rise::ParseAggregateCsv(text);
    } catch (const rise::IngestionError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of("method,metric,group,mean,se\nrise,objective,all,abc,1\n")
            .find("line 2") != std::string::npos);
  CHECK(error_of("method,metric,group,mean,se\nrise,objective,all,1\n")
            .find("line 2") != std::string::npos);
  CHECK(error_of("method,metric,group,mean,se\nrise,objective,all,1,1\n"
                 "rise,cost,all,1,1\n")
            .find("line 3") != std::string::npos);
  CHECK(error_of("nonsense\n").find("line 1") != std::string::npos);
}

TEST_CASE("small run writes deterministic outputs") {
  const auto a = TempDir("a"), b = TempDir("b");
  const auto out_a = rise::Run(rise::RunConfigFromJson(SmallConfig(a.string())));
  rise::Run(rise::RunConfigFromJson(SmallConfig(b.string())));
  for (const char* f : {"results.jsonl", "aggregate.csv"}) {
    CHECK(Slurp(a / f) == Slurp(b / f));
    CHECK_FALSE(Slurp(a / f).empty());
  }
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(fs::exists(a / "timings.jsonl"));

  // 2 replications x 5 methods, four metrics per method.
  std::istringstream lines(Slurp(a / "results.jsonl"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto rec = json::parse(line);
    CHECK(rec.contains("objective_all"));
    CHECK(rec.contains("value_vulnerable"));
    CHECK(rec["seed"].get<uint64_t>() == 3 + rec["replication"].get<uint64_t>());
    ++count;
  }
  CHECK(count == 10);
  CHECK(out_a.aggregate.cells.size() == 20);

  // Manifest reloads to the same config.
  const auto manifest = json::parse(Slurp(a / "manifest.json"));
  const auto again = rise::RunConfigFromJson(manifest);
  CHECK(rise::ToJson(again) == manifest["config"]);
}

TEST_CASE("concurrent replications match the serial run") {
  auto cfg = rise::RunConfigFromJson(SmallConfig("unused"));
  const auto serial = rise::Execute(cfg);
  cfg.parallelism = 2;
  const auto parallel = rise::Execute(cfg);
  CHECK(rise::ResultsJsonl(serial.replications) ==
        rise::ResultsJsonl(parallel.replications));
  CHECK(rise::AggregateCsv(serial.aggregate) ==
        rise::AggregateCsv(parallel.aggregate));
  // A replication is a pure function of its index.
  CHECK(rise::ResultsJsonl({rise::RunReplication(cfg, 1)}) ==
        rise::ResultsJsonl({serial.replications[1]}));
}
