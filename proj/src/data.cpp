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

#include "rise/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace rise {

Dataset::Dataset(RowMatrix x, RowMatrix s, std::vector<Action> a, Vector y,
                 std::vector<std::string> feature_names,
                 std::vector<std::string> sensitive_names,
                 std::vector<SensitiveKind> s_kind)
    : x_(std::move(x)),
      s_(std::move(s)),
      a_(std::move(a)),
      y_(std::move(y)),
      feature_names_(std::move(feature_names)),
      sensitive_names_(std::move(sensitive_names)),
      s_kind_(std::move(s_kind)) {
  const Index n = x_.rows();
  if (n == 0) throw ConfigError("dataset must be non-empty");
  if (s_.rows() != n || static_cast<Index>(a_.size()) != n || y_.size() != n) {
    throw ConfigError("dataset columns have inconsistent row counts");
  }
  if (static_cast<Index>(feature_names_.size()) != x_.cols() ||
      static_cast<Index>(sensitive_names_.size()) != s_.cols() ||
      static_cast<Index>(s_kind_.size()) != s_.cols()) {
    throw ConfigError("dataset names do not match column counts");
  }
  for (Action act : a_) {
    if (act != Action::kPlus && act != Action::kMinus) {
      throw ConfigError("action outside {-1, +1}");
    }
  }
}

Index Dataset::CountAction(Action action) const {
  return std::count(a_.begin(), a_.end(), action);
}

std::vector<Index> Dataset::RowsWithAction(Action action) const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (a_[i] == action) rows.push_back(i);
  }
  return rows;
}

Dataset Dataset::Subset(std::span<const Index> rows) const {
  const Index m = static_cast<Index>(rows.size());
  RowMatrix x(m, x_.cols());
  RowMatrix s(m, s_.cols());
  std::vector<Action> a(m);
  Vector y(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[k];
    x.row(k) = x_.row(i);
    s.row(k) = s_.row(i);
    a[k] = a_[i];
    y[k] = y_[i];
  }
  return Dataset(std::move(x), std::move(s), std::move(a), std::move(y),
                 feature_names_, sensitive_names_, s_kind_);
}

Dataset Dataset::WithFeatures(RowMatrix x) const {
  return Dataset(std::move(x), s_, a_, y_, feature_names_, sensitive_names_,
                 s_kind_);
}

Dataset Dataset::WithOutcomes(Vector y) const {
  return Dataset(x_, s_, a_, std::move(y), feature_names_, sensitive_names_,
                 s_kind_);
}

std::vector<std::vector<double>> ObservedLevels(const Dataset& ds) {
  std::vector<std::vector<double>> levels;
  for (Index j = 0; j < ds.num_sensitive(); ++j) {
    if (ds.s_kind()[j] != SensitiveKind::kDiscrete) {
      throw ConfigError("sensitive column '" + ds.sensitive_names()[j] +
                        "' is continuous; it has no level set");
    }
    std::set<double> distinct;
    for (Index i = 0; i < ds.size(); ++i) distinct.insert(ds.s()(i, j));
    levels.emplace_back(distinct.begin(), distinct.end());
  }
  return levels;
}

// ---- Standardizer ----------------------------------------------------------

Standardizer Standardizer::Fit(const RowMatrix& m, bool skip_indicators) {
  Standardizer st;
  const Index n = m.rows();
  for (Index j = 0; j < m.cols(); ++j) {
    const auto col = m.col(j);
    bool indicator = false;
    if (skip_indicators) {
      indicator = true;
      for (Index i = 0; i < n && indicator; ++i) {
        indicator = col[i] == 0.0 || col[i] == 1.0;
      }
    }
    if (indicator) {
      st.mean_.push_back(0.0);
      st.scale_.push_back(1.0);
      continue;
    }
    const double mean = col.mean();
    double ss = 0.0;
    for (Index i = 0; i < n; ++i) ss += (col[i] - mean) * (col[i] - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    st.mean_.push_back(mean);
    if (sd > 0.0) {
      st.scale_.push_back(sd);
    } else {
      st.scale_.push_back(1.0);
      st.degenerate_.push_back(j);
    }
  }
  return st;
}

RowMatrix Standardizer::Apply(const RowMatrix& m) const {
  RowMatrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    ApplyInPlace({out.data() + i * out.cols(), static_cast<size_t>(out.cols())});
  }
  return out;
}

void Standardizer::ApplyInPlace(std::span<double> row) const {
  for (size_t j = 0; j < row.size(); ++j) {
    row[j] = (row[j] - mean_[j]) / scale_[j];
  }
}

// ---- Scenario names --------------------------------------------------------

ScenarioKind ParseScenarioKind(const std::string& name) {
  static const std::map<std::string, ScenarioKind> kNames = {
      {"example1", ScenarioKind::kExample1},
      {"example2", ScenarioKind::kExample2},
      {"noise_s", ScenarioKind::kNoiseS},
      {"positivity_violation", ScenarioKind::kPositivityViolation},
      {"confounding_violation", ScenarioKind::kConfoundingViolation},
  };
  auto it = kNames.find(name);
  if (it == kNames.end()) throw ConfigError("unknown scenario '" + name + "'");
  return it->second;
}

std::string ToString(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kExample1:
      return "example1";
    case ScenarioKind::kExample2:
      return "example2";
    case ScenarioKind::kNoiseS:
      return "noise_s";
    case ScenarioKind::kPositivityViolation:
      return "positivity_violation";
    case ScenarioKind::kConfoundingViolation:
      return "confounding_violation";
  }
  throw ConfigError("invalid scenario kind");
}

SensitiveKind ParseSensitiveKind(const std::string& name) {
  if (name == "discrete") return SensitiveKind::kDiscrete;
  if (name == "continuous") return SensitiveKind::kContinuous;
  throw ConfigError("unknown s_kind '" + name + "'");
}

std::string ToString(SensitiveKind kind) {
  return kind == SensitiveKind::kDiscrete ? "discrete" : "continuous";
}

bool IsRandomized(ScenarioKind kind) {
  return kind == ScenarioKind::kExample1 || kind == ScenarioKind::kNoiseS;
}

// ---- Generators ------------------------------------------------------------

namespace {

double Indicator(bool b) { return b ? 1.0 : 0.0; }

double Example1Mean(std::span<const double> x, std::span<const double> s,
                    Action a) {
  const double t = Indicator(IsTreated(a));
  const double sv = s[0];
  if (x[0] > 0.5) return 5.0 + 10.0 * t + 22.0 * sv - 24.0 * t * sv;
  return 11.0 + 19.0 * t + 2.0 * sv - 32.0 * t * sv;
}

double Example2Mean(std::span<const double> x, std::span<const double> s,
                    Action a) {
  const double t = Indicator(IsTreated(a));
  const double sv = s[0];
  const double es = std::exp(sv);
  const double ex4 = std::exp(x[3]);
  const double h1 = 1.0 + x[0] - x[1] + x[2] * x[2] + ex4;
  const double h2 = 1.0 + 5.0 * x[0] - 2.0 * x[1] + 3.0 * x[2] + 2.0 * ex4;
  return (0.5 + t + es - 2.5 * sv * t) * h1 +
         (1.0 + 2.0 * t + 0.2 * es - 3.5 * sv * t) * h2;
}

double NoiseSMean(std::span<const double> x, std::span<const double>,
                  Action a) {
  const double t = Indicator(IsTreated(a));
  if (x[0] <= 0.5) {
    return 8.0 + 12.0 * t + 16.0 * std::exp(x[1]) - 26.0 * t * x[1];
  }
  return 13.0 + 3.0 * t + 2.0 * std::exp(x[1]) - 8.0 * t * x[1];
}

double Example2Propensity(double coef, std::span<const double> x,
                          std::span<const double> s) {
  const double lin = -s[0] + x[0] - x[1] + x[2] - x[3] + x[4] - x[5];
  return Expit(coef * lin);
}

double BetaMixture(Rng& rng) {
  return rng.Bernoulli(0.5) ? rng.Beta(4.0, 1.0) : rng.Beta(1.0, 4.0);
}

Index FeatureCount(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kExample1:
      return 1;
    case ScenarioKind::kNoiseS:
      return 2;
    default:
      return 6;
  }
}

}  // namespace

OracleModel MakeOracle(const SyntheticScenario& scenario) {
  if (!(scenario.noise_sd >= 0.0) || !std::isfinite(scenario.noise_sd)) {
    throw ConfigError("noise_sd must be a finite non-negative number");
  }
  OracleModel oracle;
  oracle.noise_sd = scenario.noise_sd;
  switch (scenario.kind) {
    case ScenarioKind::kExample1:
      oracle.mean_fn = Example1Mean;
      oracle.propensity_fn = [](auto, auto) { return 0.5; };
      break;
    case ScenarioKind::kNoiseS:
      oracle.mean_fn = NoiseSMean;
      oracle.propensity_fn = [](auto, auto) { return 0.5; };
      break;
    case ScenarioKind::kExample2:
    case ScenarioKind::kConfoundingViolation:
      oracle.mean_fn = Example2Mean;
      oracle.propensity_fn = [](auto x, auto s) {
        return Example2Propensity(0.6, x, s);
      };
      break;
    case ScenarioKind::kPositivityViolation:
      oracle.mean_fn = Example2Mean;
      oracle.propensity_fn = [](auto x, auto s) {
        return Example2Propensity(-1.2, x, s);
      };
      break;
    default:
      throw ConfigError("invalid scenario kind");
  }
  return oracle;
}

SyntheticDraw Generate(const SyntheticScenario& scenario, Index n,
                       uint64_t seed) {
  if (n < 1) throw ConfigError("generate: n must be at least 1");
  if (scenario.s_kind != SensitiveKind::kDiscrete &&
      scenario.s_kind != SensitiveKind::kContinuous) {
    throw ConfigError("invalid s_kind");
  }
  OracleModel oracle = MakeOracle(scenario);
  const bool discrete = scenario.s_kind == SensitiveKind::kDiscrete;
  const Index p = FeatureCount(scenario.kind);

  Rng root(seed);
  Rng rng_x = root.Stream("x");
  Rng rng_s = root.Stream("s");
  Rng rng_a = root.Stream("a");
  Rng rng_y = root.Stream("y");
  Rng rng_m = root.Stream("measurement");

  RowMatrix latent(n, p);
  RowMatrix recorded(n, p);
  RowMatrix s(n, 1);
  std::vector<Action> a(n);
  Vector y(n);

  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) latent(i, j) = rng_x.Uniform();
    const auto xi = RowSpan(latent, i);

    double si = 0.0;
    switch (scenario.kind) {
      case ScenarioKind::kExample1:
        si = discrete ? Indicator(rng_s.Bernoulli(0.5)) : BetaMixture(rng_s);
        break;
      case ScenarioKind::kNoiseS: {
        const double z = -2.5 * (1.0 - xi[0] - xi[1]);
        si = discrete ? Indicator(rng_s.Bernoulli(Expit(z))) : Expit(z);
        break;
      }
      default: {
        if (discrete) {
          double sum = 0.0;
          for (Index j = 0; j < p; ++j) sum += xi[j];
          si = Indicator(rng_s.Bernoulli(Expit(-2.5 + 0.8 * sum)));
        } else {
          si = BetaMixture(rng_s);
        }
        break;
      }
    }
    s(i, 0) = si;

    const double prop = oracle.propensity_fn(xi, RowSpan(s, i));
    a[i] = rng_a.Bernoulli(prop) ? Action::kPlus : Action::kMinus;
    y[i] = oracle.mean_fn(xi, RowSpan(s, i), a[i]) +
           scenario.noise_sd * rng_y.Normal();

    recorded.row(i) = latent.row(i);
    if (scenario.kind == ScenarioKind::kConfoundingViolation) {
      recorded(i, 0) += rng_m.Normal();
    }
  }

  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  Dataset data(std::move(recorded), std::move(s), std::move(a), std::move(y),
               std::move(names), {"s"}, {scenario.s_kind});
  return {std::move(data), std::move(oracle), std::move(latent)};
}

// ---- CSV -------------------------------------------------------------------

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

double ParseCell(const std::string& cell, size_t row, const std::string& col) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (cell.empty() || used != cell.size() || !std::isfinite(v)) {
    throw IngestionError("row " + std::to_string(row) + ", column '" + col +
                         "': non-numeric cell '" + cell + "'");
  }
  return v;
}

}  // namespace

Dataset LoadCsv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestionError("'" + path + "' has no header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = SplitCsvLine(line);
  auto column = [&](const std::string& name) -> size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw IngestionError("row 1, column '" + name + "': missing column");
    }
    return static_cast<size_t>(it - header.begin());
  };

  std::vector<size_t> fcols, scols;
  for (const auto& f : schema.features) fcols.push_back(column(f));
  for (const auto& s : schema.sensitive) scols.push_back(column(s));
  const size_t acol = column(schema.action);
  const size_t ycol = column(schema.outcome);

  std::map<std::string, std::string> transforms;
  for (const auto& [col, kind] : schema.transforms) {
    if (kind != "log1p") {
      throw ConfigError("unsupported transform '" + kind + "' on '" + col + "'");
    }
    column(col);
    transforms[col] = kind;
  }

  std::vector<SensitiveKind> kinds = schema.sensitive_kinds;
  if (kinds.empty()) kinds.assign(scols.size(), SensitiveKind::kContinuous);
  if (kinds.size() != scols.size()) {
    throw ConfigError("sensitive_kinds must match the sensitive columns");
  }

  std::vector<std::pair<std::string, Action>> codes = schema.action_codes;
  if (codes.empty()) {
    codes = {{"0", Action::kMinus}, {"-1", Action::kMinus}, {"1", Action::kPlus}};
  }

  auto cell_value = [&](const std::vector<std::string>& fields, size_t c,
                        size_t row) {
    const std::string& name = header[c];
    double v = ParseCell(fields[c], row, name);
    auto it = transforms.find(name);
    if (it != transforms.end()) {
      if (v <= -1.0) {
        throw IngestionError("row " + std::to_string(row) + ", column '" +
                             name + "': log1p of value <= -1");
      }
      v = std::log1p(v);
    }
    return v;
  };

  std::vector<std::vector<double>> xs, ss;
  std::vector<Action> actions;
  std::vector<double> ys;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != header.size()) {
      throw IngestionError("row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    std::vector<double> xr, sr;
    for (size_t c : fcols) xr.push_back(cell_value(fields, c, row));
    for (size_t c : scols) sr.push_back(cell_value(fields, c, row));
    const std::string& code = fields[acol];
    auto it = std::find_if(codes.begin(), codes.end(),
                           [&](const auto& kv) { return kv.first == code; });
    if (it == codes.end()) {
      throw IngestionError("row " + std::to_string(row) + ", column '" +
                           header[acol] + "': unknown action code '" + code +
                           "'");
    }
    actions.push_back(it->second);
    ys.push_back(cell_value(fields, ycol, row));
    xs.push_back(std::move(xr));
    ss.push_back(std::move(sr));
  }
  if (ys.empty()) throw IngestionError("'" + path + "' has no data rows");

  const Index n = static_cast<Index>(ys.size());
  RowMatrix x(n, static_cast<Index>(fcols.size()));
  RowMatrix s(n, static_cast<Index>(scols.size()));
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = xs[i][j];
    for (Index j = 0; j < s.cols(); ++j) s(i, j) = ss[i][j];
    y[i] = ys[i];
  }
  return Dataset(std::move(x), std::move(s), std::move(actions), std::move(y),
                 schema.features, schema.sensitive, std::move(kinds));
}

// ---- Split -----------------------------------------------------------------

std::pair<Dataset, Dataset> Split(const Dataset& ds, double train_fraction,
                                  uint64_t seed, bool standardize) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  const Index n = ds.size();
  const Index n_train = static_cast<Index>(
      std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw ConfigError("train_fraction " + std::to_string(train_fraction) +
                      " leaves an empty split for n=" + std::to_string(n));
  }
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng = Rng(seed).Stream("split");
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<Index> train_rows(perm.begin(), perm.begin() + n_train);
  std::vector<Index> test_rows(perm.begin() + n_train, perm.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  Dataset train = ds.Subset(train_rows);
  Dataset test = ds.Subset(test_rows);
  if (!standardize) return {std::move(train), std::move(test)};
  const Standardizer st = Standardizer::Fit(train.x(), /*skip_indicators=*/true);
  return {train.WithFeatures(st.Apply(train.x())),
          test.WithFeatures(st.Apply(test.x()))};
}

}  // namespace rise
