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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
//
// usage: acceptance <configs dir> <rise binary> <scratch dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rise/drbaselines.hpp"
#include "rise/eval.hpp"
#include "rise/network.hpp"
#include "rise/runner.hpp"

namespace {

namespace fs = std::filesystem;
using rise::Action;
using rise::RowMatrix;
using rise::Vector;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

const std::vector<std::string> kBaselines = {"base", "exp", "pt_base", "pt_exp"};
const std::vector<std::string> kAll = {"base", "exp", "pt_base", "pt_exp", "rise"};

class Scenarios {
 public:
  explicit Scenarios(fs::path dir) : dir_(std::move(dir)) {}

  const rise::AggregateReport& Get(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = rise::LoadRunConfig((dir_ / (name + ".json")).string());
    auto out = rise::Execute(cfg);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    std::fprintf(stderr, "ran %s (%d replications, %.0f s)\n", name.c_str(),
                 cfg.replications, secs);
    return cache_.emplace(name, std::move(out.aggregate)).first->second;
  }

  // NaN when absent.
  double Mean(const std::string& scenario, const std::string& method,
              const std::string& metric, const std::string& group) {
    for (const auto& c : Get(scenario).cells) {
      if (c.method == method && c.metric == metric && c.group == group) {
        return c.mean ? *c.mean : std::nan("");
      }
    }
    return std::nan("");
  }

  bool Absent(const std::string& scenario, const std::string& method,
              const std::string& metric, const std::string& group) {
    return std::isnan(Mean(scenario, method, metric, group));
  }

 private:
  fs::path dir_;
  std::map<std::string, rise::AggregateReport> cache_;
};

bool Near(double got, double want, double tol) {
  return std::abs(got - want) <= tol;
}

double MaxOver(Scenarios& sc, const std::string& scenario,
               const std::vector<std::string>& methods, const std::string& metric,
               const std::string& group) {
  double best = -1e300;
  for (const auto& m : methods) best = std::max(best, sc.Mean(scenario, m, metric, group));
  return best;
}

double MinOver(Scenarios& sc, const std::string& scenario,
               const std::vector<std::string>& methods, const std::string& metric,
               const std::string& group) {
  double lo = 1e300;
  for (const auto& m : methods) lo = std::min(lo, sc.Mean(scenario, m, metric, group));
  return lo;
}

Verdict Criterion1(Scenarios& sc) {
  const std::string s = "example1_discrete";
  const double obj = sc.Mean(s, "rise", "objective", "all");
  const double val = sc.Mean(s, "rise", "value", "all");
  const double vul = sc.Mean(s, "rise", "value", "vulnerable");
  const double exp_val = sc.Mean(s, "exp", "value", "all");
  const double exp_vul = sc.Mean(s, "exp", "value", "vulnerable");
  return {Near(obj, 12.0, 0.3) && Near(val, 13.0, 0.3) && Near(vul, 14.0, 0.3) &&
              exp_val >= 14.0 && exp_vul <= 8.0,
          "rise obj " + Fmt("%.3f", obj) + ", value " + Fmt("%.3f", val) +
              ", value vul " + Fmt("%.3f", vul) + "; exp value " +
              Fmt("%.3f", exp_val) + ", value vul " + Fmt("%.3f", exp_vul)};
}

Verdict Criterion2(Scenarios& sc) {
  const std::string s = "example1_continuous";
  const double obj = sc.Mean(s, "rise", "objective", "all");
  const double vul = sc.Mean(s, "rise", "value", "vulnerable");
  return {Near(obj, 12.2, 0.5) && Near(vul, 13.7, 0.5),
          "rise obj " + Fmt("%.3f", obj) + ", value vul " + Fmt("%.3f", vul)};
}

Verdict Criterion3(Scenarios& sc) {
  const std::string s = "example2_discrete";
  const double obj = sc.Mean(s, "rise", "objective", "all");
  const double vul = sc.Mean(s, "rise", "value", "vulnerable");
  const double val = sc.Mean(s, "rise", "value", "all");
  const double b_obj = MaxOver(sc, s, kBaselines, "objective", "all");
  const double b_vul = MaxOver(sc, s, kBaselines, "value", "vulnerable");
  const double b_val = MaxOver(sc, s, kBaselines, "value", "all");
  const bool ranks = obj - b_obj >= 2.0 && vul - b_vul >= 4.0 && b_val - val <= 2.5;
  const bool cells = Near(obj, 13.5, 1.0) && Near(vul, 22.1, 1.0) && Near(val, 17.4, 1.0);
  return {ranks && cells,
          "rise obj " + Fmt("%.3f", obj) + " vs best baseline " + Fmt("%.3f", b_obj) +
              "; value vul " + Fmt("%.3f", vul) + " vs " + Fmt("%.3f", b_vul) +
              "; value " + Fmt("%.3f", val) + " vs " + Fmt("%.3f", b_val)};
}

Verdict Criterion4(Scenarios& sc) {
  const std::string lo = "example2_continuous_tau010", mid = "example2_continuous_tau050";
  const double obj = sc.Mean(lo, "rise", "objective", "all");
  const double b_obj = MaxOver(sc, lo, kBaselines, "objective", "all");
  const double spread = MaxOver(sc, mid, kAll, "objective", "all") -
                        MinOver(sc, mid, kAll, "objective", "all");
  return {obj >= 13.0 && obj - b_obj >= 4.0 && spread <= 1.0,
          "tau 0.1: rise obj " + Fmt("%.3f", obj) + " vs best baseline " +
              Fmt("%.3f", b_obj) + "; tau 0.5 objective spread " + Fmt("%.3f", spread)};
}

Verdict Criterion5(Scenarios& sc) {
  bool pass = true;
  std::string detail;
  for (const std::string s : {"noise_s_discrete", "noise_s_continuous"}) {
    const double obj_spread = MaxOver(sc, s, kAll, "objective", "all") -
                              MinOver(sc, s, kAll, "objective", "all");
    const double val_spread =
        MaxOver(sc, s, kAll, "value", "all") - MinOver(sc, s, kAll, "value", "all");
    bool absent = true;
    for (const auto& m : kAll) {
      absent = absent && sc.Absent(s, m, "objective", "vulnerable") &&
               sc.Absent(s, m, "value", "vulnerable");
    }
    pass = pass && obj_spread <= 0.5 && val_spread <= 0.5 && absent;
    detail += s + ": objective spread " + Fmt("%.3f", obj_spread) + ", value spread " +
              Fmt("%.3f", val_spread) + (absent ? ", vulnerable absent; " : ", vulnerable present; ");
  }
  return {pass, detail};
}

Verdict Criterion6(Scenarios& sc) {
  bool pass = true;
  std::string detail;
  for (const std::string s : {"positivity_discrete", "positivity_continuous",
                              "confounding_discrete", "confounding_continuous"}) {
    const double obj = sc.Mean(s, "rise", "objective", "all");
    const double vul = sc.Mean(s, "rise", "value", "vulnerable");
    const double b_obj = MaxOver(sc, s, kBaselines, "objective", "all");
    const double b_vul = MaxOver(sc, s, kBaselines, "value", "vulnerable");
    pass = pass && obj > b_obj && vul > b_vul;
    detail += s + ": obj " + Fmt("%.2f", obj) + "/" + Fmt("%.2f", b_obj) + ", vul " +
              Fmt("%.2f", vul) + "/" + Fmt("%.2f", b_vul) + "; ";
  }
  return {pass, detail};
}

// The four toy cells, equally weighted, against the injected oracle.
Verdict Criterion7() {
  RowMatrix x(4, 1), s(4, 1);
  x << 0.25, 0.25, 0.75, 0.75;
  s << 0, 1, 0, 1;
  const rise::Dataset cells(x, s, std::vector<Action>(4, Action::kPlus),
                            Vector::Zero(4), {"x"}, {"s"},
                            {rise::SensitiveKind::kDiscrete});
  const auto oracle = rise::MakeOracle(
      {rise::ScenarioKind::kExample1, rise::SensitiveKind::kDiscrete, 1.0});
  rise::SensitiveSpec spec;
  spec.levels = {{0, 1}};
  const auto em = rise::EvalModel::Oracle(cells, oracle.mean_fn, spec, {});

  // Mean-optimal rule: arm difference averaged over s.
  const auto fn = oracle.mean_fn;
  const auto averaged = rise::OutcomeModel::FromFunction(
      [fn](std::span<const double> xv, std::span<const double>, Action a) {
        const double s0 = 0, s1 = 1;
        return 0.5 * (fn(xv, {&s0, 1}, a) + fn(xv, {&s1, 1}, a));
      },
      false);
  const auto mean_opt = rise::FitBaseWith(averaged, 1);

  // Oracle RISE trained on a simulated draw.
  const auto draw = rise::Generate(
      {rise::ScenarioKind::kExample1, rise::SensitiveKind::kDiscrete, 1.0}, 2000, 1);
  rise::LearnerConfig clf;
  clf.epochs = 100;
  const auto robust = rise::FitRiseWith(
      draw.data, rise::OutcomeModel::FromFunction(oracle.mean_fn), spec, {}, clf, 1);

  const auto b = rise::Evaluate("base", mean_opt, em, cells,
                                rise::ValueDesign::kObservational);
  const auto r = rise::Evaluate("rise", robust, em, cells,
                                rise::ValueDesign::kObservational);
  const double tol = 1e-9;
  const bool pass = b.value_all && b.value_vulnerable && r.value_all &&
                    r.value_vulnerable && Near(*b.value_all, 15.5, tol) &&
                    Near(*b.value_vulnerable, 2.5, tol) && Near(*r.value_all, 13.0, tol) &&
                    Near(*r.value_vulnerable, 14.0, tol);
  auto show = [](const std::optional<double>& v) {
    return v ? Fmt("%.12g", *v) : std::string("-");
  };
  return {pass, "mean-optimal value " + show(b.value_all) + ", vul " +
                    show(b.value_vulnerable) + "; oracle rise value " +
                    show(r.value_all) + ", vul " + show(r.value_vulnerable)};
}

// Exhaustive search over rules on <= 12 distinct x values.
Verdict Criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> nx(2, 12), v(-10, 10);
  int failures = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = nx(gen);
    std::uniform_int_distribution<int> pick(0, k - 1);
    const int n = 3 * k;
    Vector g1(n), g2(n);
    std::vector<int> xi(n);
    for (int i = 0; i < n; ++i) {
      xi[i] = i < k ? i : pick(gen);
      g1[i] = v(gen);
      g2[i] = v(gen);
    }
    const auto table = rise::BuildContrast(g1, g2);
    double best_obj = -1e300, best_loss = 1e300;
    std::vector<int> argmax, argmin;
    std::vector<Action> d(n);
    for (int mask = 0; mask < (1 << k); ++mask) {
      for (int i = 0; i < n; ++i) {
        d[i] = (mask >> xi[i] & 1) ? Action::kPlus : Action::kMinus;
      }
      const double obj = rise::ContrastObjective(table, d);
      const double loss = rise::WeightedMisclassification(table, d);
      if (obj > best_obj) {
        best_obj = obj;
        argmax = {mask};
      } else if (obj == best_obj) {
        argmax.push_back(mask);
      }
      if (loss < best_loss) {
        best_loss = loss;
        argmin = {mask};
      } else if (loss == best_loss) {
        argmin.push_back(mask);
      }
    }
    // Per x value, the labels' weighted vote is a maximizer.
    int vote = 0;
    for (int j = 0; j < k; ++j) {
      double sum = 0;
      for (int i = 0; i < n; ++i) {
        if (xi[i] == j) sum += table.label[i] * table.weight[i];
      }
      if (sum > 0) vote |= 1 << j;
    }
    const bool vote_ok = std::find(argmax.begin(), argmax.end(), vote) != argmax.end();
    if (argmax != argmin || !vote_ok) ++failures;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failures == 0 && secs < 10.0,
          std::to_string(100 - failures) + "/100 tables agree, " + Fmt("%.2f s", secs)};
}

Verdict Criterion9() {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z(0, 2);
  rise::LearnerConfig cfg;
  cfg.family = rise::Family::kLinear;
  cfg.hidden_layers.clear();
  cfg.ridge_penalty = 0;
  cfg.epochs = 5;
  int ok = 0, total = 0;
  for (double tau : {0.1, 0.25, 0.5}) {
    for (int rep = 0; rep < 50; ++rep) {
      const int n = 10 + rep * 3;
      std::vector<double> ys(n);
      for (auto& y : ys) y = z(gen) + (rep % 5 == 0 ? std::round(z(gen)) : 0);
      if (rep % 7 == 0) ys[1] = ys[0];  // duplicate values
      cfg.seed = rep;
      const double q =
          rise::FitQuantile(RowMatrix(n, 0), Eigen::Map<Vector>(ys.data(), n), tau, cfg)
              .Predict({});
      const auto [lo, hi] = oracle::PinballMinimizers(ys, tau);
      const double slack = 1e-9 * std::max(1.0, std::abs(q));
      ok += q >= lo - slack && q <= hi + slack;
      ++total;
    }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " fits inside the empirical quantile interval"};
}

Verdict Criterion10() {
  std::mt19937_64 gen(10);
  int ok = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 10 + rep % 41, p = 1 + rep % 3, levels = 2 + rep % 5;
    std::uniform_int_distribution<int> fx(0, levels - 1), fs(-9, 9);
    RowMatrix x(n, p);
    rise::ScoreTable s;
    s.gamma_plus.resize(n);
    s.gamma_minus.resize(n);
    std::vector<std::vector<double>> rows;
    std::vector<double> gp, gm;
    for (int i = 0; i < n; ++i) {
      std::vector<double> row(p);
      for (int j = 0; j < p; ++j) row[j] = x(i, j) = fx(gen);
      rows.push_back(row);
      gp.push_back(s.gamma_plus[i] = fs(gen));
      gm.push_back(s.gamma_minus[i] = fs(gen));
    }
    const auto want = oracle::BruteForceTree(rows, gp, gm, 2).second;
    const double got = rise::TreeObjective(rise::FitPolicyTree(x, s, 2), x, s);
    ok += got == want;
  }
  return {ok == 50, std::to_string(ok) + "/50 trees match brute force exactly"};
}

Verdict Criterion11() {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z(0, 1);
  double worst = 0;
  for (auto kind : {rise::LossKind::kSquared, rise::LossKind::kLogistic}) {
    for (int rep = 0; rep < 10; ++rep) {
      rise::Rng rng(rep);
      rise::Network net(3, {6, 3}, rise::Activation::kTanh, rng);
      Eigen::MatrixXd in(3, 15);
      Vector y(15), w(15);
      for (int i = 0; i < 15; ++i) {
        for (int j = 0; j < 3; ++j) in(j, i) = z(gen);
        y[i] = kind == rise::LossKind::kLogistic ? (z(gen) > 0 ? 1 : -1) : z(gen);
        w[i] = 0.2 + std::abs(z(gen));
      }
      const rise::Loss loss{kind};
      std::vector<rise::Network::Layer> grads;
      net.LossAndGradient(in, y, w, loss, 1e-3, &grads);
      const Vector analytic = rise::Network::Flatten(grads);
      const Vector theta = net.Flatten();
      for (rise::Index k = 0; k < theta.size(); ++k) {
        const double h = 1e-6;
        Vector tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        net.Unflatten(tp);
        const double fp = net.LossAndGradient(in, y, w, loss, 1e-3, nullptr);
        net.Unflatten(tm);
        const double fm = net.LossAndGradient(in, y, w, loss, 1e-3, nullptr);
        const double numeric = (fp - fm) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-2});
        worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
      }
      net.Unflatten(theta);
    }
  }
  return {worst <= 1e-4, "max relative error " + Fmt("%.2e", worst)};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict Criterion12(const fs::path& configs, const std::string& binary,
                    const fs::path& scratch) {
  std::string results[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = scratch / ("determinism_" + std::to_string(k));
    fs::remove_all(out);
    const std::string cmd = "\"" + binary + "\" run --config \"" +
                            (configs / "example1_discrete.json").string() +
                            "\" --reps 2 --out \"" + out.string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "cli run failed: " + cmd};
    results[k] = Slurp(out / "results.jsonl");
  }
  const bool same = !results[0].empty() && results[0] == results[1];
  return {same, std::to_string(results[0].size()) + " bytes, " +
                    (same ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: acceptance <configs dir> <rise binary> <scratch dir>\n");
    return 2;
  }
  const fs::path configs = argv[1];
  const std::string binary = argv[2];
  const fs::path scratch = argv[3];
  fs::create_directories(scratch);
  Scenarios sc(configs);

  const std::vector<std::pair<int, std::function<Verdict()>>> checks = {
      {1, [&] { return Criterion1(sc); }},
      {2, [&] { return Criterion2(sc); }},
      {3, [&] { return Criterion3(sc); }},
      {4, [&] { return Criterion4(sc); }},
      {5, [&] { return Criterion5(sc); }},
      {6, [&] { return Criterion6(sc); }},
      {7, Criterion7},
      {8, Criterion8},
      {9, Criterion9},
      {10, Criterion10},
      {11, Criterion11},
      {12, [&] { return Criterion12(configs, binary, scratch); }},
  };
  int failed = 0;
  for (const auto& [id, check] : checks) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(checks.size()) - failed,
              checks.size());
  return failed == 0 ? 0 : 1;
}
