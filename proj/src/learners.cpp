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

#include "rise/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rise/parallel.hpp"

namespace rise {

// ---- Config ----------------------------------------------------------------

nlohmann::json ToJson(const LearnerConfig& cfg) {
  nlohmann::json j;
  j["family"] = cfg.family == Family::kLinear ? "linear" : "feedforward";
  j["hidden_layers"] = cfg.hidden_layers;
  j["activation"] = ToString(cfg.activation);
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["ridge_penalty"] = cfg.ridge_penalty;
  j["seed"] = cfg.seed;
  j["patience"] = cfg.patience;
  return j;
}

LearnerConfig LearnerConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("learner config must be an object");
  LearnerConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "family") {
        const auto name = value.get<std::string>();
        if (name == "linear") {
          cfg.family = Family::kLinear;
        } else if (name == "feedforward") {
          cfg.family = Family::kFeedforward;
        } else {
          throw ConfigError("unknown learner family '" + name + "'");
        }
      } else if (key == "hidden_layers") {
        cfg.hidden_layers = value.get<std::vector<int>>();
      } else if (key == "activation") {
        cfg.activation = ParseActivation(value.get<std::string>());
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "epochs") {
        cfg.epochs = value.get<int>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<int>();
      } else if (key == "ridge_penalty") {
        cfg.ridge_penalty = value.get<double>();
      } else if (key == "seed") {
        cfg.seed = value.get<uint64_t>();
      } else if (key == "patience") {
        cfg.patience = value.get<int>();
      } else {
        throw ConfigError("unknown learner key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad learner config: ") + e.what());
  }
  Validate(cfg);
  return cfg;
}

void Validate(const LearnerConfig& cfg) {
  if (cfg.family == Family::kFeedforward) {
    for (int h : cfg.hidden_layers) {
      if (h <= 0) throw ConfigError("hidden layer widths must be positive");
    }
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (cfg.epochs <= 0) throw ConfigError("epochs must be positive");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(cfg.ridge_penalty >= 0.0)) {
    throw ConfigError("ridge_penalty must be non-negative");
  }
  if (cfg.patience <= 0) throw ConfigError("patience must be positive");
}

std::vector<LearnerConfig> DefaultGrid() {
  std::vector<LearnerConfig> grid;
  LearnerConfig linear;
  linear.family = Family::kLinear;
  linear.hidden_layers.clear();
  linear.epochs = 100;
  grid.push_back(linear);
  for (int depth : {1, 2}) {
    for (int width : {32, 64}) {
      for (double lr : {1e-2, 1e-3}) {
        for (int epochs : {100, 200}) {
          LearnerConfig cfg;
          cfg.family = Family::kFeedforward;
          cfg.hidden_layers.assign(depth, width);
          cfg.activation = Activation::kRelu;
          cfg.learning_rate = lr;
          cfg.epochs = epochs;
          grid.push_back(cfg);
        }
      }
    }
  }
  return grid;
}

// ---- Fitting internals -----------------------------------------------------

class PredictorBuilder {
 public:
  static Predictor Build(PredictorKind kind, double tau, const LearnerConfig& cfg,
                         Standardizer input, double center, double scale,
                         Network net, std::vector<std::string> warnings,
                         std::vector<double> trace) {
    Predictor p;
    p.kind_ = kind;
    p.tau_ = tau;
    p.config_ = cfg;
    p.input_ = std::move(input);
    p.target_center_ = center;
    p.target_scale_ = scale;
    p.net_ = std::move(net);
    p.warnings_ = std::move(warnings);
    p.trace_ = std::move(trace);
    return p;
  }
};

namespace {

// Standardized inputs as a features x samples matrix.
Eigen::MatrixXd ColumnInputs(const RowMatrix& x, const Standardizer& st) {
  Eigen::MatrixXd out(x.cols(), x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      out(j, i) = (x(i, j) - st.mean()[j]) / st.scale()[j];
    }
  }
  return out;
}

std::vector<std::string> DegenerateWarnings(const Standardizer& st) {
  std::vector<std::string> w;
  for (Index j : st.degenerate()) {
    w.push_back("input column " + std::to_string(j) +
                " has zero variance; relying on the ridge penalty");
  }
  return w;
}

void CheckShapes(const RowMatrix& x, const Vector& y, const Vector& weights) {
  if (x.rows() == 0) throw FitError("no training rows");
  if (y.size() != x.rows()) throw FitError("target length != row count");
  if (weights.size() != 0 && weights.size() != x.rows()) {
    throw FitError("weight length != row count");
  }
  for (Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw FitError("non-finite target");
  }
}

// Scales weights to mean one; empty stays empty.
Vector NormalizedWeights(const Vector& weights) {
  if (weights.size() == 0) return weights;
  double total = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw FitError("weights must be finite and non-negative");
    }
    total += weights[i];
  }
  if (!(total > 0.0)) throw FitError("all weights are zero");
  const double max_w = weights.maxCoeff();
  if (weights.minCoeff() == max_w) return Vector::Ones(weights.size());
  return weights * (static_cast<double>(weights.size()) / total);
}

std::pair<double, double> TargetScaling(const Vector& y) {
  const double mean = y.mean();
  const double var =
      y.size() > 1 ? (y.array() - mean).square().sum() / (y.size() - 1) : 0.0;
  const double sd = std::sqrt(var);
  return {mean, sd > 0.0 ? sd : 1.0};
}

std::vector<double> Train(Network& net, const Eigen::MatrixXd& inputs,
                          const Vector& targets, const Vector& weights,
                          const Loss& loss, const LearnerConfig& cfg,
                          Rng& rng) {
  const Index n = inputs.cols();
  const Index p = inputs.rows();
  const double initial =
      net.LossAndGradient(inputs, targets, weights, loss, cfg.ridge_penalty,
                          nullptr);
  if (!std::isfinite(initial)) {
    throw ConvergenceError("initial loss is not finite", {initial});
  }

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<Network::Layer> m1, m2, grads;
  for (const auto& l : net.layers()) {
    m1.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                  Eigen::VectorXd::Zero(l.bias.size())});
  }
  m2 = m1;

  const Index batch = std::min<Index>(cfg.batch_size, n);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Eigen::MatrixXd xb(p, batch);
  Vector yb(batch), wb(weights.size() ? batch : 0);
  std::vector<double> trace;
  double best = std::numeric_limits<double>::infinity();
  int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    const double lr =
        cfg.learning_rate * (1.0 - 0.9 * static_cast<double>(epoch) / cfg.epochs);
    double epoch_loss = 0.0;
    for (Index start = 0; start < n; start += batch) {
      const Index len = std::min(batch, n - start);
      if (len != xb.cols()) {
        xb.resize(p, len);
        yb.resize(len);
        if (weights.size()) wb.resize(len);
      }
      for (Index k = 0; k < len; ++k) {
        const Index i = order[start + k];
        xb.col(k) = inputs.col(i);
        yb[k] = targets[i];
        if (weights.size()) wb[k] = weights[i];
      }
      const double value = net.LossAndGradient(xb, yb, wb, loss,
                                               cfg.ridge_penalty, &grads);
      epoch_loss += value * static_cast<double>(len);
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto& layers = net.layers();
      for (size_t l = 0; l < layers.size(); ++l) {
        m1[l].weight = kBeta1 * m1[l].weight + (1.0 - kBeta1) * grads[l].weight;
        m2[l].weight = kBeta2 * m2[l].weight +
                       (1.0 - kBeta2) * grads[l].weight.cwiseAbs2();
        m1[l].bias = kBeta1 * m1[l].bias + (1.0 - kBeta1) * grads[l].bias;
        m2[l].bias =
            kBeta2 * m2[l].bias + (1.0 - kBeta2) * grads[l].bias.cwiseAbs2();
        layers[l].weight.array() -=
            lr * (m1[l].weight.array() / c1) /
            ((m2[l].weight.array() / c2).sqrt() + kEps);
        layers[l].bias.array() -= lr * (m1[l].bias.array() / c1) /
                                  ((m2[l].bias.array() / c2).sqrt() + kEps);
      }
    }
    epoch_loss /= static_cast<double>(n);
    trace.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss)) {
      throw ConvergenceError("training loss diverged", trace);
    }
    best = std::min(best, epoch_loss);
    if (epoch + 1 == cfg.patience && !(best < initial) && initial > 1e-12) {
      trace.insert(trace.begin(), initial);
      throw ConvergenceError("loss did not decrease within " +
                                 std::to_string(cfg.patience) + " epochs",
                             trace);
    }
  }
  return trace;
}

// Lower empirical tau-quantile, a minimizer of the mean pinball loss.
double EmpiricalQuantile(std::vector<double> values, double tau) {
  const size_t n = values.size();
  size_t k = static_cast<size_t>(std::ceil(tau * static_cast<double>(n)));
  k = std::clamp<size_t>(k, 1, n);
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

Network NewNetwork(Index p, const LearnerConfig& cfg) {
  Rng rng = Rng(cfg.seed).Stream("init");
  const std::vector<int> hidden =
      cfg.family == Family::kLinear ? std::vector<int>{} : cfg.hidden_layers;
  return Network(p, hidden, cfg.activation, rng);
}

Network LinearLeastSquares(const Eigen::MatrixXd& inputs, const Vector& t,
                           const Vector& weights, double ridge,
                           const LearnerConfig& cfg) {
  const Index p = inputs.rows();
  const Index n = inputs.cols();
  Eigen::MatrixXd design(n, p + 1);
  design.leftCols(p) = inputs.transpose();
  design.col(p).setOnes();
  Eigen::MatrixXd weighted = design;
  if (weights.size()) weighted = weights.asDiagonal() * design;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd gram = design.transpose() * weighted * inv_n;
  Vector rhs = weighted.transpose() * t * inv_n;
  for (Index j = 0; j < p; ++j) gram(j, j) += 2.0 * ridge;
  Vector theta;
  if (ridge > 0.0) {
    theta = gram.ldlt().solve(rhs);
  } else {
    theta = gram.completeOrthogonalDecomposition().solve(rhs);
  }
  Network net = NewNetwork(p, cfg);
  net.layers()[0].weight = theta.head(p).transpose();
  net.layers()[0].bias[0] = theta[p];
  return net;
}

}  // namespace

// ---- Public fits -----------------------------------------------------------

Predictor FitMean(const RowMatrix& x, const Vector& y, const Vector& weights,
                  const LearnerConfig& cfg) {
  Validate(cfg);
  CheckShapes(x, y, weights);
  if (cfg.family == Family::kLinear && x.rows() < x.cols() + 1) {
    throw FitError("linear mean fit needs at least p+1 rows");
  }
  const Vector w = NormalizedWeights(weights);
  const Standardizer st = Standardizer::Fit(x, /*skip_indicators=*/false);
  const auto [center, scale] = TargetScaling(y);
  const Eigen::MatrixXd inputs = ColumnInputs(x, st);
  const Vector t = (y.array() - center) / scale;

  Network net;
  std::vector<double> trace;
  if (cfg.family == Family::kLinear) {
    net = LinearLeastSquares(inputs, t, w, cfg.ridge_penalty, cfg);
  } else {
    net = NewNetwork(x.cols(), cfg);
    Rng rng = Rng(cfg.seed).Stream("shuffle");
    trace = Train(net, inputs, t, w, Loss{LossKind::kSquared}, cfg, rng);
  }
  return PredictorBuilder::Build(PredictorKind::kMean, 0.5, cfg, st, center,
                                 scale, std::move(net), DegenerateWarnings(st),
                                 std::move(trace));
}

Predictor FitQuantile(const RowMatrix& x, const Vector& y, double tau,
                      const LearnerConfig& cfg) {
  Validate(cfg);
  CheckShapes(x, y, Vector());
  if (!(tau > 0.0 && tau < 1.0)) throw FitError("tau must lie in (0, 1)");
  if (x.rows() < 10) throw FitError("quantile fit needs at least 10 rows");
  const Standardizer st = Standardizer::Fit(x, /*skip_indicators=*/false);
  const auto [center, scale] = TargetScaling(y);
  const Eigen::MatrixXd inputs = ColumnInputs(x, st);
  const Vector t = (y.array() - center) / scale;

  Network net = NewNetwork(x.cols(), cfg);
  Rng rng = Rng(cfg.seed).Stream("shuffle");
  const Loss loss{LossKind::kPinball, tau};
  std::vector<double> trace = Train(net, inputs, t, Vector(), loss, cfg, rng);

  // Exact minimization over the output bias: with everything else fixed the
  // optimal offset is an empirical tau-quantile of the residuals.
  const double bias = net.output_bias();
  const Vector fitted = net.Forward(inputs);
  std::vector<double> residuals(t.size());
  for (Index i = 0; i < t.size(); ++i) residuals[i] = t[i] - (fitted[i] - bias);
  net.output_bias() = EmpiricalQuantile(std::move(residuals), tau);

  return PredictorBuilder::Build(PredictorKind::kQuantile, tau, cfg, st, center,
                                 scale, std::move(net), DegenerateWarnings(st),
                                 std::move(trace));
}

Predictor FitWeightedClassifier(const RowMatrix& x, const Vector& labels,
                                const Vector& weights,
                                const LearnerConfig& cfg) {
  Validate(cfg);
  CheckShapes(x, labels, weights);
  if (weights.size() != labels.size()) {
    throw FitError("classifier needs one weight per row");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1.0 && labels[i] != -1.0) {
      throw FitError("labels must be -1 or +1");
    }
  }
  const Vector w = NormalizedWeights(weights);
  const Standardizer st = Standardizer::Fit(x, /*skip_indicators=*/false);
  const Eigen::MatrixXd inputs = ColumnInputs(x, st);
  Network net = NewNetwork(x.cols(), cfg);
  Rng rng = Rng(cfg.seed).Stream("shuffle");
  std::vector<double> trace =
      Train(net, inputs, labels, w, Loss{LossKind::kLogistic}, cfg, rng);
  return PredictorBuilder::Build(PredictorKind::kClassifierScore, 0.5, cfg, st,
                                 0.0, 1.0, std::move(net),
                                 DegenerateWarnings(st), std::move(trace));
}

Predictor Fit(Task task, const TrainingData& data, const LearnerConfig& cfg) {
  switch (task) {
    case Task::kMean:
      return FitMean(data.x, data.y, data.weights, cfg);
    case Task::kQuantile:
      return FitQuantile(data.x, data.y, data.tau, cfg);
    case Task::kClassifier:
      return FitWeightedClassifier(data.x, data.y, data.weights, cfg);
  }
  throw ConfigError("unknown task");
}

// ---- Predictor -------------------------------------------------------------

double Predictor::Predict(std::span<const double> x) const {
  if (static_cast<Index>(x.size()) != input_dim()) {
    throw FitError("predict: input dimension mismatch");
  }
  Eigen::MatrixXd col(x.size(), 1);
  for (size_t j = 0; j < x.size(); ++j) {
    col(j, 0) = (x[j] - input_.mean()[j]) / input_.scale()[j];
  }
  return target_center_ + target_scale_ * net_.Forward(col)[0];
}

Vector Predictor::PredictBatch(const RowMatrix& x) const {
  if (x.cols() != input_dim()) {
    throw FitError("predict: input dimension mismatch");
  }
  const Vector raw = net_.Forward(ColumnInputs(x, input_));
  return (target_center_ + target_scale_ * raw.array()).matrix();
}

Vector Predictor::LinearCoefficients() const {
  if (!net_.is_linear()) throw FitError("not a linear predictor");
  const Index p = input_dim();
  Vector coef(p + 1);
  const auto& layer = net_.layers().front();
  double offset = layer.bias[0];
  for (Index j = 0; j < p; ++j) {
    coef[j] = target_scale_ * layer.weight(0, j) / input_.scale()[j];
    offset -= layer.weight(0, j) * input_.mean()[j] / input_.scale()[j];
  }
  coef[p] = target_center_ + target_scale_ * offset;
  return coef;
}

nlohmann::json Predictor::ToJson() const {
  nlohmann::json j;
  switch (kind_) {
    case PredictorKind::kMean:
      j["kind"] = "mean";
      break;
    case PredictorKind::kQuantile:
      j["kind"] = "quantile";
      j["tau"] = tau_;
      break;
    case PredictorKind::kClassifierScore:
      j["kind"] = "classifier_score";
      break;
  }
  j["config"] = rise::ToJson(config_);
  j["input_mean"] = input_.mean();
  j["input_scale"] = input_.scale();
  j["target_center"] = target_center_;
  j["target_scale"] = target_scale_;
  j["network"] = net_.ToJson();
  return j;
}

// ---- Cross-validation ------------------------------------------------------

namespace {

TrainingData Rows(const TrainingData& data, const std::vector<Index>& rows) {
  TrainingData out;
  out.tau = data.tau;
  out.x.resize(static_cast<Index>(rows.size()), data.x.cols());
  out.y.resize(static_cast<Index>(rows.size()));
  if (data.weights.size()) out.weights.resize(static_cast<Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    out.x.row(k) = data.x.row(rows[k]);
    out.y[k] = data.y[rows[k]];
    if (data.weights.size()) out.weights[k] = data.weights[rows[k]];
  }
  return out;
}

double HeldOutLoss(Task task, const Predictor& model, const TrainingData& test) {
  const Vector pred = model.PredictBatch(test.x);
  double total = 0.0;
  double mass = 0.0;
  const Loss pinball{LossKind::kPinball, test.tau};
  for (Index i = 0; i < pred.size(); ++i) {
    const double w = test.weights.size() ? test.weights[i] : 1.0;
    double l = 0.0;
    switch (task) {
      case Task::kMean:
        l = (pred[i] - test.y[i]) * (pred[i] - test.y[i]);
        break;
      case Task::kQuantile:
        l = pinball.Value(pred[i], test.y[i]);
        break;
      case Task::kClassifier:
        l = (test.y[i] * pred[i] < 0.0) ? 1.0 : 0.0;
        break;
    }
    total += w * l;
    mass += w;
  }
  return mass > 0.0 ? total / mass : 0.0;
}

std::vector<std::vector<Index>> FoldRows(Index n, int folds, uint64_t seed) {
  if (folds < 2) throw FitError("cross-validation needs at least 2 folds");
  if (n / folds < 2) {
    throw FitError("cross-validation folds would hold fewer than 2 rows");
  }
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng = Rng(seed).Stream("folds");
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<std::vector<Index>> out(folds);
  for (Index k = 0; k < n; ++k) out[k % folds].push_back(perm[k]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

double FoldLoss(Task task, const TrainingData& data, const LearnerConfig& cfg,
                const std::vector<std::vector<Index>>& folds, int f) {
  std::vector<Index> train_rows;
  for (int g = 0; g < static_cast<int>(folds.size()); ++g) {
    if (g != f) {
      train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
  }
  std::sort(train_rows.begin(), train_rows.end());
  try {
    const Predictor model = Fit(task, Rows(data, train_rows), cfg);
    return HeldOutLoss(task, model, Rows(data, folds[f]));
  } catch (const FitError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

double CrossValidatedLoss(Task task, const TrainingData& data,
                          const LearnerConfig& cfg, int folds, uint64_t seed,
                          int threads) {
  const auto rows = FoldRows(data.x.rows(), folds, seed);
  std::vector<double> losses(folds);
  parallel::For(folds, threads,
                [&](int64_t f) { losses[f] = FoldLoss(task, data, cfg, rows, static_cast<int>(f)); });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / folds;
}

LearnerConfig Tune(Task task, const TrainingData& data,
                   std::span<const LearnerConfig> grid, int folds,
                   uint64_t seed, int threads) {
  if (grid.empty()) throw ConfigError("tuning grid is empty");
  const auto rows = FoldRows(data.x.rows(), folds, seed);
  if (grid.size() == 1) return grid.front();
  const int64_t jobs = static_cast<int64_t>(grid.size()) * folds;
  std::vector<double> losses(jobs);
  parallel::For(jobs, threads, [&](int64_t k) {
    losses[k] = FoldLoss(task, data, grid[k / folds], rows,
                         static_cast<int>(k % folds));
  });
  size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < grid.size(); ++c) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) total += losses[c * folds + f];
    const double mean = total / folds;
    if (mean < best_loss) {
      best_loss = mean;
      best = c;
    }
  }
  if (!std::isfinite(best_loss)) {
    throw FitError("every grid element failed to fit");
  }
  return grid[best];
}

}  // namespace rise
