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

#include "rise/network.hpp"

#include <cmath>

namespace rise {

double Loss::Value(double pred, double target) const {
  switch (kind) {
    case LossKind::kSquared: {
      const double r = pred - target;
      return 0.5 * r * r;
    }
    case LossKind::kPinball: {
      const double u = target - pred;
      return u >= 0.0 ? tau * u : (tau - 1.0) * u;
    }
    case LossKind::kLogistic: {
      const double m = target * pred;
      return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    }
  }
  return 0.0;
}

double Loss::Derivative(double pred, double target) const {
  switch (kind) {
    case LossKind::kSquared:
      return pred - target;
    case LossKind::kPinball:
      // d/dpred rho_tau(y - pred) = -(tau - 1{y - pred < 0}).
      return (target - pred < 0.0) ? 1.0 - tau : -tau;
    case LossKind::kLogistic:
      return -target * Expit(-target * pred);
  }
  return 0.0;
}

namespace {

void Activate(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSigmoid:
      z = z.unaryExpr([](double v) { return Expit(v); });
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Derivative of the activation expressed through its output.
Eigen::MatrixXd ActivationSlope(Activation a, const Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::kRelu:
      return (out.array() > 0.0).cast<double>().matrix();
    case Activation::kSigmoid:
      return (out.array() * (1.0 - out.array())).matrix();
    case Activation::kTanh:
      return (1.0 - out.array().square()).matrix();
  }
  return out;
}

}  // namespace

Network::Network(Eigen::Index input_dim, const std::vector<int>& hidden,
                 Activation activation, Rng& rng)
    : activation_(activation) {
  Eigen::Index in = input_dim;
  std::vector<Eigen::Index> widths(hidden.begin(), hidden.end());
  widths.push_back(1);
  for (Eigen::Index out : widths) {
    Layer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in, 1)));
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        layer.weight(r, c) = bound * (2.0 * rng.Uniform() - 1.0);
      }
      layer.bias[r] = bound * (2.0 * rng.Uniform() - 1.0);
    }
    layers_.push_back(std::move(layer));
    in = out;
  }
}

Eigen::VectorXd Network::Forward(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) Activate(activation_, z);
    a = std::move(z);
  }
  return a.row(0).transpose();
}

double Network::LossAndGradient(const Eigen::MatrixXd& inputs,
                                const Eigen::VectorXd& targets,
                                const Eigen::VectorXd& weights,
                                const Loss& loss, double ridge,
                                std::vector<Layer>* grads) const {
  const Eigen::Index n = inputs.cols();
  const size_t depth = layers_.size();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(depth + 1);
  acts.push_back(inputs);
  for (size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = layers_[l].weight * acts.back();
    z.colwise() += layers_[l].bias;
    if (l + 1 < depth) Activate(activation_, z);
    acts.push_back(std::move(z));
  }
  const auto& out = acts.back();

  double value = 0.0;
  Eigen::MatrixXd delta(1, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.size() ? weights[i] : 1.0;
    value += w * loss.Value(out(0, i), targets[i]);
    delta(0, i) = w * loss.Derivative(out(0, i), targets[i]) * inv_n;
  }
  value *= inv_n;
  for (const auto& layer : layers_) value += ridge * layer.weight.squaredNorm();
  if (grads == nullptr) return value;

  grads->resize(depth);
  for (size_t l = depth; l-- > 0;) {
    Layer& g = (*grads)[l];
    g.weight = delta * acts[l].transpose() + 2.0 * ridge * layers_[l].weight;
    g.bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers_[l].weight.transpose() * delta;
      delta = back.cwiseProduct(ActivationSlope(activation_, acts[l]));
    }
  }
  return value;
}

Eigen::Index Network::num_parameters() const {
  Eigen::Index count = 0;
  for (const auto& l : layers_) count += l.weight.size() + l.bias.size();
  return count;
}

Eigen::VectorXd Network::Flatten(const std::vector<Layer>& layers) {
  Eigen::Index count = 0;
  for (const auto& l : layers) count += l.weight.size() + l.bias.size();
  Eigen::VectorXd flat(count);
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    flat.segment(k, l.weight.size()) =
        Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    k += l.weight.size();
    flat.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return flat;
}

Eigen::VectorXd Network::Flatten() const { return Flatten(layers_); }

void Network::Unflatten(const Eigen::VectorXd& params) {
  if (params.size() != num_parameters()) {
    throw FitError("parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) =
        params.segment(k, l.weight.size());
    k += l.weight.size();
    l.bias = params.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

nlohmann::json Network::ToJson() const {
  nlohmann::json j;
  j["activation"] = ToString(activation_);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    nlohmann::json lj;
    lj["rows"] = l.weight.rows();
    lj["cols"] = l.weight.cols();
    std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
    lj["weight_colmajor"] = w;
    lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

std::string ToString(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kTanh:
      return "tanh";
  }
  return "relu";
}

Activation ParseActivation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "'");
}

}  // namespace rise
