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

// Scalar-output feed-forward network with squared, pinball and logistic
// losses. A network without hidden layers is a linear model.

#ifndef RISE_NETWORK_HPP_
#define RISE_NETWORK_HPP_

#include <Eigen/Dense>
#include <vector>

#include "json.hpp"
#include "rise/common.hpp"

namespace rise {

enum class Activation { kRelu, kSigmoid, kTanh };

enum class LossKind { kSquared, kPinball, kLogistic };

struct Loss {
  LossKind kind = LossKind::kSquared;
  double tau = 0.5;  // pinball only

  // Squared: (f - y)^2 / 2. Pinball: rho_tau(y - f). Logistic: y in {-1,+1},
  // log(1 + exp(-y f)).
  double Value(double pred, double target) const;
  // d Value / d pred. The pinball subgradient at a zero residual is -tau.
  double Derivative(double pred, double target) const;
};

class Network {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  Network() = default;
  // Uniform fan-in initialization U(-1/sqrt(in), 1/sqrt(in)).
  Network(Eigen::Index input_dim, const std::vector<int>& hidden,
          Activation activation, Rng& rng);

  Eigen::Index input_dim() const {
    return layers_.empty() ? 0 : layers_.front().weight.cols();
  }
  bool is_linear() const { return layers_.size() == 1; }
  Activation activation() const { return activation_; }

  // inputs: features x samples.
  Eigen::VectorXd Forward(const Eigen::MatrixXd& inputs) const;

  // Mean over samples of weight_i * loss(f(x_i), y_i), plus ridge times the
  // squared Frobenius norm of the weight matrices (biases unpenalized).
  // Fills grads (same shapes as layers) when non-null.
  double LossAndGradient(const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets,
                         const Eigen::VectorXd& weights, const Loss& loss,
                         double ridge, std::vector<Layer>* grads) const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  double& output_bias() { return layers_.back().bias[0]; }

  Eigen::Index num_parameters() const;
  Eigen::VectorXd Flatten() const;
  void Unflatten(const Eigen::VectorXd& params);
  static Eigen::VectorXd Flatten(const std::vector<Layer>& layers);

  nlohmann::json ToJson() const;

 private:
  std::vector<Layer> layers_;
  Activation activation_ = Activation::kRelu;
};

std::string ToString(Activation a);
Activation ParseActivation(const std::string& name);

}  // namespace rise

#endif  // RISE_NETWORK_HPP_
