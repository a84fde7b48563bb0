// SPDX-License-Identifier: Apache-2.0
#include "altlora/adapter.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <utility>

namespace altlora {

LoraLayer::LoraLayer(Matrix base, Matrix a, Matrix b, double alpha)
    : base_(std::move(base)), a_(std::move(a)), b_(std::move(b)), alpha_(alpha), scale_(0.0) {
  const Index r = a_.rows();
  if (r < 1) {
    throw ShapeMismatch("LoraLayer: rank must be positive");
  }
  if (r > std::min(base_.rows(), base_.cols())) {
    throw ShapeMismatch("LoraLayer: rank exceeds min(k, d)");
  }
  require_shape(a_, r, base_.cols(), "LoraLayer A");
  require_shape(b_, base_.rows(), r, "LoraLayer B");
  set_alpha(alpha);
}

void LoraLayer::set_alpha(double alpha) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("LoraLayer: alpha must be positive");
  }
  alpha_ = alpha;
  scale_ = alpha / static_cast<double>(rank());
}

Matrix init_factor(InitPolicy policy, bool is_a, Index rank, const Matrix& base, Rng& rng) {
  const Index rows = is_a ? rank : base.rows();
  const Index cols = is_a ? base.cols() : rank;
  switch (policy) {
    case InitPolicy::Zero:
      return Matrix::Zero(rows, cols);
    case InitPolicy::Gaussian:
      return rng.gaussian(rows, cols, 1.0 / static_cast<double>(rank));
    case InitPolicy::Kaiming: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      return rng.uniform(rows, cols, -bound, bound);
    }
    case InitPolicy::Spectral: {
      const Eigen::JacobiSVD<Matrix> svd(base, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (is_a) {
        return svd.matrixV().leftCols(rank).transpose();
      }
      return svd.matrixU().leftCols(rank);
    }
  }
  throw std::invalid_argument("init_factor: unknown policy");
}

LoraLayer make_layer(Matrix base, Index rank, double alpha, InitPolicy a_init, InitPolicy b_init,
                     Rng& rng) {
  Matrix a = init_factor(a_init, true, rank, base, rng);
  Matrix b = init_factor(b_init, false, rank, base, rng);
  return LoraLayer(std::move(base), std::move(a), std::move(b), alpha);
}

Matrix merged_weight(const LoraLayer& layer) {
  return layer.base() + layer.scale() * (layer.b() * layer.a());
}

LoraGrads lora_grads(const Matrix& full_grad, const LoraLayer& layer) {
  require_shape(full_grad, layer.rows(), layer.cols(), "lora_grads G");
  return {layer.scale() * (layer.b().transpose() * full_grad),
          layer.scale() * (full_grad * layer.a().transpose())};
}

ToyModel make_linear_model(LoraLayer layer) {
  return ToyModel{ModelKind::LinearRegression, std::move(layer), Matrix()};
}

ToyModel make_relu_model(LoraLayer layer, Matrix head) {
  if (head.cols() != layer.rows()) {
    throw ShapeMismatch("make_relu_model: head input dim must equal layer output dim");
  }
  return ToyModel{ModelKind::TwoLayerRelu, std::move(layer), std::move(head)};
}

ForwardResult forward(const ToyModel& model, const Matrix& inputs) {
  if (inputs.rows() != model.input_dim() || inputs.cols() < 1) {
    throw ShapeMismatch("forward: inputs must be d x m with m >= 1");
  }
  ForwardResult result;
  result.cache.input = inputs;
  result.cache.pre_activation = merged_weight(model.layer) * inputs;
  if (model.kind == ModelKind::LinearRegression) {
    result.output = result.cache.pre_activation;
  } else {
    result.cache.hidden = result.cache.pre_activation.cwiseMax(0.0);
    result.output = model.head * result.cache.hidden;
  }
  return result;
}

double mse(const Matrix& output, const Matrix& targets) {
  require_shape(targets, output.rows(), output.cols(), "mse targets");
  return (output - targets).squaredNorm() / static_cast<double>(output.cols());
}

std::vector<FullGradient> full_gradient(const ToyModel& model, const Matrix& targets,
                                        const ForwardResult& fwd) {
  require_shape(targets, fwd.output.rows(), fwd.output.cols(), "full_gradient targets");
  const double m = static_cast<double>(targets.cols());
  const Matrix d_output = (2.0 / m) * (fwd.output - targets);
  Matrix d_pre;
  if (model.kind == ModelKind::LinearRegression) {
    d_pre = d_output;
  } else {
    // ReLU derivative at exactly zero is taken as zero.
    const Matrix d_hidden = model.head.transpose() * d_output;
    d_pre = d_hidden.cwiseProduct(
        (fwd.cache.pre_activation.array() > 0.0).cast<double>().matrix());
  }
  return {FullGradient{d_pre * fwd.cache.input.transpose(), 0}};
}

LossAndGradient evaluate(const ToyModel& model, const Dataset& data) {
  const ForwardResult fwd = forward(model, data.inputs);
  LossAndGradient out;
  out.loss = mse(fwd.output, data.targets);
  out.grad = std::move(full_gradient(model, data.targets, fwd).front().g);
  return out;
}

}  // namespace altlora
