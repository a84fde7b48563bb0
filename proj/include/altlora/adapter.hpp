// SPDX-License-Identifier: Apache-2.0
//
// LoRA-factorized layers and the two hand-differentiated toy models the
// optimizers are exercised on.
#pragma once

#include <vector>

#include "altlora/matcore.hpp"

namespace altlora {

enum class InitPolicy { Gaussian, Kaiming, Spectral, Zero };

/// Frozen base weight W0 (k×d) plus trainable factors A (r×d) and B (k×r);
/// the merged weight is W0 + s·B·A with s = alpha / r.
class LoraLayer {
 public:
  LoraLayer(Matrix base, Matrix a, Matrix b, double alpha);

  const Matrix& base() const { return base_; }
  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  Matrix& a() { return a_; }
  Matrix& b() { return b_; }

  Index rows() const { return base_.rows(); }
  Index cols() const { return base_.cols(); }
  Index rank() const { return a_.rows(); }
  double alpha() const { return alpha_; }
  double scale() const { return scale_; }

  void set_alpha(double alpha);

 private:
  Matrix base_;
  Matrix a_;
  Matrix b_;
  double alpha_;
  double scale_;
};

/// Samples one factor of shape rows×cols.
///
/// Gaussian draws N(0, 1/r²) entries; Kaiming is uniform on ±1/√fan_in with
/// fan_in = cols; Zero is all zeros. Spectral uses the top-r singular
/// vectors of `base`: Vᵣᵀ for A and Uᵣ for B.
Matrix init_factor(InitPolicy policy, bool is_a, Index rank, const Matrix& base, Rng& rng);

LoraLayer make_layer(Matrix base, Index rank, double alpha, InitPolicy a_init, InitPolicy b_init,
                     Rng& rng);

/// W0 + s·B·A.
Matrix merged_weight(const LoraLayer& layer);

struct LoraGrads {
  Matrix grad_a;  // s·Bᵀ·G
  Matrix grad_b;  // s·G·Aᵀ
};

/// Chain rule from the merged-weight gradient G to the two factors.
LoraGrads lora_grads(const Matrix& full_grad, const LoraLayer& layer);

enum class ModelKind { LinearRegression, TwoLayerRelu };

/// One adapted layer; TwoLayerRelu adds a frozen dense head W2 after a ReLU.
struct ToyModel {
  ModelKind kind = ModelKind::LinearRegression;
  LoraLayer layer;
  Matrix head;  // empty for LinearRegression

  Index input_dim() const { return layer.cols(); }
  Index output_dim() const {
    return kind == ModelKind::LinearRegression ? layer.rows() : head.rows();
  }
};

ToyModel make_linear_model(LoraLayer layer);
ToyModel make_relu_model(LoraLayer layer, Matrix head);

/// Samples are stored one per column.
struct Dataset {
  Matrix inputs;
  Matrix targets;
};

struct ForwardCache {
  Matrix input;
  Matrix pre_activation;  // merged weight times input
  Matrix hidden;          // relu(pre_activation), TwoLayerRelu only
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

ForwardResult forward(const ToyModel& model, const Matrix& inputs);

/// (1/m)‖Y − T‖²_F over a batch of m columns.
double mse(const Matrix& output, const Matrix& targets);

struct FullGradient {
  Matrix g;
  int layer_id = 0;
};

/// ∂mse/∂W for the adapted layer's merged weight, from a matching forward pass.
std::vector<FullGradient> full_gradient(const ToyModel& model, const Matrix& targets,
                                        const ForwardResult& fwd);

struct LossAndGradient {
  double loss = 0.0;
  Matrix grad;
};

/// Forward pass plus backward pass for the single adapted layer.
LossAndGradient evaluate(const ToyModel& model, const Dataset& data);

}  // namespace altlora
