// SPDX-License-Identifier: Apache-2.0
//
// AltLoRA, AltLoRA+ and the baseline LoRA optimizers.
//
// Every optimizer consumes the full gradient G of the loss with respect to
// the merged weight at the *current* point. Alternating optimizers update a
// single factor per step, so the caller must recompute G between steps; the
// train_step helper below does exactly that.
#pragma once

#include <string_view>

#include "altlora/adapter.hpp"
#include "altlora/matcore.hpp"

namespace altlora {

enum class UpdateOrder { AFirst, BFirst, Joint };
enum class Schedule { Constant, Cosine };
enum class OptimizerKind { AltLora, AltLoraPlus, LoraSgd, LoraAdam, LoraPlus, ScaledGdJoint };
enum class Factor { A, B, Both };

struct TrainConfig {
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double gamma = 0.0;  // decoupled weight decay
  double lambda = kDefaultDamping;
  UpdateOrder order = UpdateOrder::BFirst;
  int steps = 1000;
  double eps = 1e-8;
  bool bias_correction = true;  // AltLoRA+ and LoraAdam
  double lr_ratio = 16.0;       // LoraPlus: eta_B = lr_ratio * eta_A
  Schedule schedule = Schedule::Constant;
  double warmup_ratio = 0.0;
};

/// Throws std::invalid_argument on out-of-range hyperparameters.
void validate(const TrainConfig& cfg);

/// Learning rate for optimizer step `step` (0-based) under cfg.schedule.
double learning_rate_at(const TrainConfig& cfg, int step);

std::string_view to_string(OptimizerKind kind);
std::string_view to_string(UpdateOrder order);
OptimizerKind parse_optimizer(std::string_view name);
UpdateOrder parse_order(std::string_view name);

/// Per-layer optimizer state. Only the buffers the optimizer needs are
/// allocated; unused ones stay empty.
///
/// For AltLoRA, `ma` lives in the coordinates of `prev_b` (the B it was last
/// formed against) and `mb` in those of `prev_a`.
struct AltLoraState {
  Matrix ma;      // r×d
  Matrix mb;      // k×r
  Matrix prev_a;  // r×d
  Matrix prev_b;  // k×r
  Matrix va;      // r×d, second moments
  Matrix vb;      // k×r
  long step = 0;
  long a_updates = 0;
  long b_updates = 0;

  /// Zero moments, snapshots set to the current factors.
  static AltLoraState create(OptimizerKind kind, const LoraLayer& layer);

  Index entry_count() const;
};

/// Entries the state of `kind` holds for a k×d layer of rank r.
Index optimizer_state_entries(OptimizerKind kind, Index k, Index d, Index r);

/// Upper bound on optimizer state entries for any optimizer: 6(kr + rd).
Index state_budget(const LoraLayer& layer);

/// Which factor the next step of `kind` updates.
Factor next_phase(OptimizerKind kind, const TrainConfig& cfg, long step);

/// (1/s²)(BᵀB + λI)⁻¹ ∇_A L: the least-squares fit of G by s·B·Z.
template <typename DerivedG, typename DerivedB>
Matrix scaled_grad_a(const Eigen::MatrixBase<DerivedG>& grad_a,
                     const Eigen::MatrixBase<DerivedB>& b, double s, double lambda) {
  if (grad_a.rows() != b.cols()) {
    throw ShapeMismatch("scaled_grad_a: grad_a rows must equal rank of B");
  }
#ifdef ALTLORA_MUTATE_IDENTITY_GRAM
  (void)lambda;
  return grad_a / (s * s);
#else
  return damped_gram_inverse(b, Side::Left, lambda) * grad_a / (s * s);
#endif
}

/// (1/s²) ∇_B L (AAᵀ + λI)⁻¹ where A is the already-updated factor.
template <typename DerivedG, typename DerivedA>
Matrix scaled_grad_b(const Eigen::MatrixBase<DerivedG>& grad_b,
                     const Eigen::MatrixBase<DerivedA>& a, double s, double lambda) {
  if (grad_b.cols() != a.rows()) {
    throw ShapeMismatch("scaled_grad_b: grad_b cols must equal rank of A");
  }
  return grad_b * damped_gram_inverse(a, Side::Right, lambda) / (s * s);
}

/// Re-expresses M^B, formed against `a_old`, in the coordinates of `a_new`:
/// M^B·A_old·A_newᵀ(A_new A_newᵀ + λI)⁻¹.
template <typename DerivedM, typename DerivedOld, typename DerivedNew>
Matrix align_momentum_b(const Eigen::MatrixBase<DerivedM>& mb,
                        const Eigen::MatrixBase<DerivedOld>& a_old,
                        const Eigen::MatrixBase<DerivedNew>& a_new, double lambda) {
  if (mb.cols() != a_old.rows() || a_old.rows() != a_new.rows() ||
      a_old.cols() != a_new.cols()) {
    throw ShapeMismatch("align_momentum_b: shape mismatch");
  }
  return (mb * a_old) * a_new.transpose() * damped_gram_inverse(a_new, Side::Right, lambda);
}

/// (B_newᵀB_new + λI)⁻¹B_newᵀ·B_old·M^A.
template <typename DerivedM, typename DerivedOld, typename DerivedNew>
Matrix align_momentum_a(const Eigen::MatrixBase<DerivedM>& ma,
                        const Eigen::MatrixBase<DerivedOld>& b_old,
                        const Eigen::MatrixBase<DerivedNew>& b_new, double lambda) {
  if (ma.rows() != b_old.cols() || b_old.cols() != b_new.cols() ||
      b_old.rows() != b_new.rows()) {
    throw ShapeMismatch("align_momentum_a: shape mismatch");
  }
  return damped_gram_inverse(b_new, Side::Left, lambda) * (b_new.transpose() * (b_old * ma));
}

/// One AltLoRA step: a single factor (or both, for UpdateOrder::Joint) moves
/// along its realigned first moment of the scaled gradient.
void altlora_step(LoraLayer& layer, AltLoraState& state, const Matrix& full_grad,
                  const TrainConfig& cfg);

/// AltLoRA with AdamW-style second moments on the scaled gradient. Second
/// moments are not realigned between steps.
void altlora_plus_step(LoraLayer& layer, AltLoraState& state, const Matrix& full_grad,
                       const TrainConfig& cfg);

/// LoraSgd, LoraAdam, LoraPlus or ScaledGdJoint; both factors move at once.
void baseline_step(OptimizerKind kind, LoraLayer& layer, AltLoraState& state,
                   const Matrix& full_grad, const TrainConfig& cfg);

/// Dispatches on `kind`.
void optimizer_step(OptimizerKind kind, LoraLayer& layer, AltLoraState& state,
                    const Matrix& full_grad, const TrainConfig& cfg);

struct StepReport {
  double loss = 0.0;       // before the step
  double grad_norm = 0.0;  // ‖G‖_F before the step
};

/// Evaluates G at the current point, then takes one optimizer step with the
/// scheduled learning rate for `state.step`.
StepReport train_step(OptimizerKind kind, ToyModel& model, AltLoraState& state,
                      const Dataset& data, const TrainConfig& cfg);

struct LoraProGrads {
  Matrix grad_a;  // r×d
  Matrix grad_b;  // k×r
};

/// LoRA-Pro adjusted gradients for a fixed ancillary matrix X (r×r):
///   gA = (1/s)(BᵀB)⁻¹BᵀG + XA
///   gB = (1/s)[I − B(BᵀB)⁻¹Bᵀ]GAᵀ(AAᵀ)⁻¹ − BX
/// with both Gram inverses damped by λ.
LoraProGrads lorapro_equiv_grad(const Matrix& full_grad, const LoraLayer& layer,
                                const Matrix& ancillary, double lambda);

}  // namespace altlora
