// SPDX-License-Identifier: Apache-2.0
//
// Brute-force verifiers for the closed forms used by the optimizers. Nothing
// here reuses the Gram-inverse path under test: least-squares problems are
// solved from explicitly accumulated normal equations with Gaussian
// elimination. Verification code may hold k×d buffers.
#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "altlora/adapter.hpp"
#include "altlora/optim.hpp"

namespace altlora {

enum class Objective { LeftFactor, RightFactor, MomentumB, MomentumA };

std::string_view to_string(Objective objective);

/// argmin_Z ‖design·Z − target‖_F, one normal system per target column.
/// Throws SingularSystem when the normal matrix is rank deficient.
Matrix lstsq_columns(const Matrix& design, const Matrix& target);

/// argmin_Z ‖s·B·Z − G‖_F.
Matrix lstsq_left_factor(const Matrix& b, const Matrix& g, double s);
/// argmin_Z ‖s·Z·A − G‖_F.
Matrix lstsq_right_factor(const Matrix& a, const Matrix& g, double s);
/// argmin_Z ‖M^B·A_old − Z·A_new‖_F.
Matrix lstsq_momentum_b(const Matrix& mb, const Matrix& a_old, const Matrix& a_new);
/// argmin_Z ‖B_old·M^A − B_new·Z‖_F.
Matrix lstsq_momentum_a(const Matrix& ma, const Matrix& b_old, const Matrix& b_new);

/// merged_weight(after) − merged_weight(before).
Matrix equivalent_update(const LoraLayer& before, const LoraLayer& after);

struct DecompositionReport {
  Matrix projected_col_term;  // −η·Proj_c(B)·G_t
  Matrix projected_row_term;  // −η·G_half·Proj_r(A⁺)
  Matrix cross_term;          // joint update minus its two first-order projector terms
  double residual_norm = 0.0; // ‖ΔW_alt − col − row‖_F
  Matrix alternating_update;
  Matrix joint_update;
  Matrix predicted_cross_term;
};

/// (η²/s)·G·Aᵀ(AAᵀ + λI)⁻¹(BᵀB + λI)⁻¹Bᵀ·G, the second-order interaction a
/// joint scaled step adds on top of the two projector terms.
Matrix cross_term_formula(const LoraLayer& layer, const Matrix& g, double eta, double lambda);

/// Runs an A-then-B alternating pair (A with G_t, B with G_half) and one joint
/// scaled step (with G_t) on copies of `layer` and splits both updates.
/// Requires beta1 = 0 and gamma = 0.
DecompositionReport decompose_pair_step(const LoraLayer& layer, const Matrix& g_t,
                                        const Matrix& g_half, const TrainConfig& cfg);

struct GaugeCheck {
  bool passed = false;
  double deviation = 0.0;
};

/// Compares the undamped column-space projectors of B1, B2 and row-space
/// projectors of A1, A2. Throws PreconditionViolated unless B1A1 = B2A2.
GaugeCheck projector_gauge_check(const Matrix& a1, const Matrix& b1, const Matrix& a2,
                                 const Matrix& b2, double tol = 1e-9);

/// B → B·R, A → R⁻¹·A for factors, moments and snapshots alike.
LoraLayer apply_gauge(const LoraLayer& layer, const Matrix& gauge);
AltLoraState apply_gauge(const AltLoraState& state, const Matrix& gauge);

struct InvarianceReport {
  std::vector<double> deviations;  // one per step, including step 0
  double max_deviation = 0.0;
  bool passed = false;
};

/// Trains `model` and its gauge-transformed twin side by side and records
/// ‖W⁽¹⁾ − W⁽²⁾‖_F / ‖W⁽¹⁾‖_F after every step.
InvarianceReport trajectory_invariance_check(const ToyModel& model, const Dataset& data,
                                             const TrainConfig& cfg, const Matrix& gauge,
                                             int steps, double tol = 1e-6,
                                             OptimizerKind kind = OptimizerKind::AltLora,
                                             const std::optional<AltLoraState>& initial = {});

}  // namespace altlora
