// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale experiments: synthetic tasks with a controllable condition
// number, the full-batch experiment runner, the width-scaling probe and
// state/FLOP accounting.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "altlora/adapter.hpp"
#include "altlora/optim.hpp"

namespace altlora {

enum class TaskKind { LowRankFactorization, TwoLayerRelu };

/// Where the condition number κ enters a task: the spectrum of the teacher
/// residual Δ* or the covariance spectrum of the inputs.
enum class ConditionSource { Teacher, Input };

struct ExperimentSpec {
  TaskKind task = TaskKind::LowRankFactorization;
  Index k = 32;             // output dim
  Index d = 32;             // input dim
  Index r = 8;              // adapter rank
  Index width = 128;        // hidden width n, TwoLayerRelu only
  Index teacher_rank = 8;   // r*
  double kappa = 1.0;
  std::optional<ConditionSource> condition_source;  // default depends on task
  Index samples = 0;        // 0 means 4·d
  double sigma_max = 4.0;   // largest singular value of Δ*
  double alpha = 16.0;
  OptimizerKind optimizer = OptimizerKind::AltLora;
  TrainConfig train;
  InitPolicy init_a = InitPolicy::Kaiming;
  InitPolicy init_b = InitPolicy::Zero;
  std::uint64_t seed = 1;
  int eval_every = 10;
  double loss_threshold = 1e-3;
  bool stop_at_threshold = false;

  ConditionSource effective_condition_source() const;
  Index effective_samples() const { return samples > 0 ? samples : 4 * d; }
};

/// Throws InvalidSpec.
void validate(const ExperimentSpec& spec);

struct Task {
  ToyModel model;
  Dataset data;
  Matrix teacher_weight;  // merged weight of the teacher's adapted layer
  Matrix teacher_delta;   // Δ*, the part the adapter must learn
};

/// Linear regression toward W* = W0 + Δ*, Δ* = U·diag(σ)·Vᵀ of rank r* with
/// σ log-spaced over [σmax/κ, σmax]; m = 4d Gaussian inputs.
Task gen_lowrank_task(const ExperimentSpec& spec);
/// Teacher-student two-layer ReLU network with adapted first layer (n×d) and
/// a frozen head (k×n); by default κ shapes the input covariance.
Task gen_relu_task(const ExperimentSpec& spec);
Task make_task(const ExperimentSpec& spec);

/// Inputs with sample covariance X·Xᵀ/m equal to Q·diag(c)·Qᵀ exactly, where
/// c is log-spaced over [1/κ, 1] and Q is a random rotation.
Matrix conditioned_inputs(Index d, Index m, double kappa, Rng& rng);

inline constexpr std::string_view kRunCsvHeader = "step,loss,weight_err,grad_norm,state_entries,flops";

struct RunRow {
  long step = 0;
  double loss = 0.0;
  double weight_err = 0.0;
  double grad_norm = 0.0;
  Index state_entries = 0;
  std::uint64_t flops = 0;
};

struct RunRecord {
  std::vector<RunRow> rows;
  long steps_to_threshold = -1;  // first step with loss ≤ threshold, or −1
  bool diverged = false;         // loss > 1e6 or non-finite; rows end there
};

RunRecord run_experiment(const ExperimentSpec& spec);

void write_csv(std::ostream& out, const RunRecord& record);

nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// Reads the keys produced by spec_to_json; every key is optional. Unknown
/// keys raise InvalidSpec when `strict` is set.
ExperimentSpec spec_from_json(const nlohmann::json& doc, bool strict = true);
/// Spec echo, steps_to_threshold, divergence flag and build id.
nlohmann::json sidecar_json(const ExperimentSpec& spec, const RunRecord& record);

std::string_view to_string(TaskKind kind);
std::string_view to_string(InitPolicy policy);
std::string_view to_string(ConditionSource source);

/// FLOPs of one optimizer step, including the forward/backward pass that
/// produces its gradient. Analytic count: 2mnp per m×n·n×p product, r³ per
/// r×r factorization plus inverse, one per elementwise op.
std::uint64_t step_flops(OptimizerKind kind, Factor phase, const ToyModel& model, Index samples);

struct ProbeOptions {
  Index rank = 4;
  int seeds = 8;
  double alpha = 4.0;
  double grad_scale = 1.0;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  std::vector<Index> widths;
  std::vector<double> magnitudes;  // mean ‖ΔW·x‖_∞ per width
  double slope = 0.0;              // least-squares slope of log m(n) on log n; NaN if any m(n) = 0
};

/// For each width n, an n×n layer from (Kaiming, Zero) init takes two steps
/// of `kind` against the fixed linear-loss gradient G = (1/(n·q))·Σⱼ gⱼxⱼᵀ
/// with ±1 entries in gⱼ and xⱼ (q = rank samples). The feature update is
/// measured on x₀, one of the training inputs.
ProbeResult width_scaling_probe(const std::vector<Index>& widths, OptimizerKind kind,
                                const TrainConfig& cfg, const ProbeOptions& options = {});

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

struct StateAccounting {
  Index trainable = 0;            // kr + rd
  Index optimizer_state = 0;      // entries of the optimizer's state layout
  Index verification_peak = 0;    // k×d buffers held by the decomposition oracle
  Index full_moment_reference = 0;// 2kd: full-size first and second moments, never allocated
};

StateAccounting state_accounting(Index k, Index d, Index r, OptimizerKind kind);

}  // namespace altlora
