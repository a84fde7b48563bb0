// SPDX-License-Identifier: Apache-2.0
#include "altlora/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace altlora {

void validate(const TrainConfig& cfg) {
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) {
    throw std::invalid_argument("eta must be a finite non-negative number");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) {
    throw std::invalid_argument("beta1 must lie in [0, 1)");
  }
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw std::invalid_argument("beta2 must lie in [0, 1)");
  }
  if (!(cfg.gamma >= 0.0)) {
    throw std::invalid_argument("gamma must be non-negative");
  }
  if (!(cfg.lambda >= 0.0)) {
    throw std::invalid_argument("lambda must be non-negative");
  }
  if (cfg.steps < 0) {
    throw std::invalid_argument("steps must be non-negative");
  }
  if (!(cfg.eps > 0.0)) {
    throw std::invalid_argument("eps must be positive");
  }
  if (!(cfg.lr_ratio > 0.0)) {
    throw std::invalid_argument("lr_ratio must be positive");
  }
  if (!(cfg.warmup_ratio >= 0.0 && cfg.warmup_ratio < 1.0)) {
    throw std::invalid_argument("warmup_ratio must lie in [0, 1)");
  }
}

double learning_rate_at(const TrainConfig& cfg, int step) {
  if (cfg.schedule == Schedule::Constant) {
    return cfg.eta;
  }
  const int total = std::max(cfg.steps, 1);
  const int warmup = static_cast<int>(std::ceil(cfg.warmup_ratio * total));
  if (step < warmup) {
    return cfg.eta * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(std::max(total - warmup, 1)));
  return cfg.eta * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::AltLora: return "altlora";
    case OptimizerKind::AltLoraPlus: return "altlora_plus";
    case OptimizerKind::LoraSgd: return "lora_sgd";
    case OptimizerKind::LoraAdam: return "lora_adam";
    case OptimizerKind::LoraPlus: return "lora_plus";
    case OptimizerKind::ScaledGdJoint: return "scaled_gd_joint";
  }
  return "unknown";
}

std::string_view to_string(UpdateOrder order) {
  switch (order) {
    case UpdateOrder::AFirst: return "a_first";
    case UpdateOrder::BFirst: return "b_first";
    case UpdateOrder::Joint: return "joint";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(std::string_view name) {
  for (auto kind : {OptimizerKind::AltLora, OptimizerKind::AltLoraPlus, OptimizerKind::LoraSgd,
                    OptimizerKind::LoraAdam, OptimizerKind::LoraPlus, OptimizerKind::ScaledGdJoint}) {
    if (to_string(kind) == name) {
      return kind;
    }
  }
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

UpdateOrder parse_order(std::string_view name) {
  for (auto order : {UpdateOrder::AFirst, UpdateOrder::BFirst, UpdateOrder::Joint}) {
    if (to_string(order) == name) {
      return order;
    }
  }
  throw std::invalid_argument("unknown update order '" + std::string(name) + "'");
}

AltLoraState AltLoraState::create(OptimizerKind kind, const LoraLayer& layer) {
  AltLoraState state;
  const Index k = layer.rows();
  const Index d = layer.cols();
  const Index r = layer.rank();
  const bool first_moments = kind != OptimizerKind::LoraSgd && kind != OptimizerKind::LoraPlus;
  const bool second_moments = kind == OptimizerKind::AltLoraPlus || kind == OptimizerKind::LoraAdam;
  const bool snapshots = kind == OptimizerKind::AltLora || kind == OptimizerKind::AltLoraPlus;
  if (first_moments) {
    state.ma = Matrix::Zero(r, d);
    state.mb = Matrix::Zero(k, r);
  }
  if (second_moments) {
    state.va = Matrix::Zero(r, d);
    state.vb = Matrix::Zero(k, r);
  }
  if (snapshots) {
    state.prev_a = layer.a();
    state.prev_b = layer.b();
  }
  return state;
}

Index AltLoraState::entry_count() const {
  return ma.size() + mb.size() + prev_a.size() + prev_b.size() + va.size() + vb.size();
}

Index optimizer_state_entries(OptimizerKind kind, Index k, Index d, Index r) {
  const Index per_pair = k * r + r * d;
  switch (kind) {
    case OptimizerKind::LoraSgd:
    case OptimizerKind::LoraPlus: return 0;
    case OptimizerKind::ScaledGdJoint: return per_pair;
    case OptimizerKind::AltLora:
    case OptimizerKind::LoraAdam: return 2 * per_pair;
    case OptimizerKind::AltLoraPlus: return 3 * per_pair;
  }
  return 0;
}

Index state_budget(const LoraLayer& layer) {
  const Index r = layer.rank();
  return 6 * (layer.rows() * r + r * layer.cols());
}

Factor next_phase(OptimizerKind kind, const TrainConfig& cfg, long step) {
  if (kind != OptimizerKind::AltLora && kind != OptimizerKind::AltLoraPlus) {
    return Factor::Both;
  }
  if (cfg.order == UpdateOrder::Joint) {
    return Factor::Both;
  }
  const bool even = step % 2 == 0;
  if (cfg.order == UpdateOrder::AFirst) {
    return even ? Factor::A : Factor::B;
  }
  return even ? Factor::B : Factor::A;
}

namespace {

void check_budget(const LoraLayer& layer, const AltLoraState& state) {
  if (state.entry_count() > state_budget(layer)) {
    throw std::logic_error("optimizer state exceeds the 6(kr+rd) entry budget");
  }
}

double bias_factor(double beta, long updates, bool enabled) {
  return enabled ? 1.0 - std::pow(beta, static_cast<double>(updates)) : 1.0;
}

/// Updates the second moment with `grad` and returns M̂ ⊘ (√V̂ + eps).
Matrix adaptive_direction(const Matrix& moment, Matrix& second, const Matrix& grad, long updates,
                          const TrainConfig& cfg) {
  second = cfg.beta2 * second + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = bias_factor(cfg.beta1, updates, cfg.bias_correction);
  const double c2 = bias_factor(cfg.beta2, updates, cfg.bias_correction);
  return ((moment.array() / c1) / ((second.array() / c2).sqrt() + cfg.eps)).matrix();
}

void alternating_a(LoraLayer& layer, AltLoraState& state, const Matrix& g, const TrainConfig& cfg,
                   bool adaptive) {
  const double s = layer.scale();
  const Matrix& b = layer.b();
  const Matrix scaled = scaled_grad_a(s * (b.transpose() * g), b, s, cfg.lambda);
  const Matrix aligned = align_momentum_a(state.ma, state.prev_b, b, cfg.lambda);
  state.ma = cfg.beta1 * aligned + (1.0 - cfg.beta1) * scaled;
  state.prev_b = b;
  ++state.a_updates;
  const Matrix direction =
      adaptive ? adaptive_direction(state.ma, state.va, scaled, state.a_updates, cfg) : state.ma;
  layer.a() -= cfg.eta * (direction + cfg.gamma * layer.a());
}

void alternating_b(LoraLayer& layer, AltLoraState& state, const Matrix& g, const TrainConfig& cfg,
                   bool adaptive) {
  const double s = layer.scale();
  const Matrix& a = layer.a();
  const Matrix scaled = scaled_grad_b(s * (g * a.transpose()), a, s, cfg.lambda);
  const Matrix aligned = align_momentum_b(state.mb, state.prev_a, a, cfg.lambda);
  state.mb = cfg.beta1 * aligned + (1.0 - cfg.beta1) * scaled;
  state.prev_a = a;
  ++state.b_updates;
  const Matrix direction =
      adaptive ? adaptive_direction(state.mb, state.vb, scaled, state.b_updates, cfg) : state.mb;
  layer.b() -= cfg.eta * (direction + cfg.gamma * layer.b());
}

/// Both factors from the same point; moments realigned before either moves.
void alternating_joint(LoraLayer& layer, AltLoraState& state, const Matrix& g,
                       const TrainConfig& cfg, bool adaptive) {
  const double s = layer.scale();
  const Matrix a = layer.a();
  const Matrix b = layer.b();
  const LoraGrads raw = lora_grads(g, layer);
  const Matrix scaled_a = scaled_grad_a(raw.grad_a, b, s, cfg.lambda);
  const Matrix scaled_b = scaled_grad_b(raw.grad_b, a, s, cfg.lambda);
  state.ma = cfg.beta1 * align_momentum_a(state.ma, state.prev_b, b, cfg.lambda) +
             (1.0 - cfg.beta1) * scaled_a;
  state.mb = cfg.beta1 * align_momentum_b(state.mb, state.prev_a, a, cfg.lambda) +
             (1.0 - cfg.beta1) * scaled_b;
  state.prev_a = a;
  state.prev_b = b;
  ++state.a_updates;
  ++state.b_updates;
  const Matrix dir_a =
      adaptive ? adaptive_direction(state.ma, state.va, scaled_a, state.a_updates, cfg) : state.ma;
  const Matrix dir_b =
      adaptive ? adaptive_direction(state.mb, state.vb, scaled_b, state.b_updates, cfg) : state.mb;
  layer.a() -= cfg.eta * (dir_a + cfg.gamma * a);
  layer.b() -= cfg.eta * (dir_b + cfg.gamma * b);
}

void alternating_step(LoraLayer& layer, AltLoraState& state, const Matrix& g,
                      const TrainConfig& cfg, bool adaptive) {
  require_shape(g, layer.rows(), layer.cols(), "optimizer full gradient");
  const OptimizerKind kind = adaptive ? OptimizerKind::AltLoraPlus : OptimizerKind::AltLora;
  if (state.ma.size() == 0 || (adaptive && state.va.size() == 0)) {
    throw std::logic_error("state was not created for this optimizer");
  }
  switch (next_phase(kind, cfg, state.step)) {
    case Factor::A: alternating_a(layer, state, g, cfg, adaptive); break;
    case Factor::B: alternating_b(layer, state, g, cfg, adaptive); break;
    case Factor::Both: alternating_joint(layer, state, g, cfg, adaptive); break;
  }
  ++state.step;
  check_budget(layer, state);
}

}  // namespace

void altlora_step(LoraLayer& layer, AltLoraState& state, const Matrix& full_grad,
                  const TrainConfig& cfg) {
  alternating_step(layer, state, full_grad, cfg, false);
}

void altlora_plus_step(LoraLayer& layer, AltLoraState& state, const Matrix& full_grad,
                       const TrainConfig& cfg) {
  alternating_step(layer, state, full_grad, cfg, true);
}

void baseline_step(OptimizerKind kind, LoraLayer& layer, AltLoraState& state,
                   const Matrix& full_grad, const TrainConfig& cfg) {
  require_shape(full_grad, layer.rows(), layer.cols(), "optimizer full gradient");
  const Matrix a = layer.a();
  const Matrix b = layer.b();
  const LoraGrads raw = lora_grads(full_grad, layer);
  switch (kind) {
    case OptimizerKind::LoraSgd:
    case OptimizerKind::LoraPlus: {
      const double eta_b = kind == OptimizerKind::LoraPlus ? cfg.lr_ratio * cfg.eta : cfg.eta;
      layer.a() -= cfg.eta * (raw.grad_a + cfg.gamma * a);
      layer.b() -= eta_b * (raw.grad_b + cfg.gamma * b);
      break;
    }
    case OptimizerKind::LoraAdam: {
      if (state.va.size() == 0) {
        throw std::logic_error("state was not created for lora_adam");
      }
      ++state.a_updates;
      ++state.b_updates;
      state.ma = cfg.beta1 * state.ma + (1.0 - cfg.beta1) * raw.grad_a;
      state.mb = cfg.beta1 * state.mb + (1.0 - cfg.beta1) * raw.grad_b;
      const Matrix dir_a = adaptive_direction(state.ma, state.va, raw.grad_a, state.a_updates, cfg);
      const Matrix dir_b = adaptive_direction(state.mb, state.vb, raw.grad_b, state.b_updates, cfg);
      layer.a() -= cfg.eta * (dir_a + cfg.gamma * a);
      layer.b() -= cfg.eta * (dir_b + cfg.gamma * b);
      break;
    }
    case OptimizerKind::ScaledGdJoint: {
      if (state.ma.size() == 0) {
        throw std::logic_error("state was not created for scaled_gd_joint");
      }
      const double s = layer.scale();
      ++state.a_updates;
      ++state.b_updates;
      state.ma = cfg.beta1 * state.ma + (1.0 - cfg.beta1) * scaled_grad_a(raw.grad_a, b, s, cfg.lambda);
      state.mb = cfg.beta1 * state.mb + (1.0 - cfg.beta1) * scaled_grad_b(raw.grad_b, a, s, cfg.lambda);
      layer.a() -= cfg.eta * (state.ma + cfg.gamma * a);
      layer.b() -= cfg.eta * (state.mb + cfg.gamma * b);
      break;
    }
    default:
      throw std::invalid_argument("baseline_step: not a baseline optimizer");
  }
  ++state.step;
  check_budget(layer, state);
}

void optimizer_step(OptimizerKind kind, LoraLayer& layer, AltLoraState& state,
                    const Matrix& full_grad, const TrainConfig& cfg) {
  switch (kind) {
    case OptimizerKind::AltLora: altlora_step(layer, state, full_grad, cfg); return;
    case OptimizerKind::AltLoraPlus: altlora_plus_step(layer, state, full_grad, cfg); return;
    default: baseline_step(kind, layer, state, full_grad, cfg); return;
  }
}

StepReport train_step(OptimizerKind kind, ToyModel& model, AltLoraState& state,
                      const Dataset& data, const TrainConfig& cfg) {
  const LossAndGradient lg = evaluate(model, data);
  TrainConfig scheduled = cfg;
  scheduled.eta = learning_rate_at(cfg, static_cast<int>(state.step));
  optimizer_step(kind, model.layer, state, lg.grad, scheduled);
  return {lg.loss, lg.grad.norm()};
}

LoraProGrads lorapro_equiv_grad(const Matrix& full_grad, const LoraLayer& layer,
                                const Matrix& ancillary, double lambda) {
  const Index r = layer.rank();
  require_shape(full_grad, layer.rows(), layer.cols(), "lorapro_equiv_grad G");
  require_shape(ancillary, r, r, "lorapro_equiv_grad X");
  const double s = layer.scale();
  const Matrix& a = layer.a();
  const Matrix& b = layer.b();
  const Matrix btb_inv = damped_gram_inverse(b, Side::Left, lambda);
  const Matrix aat_inv = damped_gram_inverse(a, Side::Right, lambda);
  const Matrix bt_g = b.transpose() * full_grad;
  LoraProGrads out;
  out.grad_a = (btb_inv * bt_g) / s + ancillary * a;
  const Matrix g_at_inv = full_grad * a.transpose() * aat_inv;
  out.grad_b = (g_at_inv - b * (btb_inv * (bt_g * a.transpose() * aat_inv))) / s - b * ancillary;
  return out;
}

}  // namespace altlora
