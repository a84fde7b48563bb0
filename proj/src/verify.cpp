// SPDX-License-Identifier: Apache-2.0
#include "altlora/verify.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "altlora/bench.hpp"
#include "altlora/oracle.hpp"

#ifndef ALTLORA_BUILD_ID
#define ALTLORA_BUILD_ID "unknown"
#endif

namespace altlora {

namespace {

using nlohmann::json;

Index random_index(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

struct Shape {
  Index k;
  Index d;
  Index r;
};

Shape random_shape(Rng& rng, Index max_dim, Index max_rank) {
  Shape shape{};
  shape.r = random_index(rng, 1, max_rank);
  shape.k = random_index(rng, shape.r, max_dim);
  shape.d = random_index(rng, shape.r, max_dim);
  return shape;
}

LoraLayer random_layer(Rng& rng, const Shape& shape, double alpha) {
  Matrix base = rng.gaussian(shape.k, shape.d, 1.0 / std::sqrt(static_cast<double>(shape.d)));
  Matrix a = rng.gaussian(shape.r, shape.d);
  Matrix b = rng.gaussian(shape.k, shape.r);
  return LoraLayer(std::move(base), std::move(a), std::move(b), alpha);
}

void track(CheckResult& result, double deviation) {
  ++result.instances;
  if (std::isnan(deviation) || deviation > result.max_deviation || std::isnan(result.max_deviation)) {
    result.max_deviation = deviation;
  }
}

CheckResult finish_max(CheckResult result, double tolerance) {
  result.tolerance = tolerance;
  result.passed = result.max_deviation <= tolerance;
  return result;
}

constexpr int kOptimalityInstances = 200;
constexpr double kOptimalityTol = 1e-9;

CheckResult check_scaled_grad_a() {
  Rng rng(101);
  CheckResult result;
  for (int i = 0; i < kOptimalityInstances; ++i) {
    const Shape shape = random_shape(rng, 64, 8);
    const double s = rng.uniform(0.25, 4.0);
    const Matrix b = rng.gaussian(shape.k, shape.r);
    const Matrix g = rng.gaussian(shape.k, shape.d);
    const Matrix closed = scaled_grad_a(s * b.transpose() * g, b, s, 0.0);
    track(result, relative_error(closed, lstsq_left_factor(b, g, s)));
  }
  return finish_max(result, kOptimalityTol);
}

CheckResult check_scaled_grad_b() {
  Rng rng(102);
  CheckResult result;
  for (int i = 0; i < kOptimalityInstances; ++i) {
    const Shape shape = random_shape(rng, 64, 8);
    const double s = rng.uniform(0.25, 4.0);
    const Matrix a = rng.gaussian(shape.r, shape.d);
    const Matrix g = rng.gaussian(shape.k, shape.d);
    const Matrix closed = scaled_grad_b(s * g * a.transpose(), a, s, 0.0);
    track(result, relative_error(closed, lstsq_right_factor(a, g, s)));
  }
  return finish_max(result, kOptimalityTol);
}

CheckResult check_align_momentum_b() {
  Rng rng(103);
  CheckResult result;
  for (int i = 0; i < kOptimalityInstances; ++i) {
    const Shape shape = random_shape(rng, 64, 8);
    const Matrix mb = rng.gaussian(shape.k, shape.r);
    const Matrix a_old = rng.gaussian(shape.r, shape.d);
    const Matrix a_new = a_old + 0.5 * rng.gaussian(shape.r, shape.d);
    const Matrix closed = align_momentum_b(mb, a_old, a_new, 0.0);
    track(result, relative_error(closed, lstsq_momentum_b(mb, a_old, a_new)));
  }
  return finish_max(result, kOptimalityTol);
}

CheckResult check_align_momentum_a() {
  Rng rng(104);
  CheckResult result;
  for (int i = 0; i < kOptimalityInstances; ++i) {
    const Shape shape = random_shape(rng, 64, 8);
    const Matrix ma = rng.gaussian(shape.r, shape.d);
    const Matrix b_old = rng.gaussian(shape.k, shape.r);
    const Matrix b_new = b_old + 0.5 * rng.gaussian(shape.k, shape.r);
    const Matrix closed = align_momentum_a(ma, b_old, b_new, 0.0);
    track(result, relative_error(closed, lstsq_momentum_a(ma, b_old, b_new)));
  }
  return finish_max(result, kOptimalityTol);
}

struct PairInstance {
  LoraLayer layer;
  Matrix g_t;
  Matrix g_half;
};

TrainConfig projected_config(double eta) {
  TrainConfig cfg;
  cfg.eta = eta;
  cfg.beta1 = 0.0;
  cfg.gamma = 0.0;
  cfg.lambda = 0.0;
  cfg.order = UpdateOrder::AFirst;
  return cfg;
}

/// Linear-regression instance with G_t at the current point and G_half at the
/// point after one A-phase of size eta.
PairInstance pair_instance(Rng& rng, double eta) {
  const Shape shape = random_shape(rng, 32, 6);
  ToyModel model = make_linear_model(random_layer(rng, shape, rng.uniform(0.5, 2.0) * shape.r));
  const Index m = 2 * shape.d;
  const Dataset data{rng.gaussian(shape.d, m), rng.gaussian(shape.k, m)};
  const Matrix g_t = evaluate(model, data).grad;
  ToyModel half = model;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLora, half.layer);
  altlora_step(half.layer, state, g_t, projected_config(eta));
  return PairInstance{model.layer, g_t, evaluate(half, data).grad};
}

constexpr int kDecompositionInstances = 100;
constexpr double kDecompositionTol = 1e-10;
constexpr double kDecompositionEta = 0.5;

CheckResult check_alternating_residual() {
  Rng rng(201);
  CheckResult result;
  for (int i = 0; i < kDecompositionInstances; ++i) {
    const PairInstance inst = pair_instance(rng, kDecompositionEta);
    const DecompositionReport rep =
        decompose_pair_step(inst.layer, inst.g_t, inst.g_half, projected_config(kDecompositionEta));
    track(result, rep.residual_norm / rep.alternating_update.norm());
  }
  return finish_max(result, kDecompositionTol);
}

CheckResult check_cross_term() {
  Rng rng(202);
  CheckResult result;
  double min_cross = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kDecompositionInstances; ++i) {
    const PairInstance inst = pair_instance(rng, kDecompositionEta);
    const DecompositionReport rep =
        decompose_pair_step(inst.layer, inst.g_t, inst.g_half, projected_config(kDecompositionEta));
    track(result, relative_error(rep.cross_term, rep.predicted_cross_term));
    min_cross = std::min(min_cross, rep.predicted_cross_term.norm());
  }
  result.data["min_cross_term_norm"] = min_cross;
  result = finish_max(result, kDecompositionTol);
  result.passed = result.passed && min_cross > 0.0;
  return result;
}

CheckResult check_eta_order() {
  Rng rng(203);
  CheckResult result;
  const std::vector<double> etas = {1e-2, 1e-3, 1e-4};
  double worst_cross = 0.0;
  double worst_proj = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Shape shape = random_shape(rng, 32, 6);
    ToyModel model = make_linear_model(random_layer(rng, shape, static_cast<double>(shape.r)));
    const Index m = 2 * shape.d;
    const Dataset data{rng.gaussian(shape.d, m), rng.gaussian(shape.k, m)};
    const Matrix g = evaluate(model, data).grad;
    std::vector<double> cross;
    std::vector<double> col;
    std::vector<double> row;
    for (double eta : etas) {
      const DecompositionReport rep = decompose_pair_step(model.layer, g, g, projected_config(eta));
      cross.push_back(rep.cross_term.norm());
      col.push_back(rep.projected_col_term.norm());
      row.push_back(rep.projected_row_term.norm());
    }
    const double sc = std::abs(log_log_slope(etas, cross) - 2.0);
    const double sp = std::max(std::abs(log_log_slope(etas, col) - 1.0),
                               std::abs(log_log_slope(etas, row) - 1.0));
    worst_cross = std::max(worst_cross, sc);
    worst_proj = std::max(worst_proj, sp);
    track(result, std::max(sc, sp));
  }
  result.data["max_cross_slope_error"] = worst_cross;
  result.data["max_projector_slope_error"] = worst_proj;
  return finish_max(result, 0.01);
}

CheckResult check_projector_gauge() {
  Rng rng(301);
  CheckResult result;
  for (int i = 0; i < 200; ++i) {
    const Shape shape = random_shape(rng, 32, 8);
    const LoraLayer first = random_layer(rng, shape, 1.0);
    const LoraLayer second =
        apply_gauge(first, gauge_sample(shape.r, 10.0, 9000 + static_cast<std::uint64_t>(i)));
    track(result, projector_gauge_check(first.a(), first.b(), second.a(), second.b()).deviation);
  }
  return finish_max(result, 1e-9);
}

constexpr int kGaugePairs = 20;
constexpr int kInvarianceSteps = 50;

struct InvarianceSetup {
  Task task;
  Matrix gauge;
};

InvarianceSetup invariance_setup(int i) {
  ExperimentSpec spec;
  spec.k = 24;
  spec.d = 16;
  spec.r = 4;
  spec.teacher_rank = 4;
  spec.init_a = InitPolicy::Gaussian;
  spec.init_b = InitPolicy::Gaussian;
  spec.seed = 400 + static_cast<std::uint64_t>(i);
  return InvarianceSetup{make_task(spec), gauge_sample(4, 10.0, 4000 + static_cast<std::uint64_t>(i))};
}

TrainConfig invariance_config(double beta1, double gamma) {
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.beta1 = beta1;
  cfg.gamma = gamma;
  cfg.lambda = 0.0;
  return cfg;
}

CheckResult invariance_check(double beta1, double gamma) {
  CheckResult result;
  for (int i = 0; i < kGaugePairs; ++i) {
    const InvarianceSetup setup = invariance_setup(i);
    const InvarianceReport rep =
        trajectory_invariance_check(setup.task.model, setup.task.data, invariance_config(beta1, gamma),
                                    setup.gauge, kInvarianceSteps);
    track(result, rep.max_deviation);
  }
  return finish_max(result, 1e-6);
}

CheckResult check_invariance_plain() { return invariance_check(0.0, 0.0); }
CheckResult check_invariance_momentum() { return invariance_check(0.9, 0.0); }

CheckResult check_invariance_weight_decay() {
  CheckResult result = invariance_check(0.9, 0.1);
  result.informational = true;
  result.detail = "gamma = 0.1; recorded only";
  return result;
}

CheckResult check_invariance_adam_negative() {
  CheckResult result;
  double min_dev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGaugePairs; ++i) {
    const InvarianceSetup setup = invariance_setup(i);
    TrainConfig cfg = invariance_config(0.9, 0.0);
    cfg.eta = 0.01;
    const InvarianceReport rep =
        trajectory_invariance_check(setup.task.model, setup.task.data, cfg, setup.gauge,
                                    kInvarianceSteps, 1e-6, OptimizerKind::LoraAdam);
    ++result.instances;
    min_dev = std::min(min_dev, rep.max_deviation);
  }
  result.max_deviation = min_dev;
  result.tolerance = 1e-3;
  result.passed = min_dev > 1e-3;
  result.detail = "smallest deviation over gauge pairs; must exceed tolerance";
  return result;
}

CheckResult check_lorapro_x() {
  Rng rng(501);
  CheckResult result;
  for (int i = 0; i < 50; ++i) {
    const Shape shape = random_shape(rng, 32, 8);
    const LoraLayer layer = random_layer(rng, shape, rng.uniform(0.5, 2.0) * shape.r);
    const Matrix g = rng.gaussian(shape.k, shape.d);
    auto equivalent = [&](const Matrix& x) {
      const LoraProGrads p = lorapro_equiv_grad(g, layer, x, kDefaultDamping);
      return Matrix(layer.scale() * (layer.b() * p.grad_a + p.grad_b * layer.a()));
    };
    const Matrix x1 = rng.gaussian(shape.r, shape.r);
    const Matrix x2 = rng.gaussian(shape.r, shape.r);
    track(result, relative_error(equivalent(x1), equivalent(x2)));
  }
  return finish_max(result, 1e-10);
}

constexpr double kFdStep = 1e-5;

template <typename Perturb>
Matrix central_difference(Index rows, Index cols, Perturb&& loss_at) {
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      out(i, j) = (loss_at(i, j, kFdStep) - loss_at(i, j, -kFdStep)) / (2.0 * kFdStep);
    }
  }
  return out;
}

/// Worst relative error of G, ∇A and ∇B against central differences.
double gradient_deviation(const ToyModel& model, const Dataset& data) {
  const LossAndGradient lg = evaluate(model, data);
  const LoraLayer& layer = model.layer;

  const Matrix fd_w = central_difference(layer.rows(), layer.cols(), [&](Index i, Index j, double h) {
    Matrix base = layer.base();
    base(i, j) += h;
    ToyModel probe = model;
    probe.layer = LoraLayer(std::move(base), layer.a(), layer.b(), layer.alpha());
    return evaluate(probe, data).loss;
  });
  const Matrix fd_a = central_difference(layer.rank(), layer.cols(), [&](Index i, Index j, double h) {
    ToyModel probe = model;
    probe.layer.a()(i, j) += h;
    return evaluate(probe, data).loss;
  });
  const Matrix fd_b = central_difference(layer.rows(), layer.rank(), [&](Index i, Index j, double h) {
    ToyModel probe = model;
    probe.layer.b()(i, j) += h;
    return evaluate(probe, data).loss;
  });
  const LoraGrads grads = lora_grads(lg.grad, layer);
  return std::max({relative_error(lg.grad, fd_w), relative_error(grads.grad_a, fd_a),
                   relative_error(grads.grad_b, fd_b)});
}

CheckResult check_finite_difference() {
  Rng rng(601);
  CheckResult result;
  for (int i = 0; i < 5; ++i) {
    const Shape shape{7, 5, 3};
    ToyModel linear = make_linear_model(random_layer(rng, shape, 6.0));
    const Dataset linear_data{rng.gaussian(shape.d, 9), rng.gaussian(shape.k, 9)};
    track(result, gradient_deviation(linear, linear_data));

    const Shape hidden{20, 5, 2};
    ToyModel relu = make_relu_model(random_layer(rng, hidden, 4.0), rng.gaussian(3, hidden.k, 0.3));
    const Dataset relu_data{rng.gaussian(hidden.d, 11), rng.gaussian(3, 11)};
    track(result, gradient_deviation(relu, relu_data));
  }
  return finish_max(result, 1e-6);
}

CheckResult check_b_zero_stall() {
  Rng rng(701);
  CheckResult result;
  bool exact = true;
  for (OptimizerKind kind : {OptimizerKind::AltLora, OptimizerKind::AltLoraPlus}) {
    for (int i = 0; i < 10; ++i) {
      const Matrix base = rng.gaussian(12, 10, 0.3);
      LoraLayer layer = make_layer(base, 3, 6.0, InitPolicy::Kaiming, InitPolicy::Zero, rng);
      const Matrix g = rng.gaussian(12, 10);
      TrainConfig cfg;
      cfg.order = UpdateOrder::AFirst;
      cfg.eta = 0.1;
      const Matrix scaled = scaled_grad_a(lora_grads(g, layer).grad_a, layer.b(), layer.scale(), cfg.lambda);
      const Matrix a_before = layer.a();
      const Matrix b_before = layer.b();
      AltLoraState state = AltLoraState::create(kind, layer);
      exact = exact && next_phase(kind, cfg, state.step) == Factor::A;
      optimizer_step(kind, layer, state, g, cfg);
      exact = exact && (scaled.array() == 0.0).all() && (layer.a().array() == a_before.array()).all() &&
              (layer.b().array() == b_before.array()).all();
      track(result, scaled.cwiseAbs().maxCoeff() + (layer.a() - a_before).cwiseAbs().maxCoeff());
    }
  }
  result.tolerance = 0.0;
  result.passed = exact && result.max_deviation == 0.0;
  return result;
}

CheckResult check_state_budget() {
  CheckResult result;
  Rng rng(801);
  const Shape shapes[] = {{8, 8, 1}, {32, 16, 4}, {64, 128, 8}, {128, 64, 16}, {24, 24, 24}, {5, 40, 2}};
  const OptimizerKind kinds[] = {OptimizerKind::AltLora,  OptimizerKind::AltLoraPlus,
                                 OptimizerKind::LoraSgd,  OptimizerKind::LoraAdam,
                                 OptimizerKind::LoraPlus, OptimizerKind::ScaledGdJoint};
  bool consistent = true;
  for (const Shape& shape : shapes) {
    const LoraLayer layer = random_layer(rng, shape, 1.0);
    for (OptimizerKind kind : kinds) {
      const AltLoraState state = AltLoraState::create(kind, layer);
      consistent = consistent &&
                   state.entry_count() == optimizer_state_entries(kind, shape.k, shape.d, shape.r);
      track(result, static_cast<double>(state.entry_count()) / static_cast<double>(state_budget(layer)));
    }
  }
  const StateAccounting alt = state_accounting(4096, 4096, 8, OptimizerKind::AltLora);
  const StateAccounting plus = state_accounting(4096, 4096, 8, OptimizerKind::AltLoraPlus);
  const double ratio = static_cast<double>(plus.full_moment_reference) /
                       static_cast<double>(plus.optimizer_state);
  result.data = {{"altlora_state", alt.optimizer_state},
                 {"altlora_plus_state", plus.optimizer_state},
                 {"full_moment_reference", plus.full_moment_reference},
                 {"budget", 6 * plus.trainable},
                 {"reduction", ratio}};
  result.tolerance = 1.0;
  result.passed = consistent && result.max_deviation <= 1.0 &&
                  plus.optimizer_state <= 6 * plus.trainable && ratio >= 100.0;
  result.detail = "deviation is the largest state/budget ratio";
  return result;
}

/// Condition-number study shared by the check and the CLI smoke tests.
ExperimentSpec kappa_spec(OptimizerKind kind, double kappa) {
  ExperimentSpec spec;
  spec.k = 32;
  spec.d = 32;
  spec.r = 4;
  spec.teacher_rank = 4;
  spec.kappa = kappa;
  spec.optimizer = kind;
  spec.train.beta1 = 0.0;
  spec.train.steps = 20000;
  spec.train.eta = kind == OptimizerKind::AltLora ? 0.5 : 0.02;
  spec.eval_every = 100;
  spec.stop_at_threshold = true;
  return spec;
}

CheckResult check_condition_number() {
  CheckResult result;
  const double kappas[] = {1.0, 10.0, 100.0};
  std::vector<long> alt;
  std::vector<long> sgd;
  for (double kappa : kappas) {
    alt.push_back(run_experiment(kappa_spec(OptimizerKind::AltLora, kappa)).steps_to_threshold);
    sgd.push_back(run_experiment(kappa_spec(OptimizerKind::LoraSgd, kappa)).steps_to_threshold);
    result.instances += 2;
  }
  const bool all_reached = std::min(*std::min_element(alt.begin(), alt.end()),
                                    *std::min_element(sgd.begin(), sgd.end())) > 0;
  const double alt_ratio = static_cast<double>(*std::max_element(alt.begin(), alt.end())) /
                           static_cast<double>(std::max(1L, *std::min_element(alt.begin(), alt.end())));
  const double sgd_ratio = static_cast<double>(sgd.back()) / static_cast<double>(std::max(1L, sgd.front()));
  const bool monotone = sgd[0] < sgd[1] && sgd[1] < sgd[2];
  result.data = {{"kappa", {1, 10, 100}},
                 {"altlora_steps", alt},
                 {"lora_sgd_steps", sgd},
                 {"altlora_ratio", alt_ratio},
                 {"lora_sgd_ratio", sgd_ratio}};
  result.max_deviation = alt_ratio;
  result.tolerance = 2.0;
  result.passed = all_reached && alt_ratio < 2.0 && sgd_ratio >= 5.0 && monotone;
  result.detail = "deviation is the AltLoRA max/min ratio; LoraSGD must grow monotonically by >= 5x";
  return result;
}

CheckResult check_width_scaling() {
  CheckResult result;
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.beta1 = 0.0;
  const std::vector<Index> widths = {64, 128, 256, 512, 1024};
  const ProbeResult alt = width_scaling_probe(widths, OptimizerKind::AltLora, cfg);
  const ProbeResult sgd = width_scaling_probe(widths, OptimizerKind::LoraSgd, cfg);
  result.instances = static_cast<int>(widths.size()) * 8;
  result.max_deviation = std::abs(alt.slope);
  result.tolerance = 0.25;
  result.passed = std::abs(alt.slope) <= 0.25;
  result.data = {{"widths", widths},
                 {"altlora_magnitudes", alt.magnitudes},
                 {"altlora_slope", alt.slope},
                 {"lora_sgd_magnitudes", sgd.magnitudes},
                 {"lora_sgd_slope", sgd.slope}};
  result.detail = "deviation is |AltLoRA slope|; the LoraSGD slope is informational";
  return result;
}

std::string run_csv(const ExperimentSpec& spec) {
  std::ostringstream out;
  write_csv(out, run_experiment(spec));
  return out.str();
}

CheckResult check_determinism() {
  CheckResult result;
  std::vector<ExperimentSpec> specs(3);
  specs[0].optimizer = OptimizerKind::AltLora;
  specs[0].train.steps = 300;
  specs[1].task = TaskKind::TwoLayerRelu;
  specs[1].d = 8;
  specs[1].k = 4;
  specs[1].width = 32;
  specs[1].r = 4;
  specs[1].teacher_rank = 2;
  specs[1].kappa = 10.0;
  specs[1].optimizer = OptimizerKind::AltLoraPlus;
  specs[1].train.steps = 300;
  specs[2].optimizer = OptimizerKind::LoraAdam;
  specs[2].kappa = 30.0;
  specs[2].seed = 9;
  specs[2].train.steps = 300;
  int mismatches = 0;
  for (const ExperimentSpec& spec : specs) {
    if (run_csv(spec) != run_csv(spec)) {
      ++mismatches;
    }
    ++result.instances;
  }
  result.max_deviation = mismatches;
  result.tolerance = 0.0;
  result.passed = mismatches == 0;
  result.detail = "deviation counts specs whose CSV bytes differ between runs";
  return result;
}

}  // namespace

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> registry = {
      {"lstsq.scaled_grad_a", "scaled A gradient solves its least-squares objective", check_scaled_grad_a},
      {"lstsq.scaled_grad_b", "scaled B gradient solves its least-squares objective", check_scaled_grad_b},
      {"lstsq.align_momentum_a", "A momentum realignment is least-squares optimal", check_align_momentum_a},
      {"lstsq.align_momentum_b", "B momentum realignment is least-squares optimal", check_align_momentum_b},
      {"decomposition.alternating_residual", "alternating pair step is two projected terms",
       check_alternating_residual},
      {"decomposition.cross_term", "joint step adds exactly the cross term", check_cross_term},
      {"decomposition.eta_order", "projector terms scale as eta, cross term as eta^2", check_eta_order},
      {"projector.gauge_invariance", "projectors agree across gauge-equivalent factors",
       check_projector_gauge},
      {"invariance.altlora", "AltLoRA trajectories are gauge invariant", check_invariance_plain},
      {"invariance.altlora_momentum", "AltLoRA with momentum is gauge invariant",
       check_invariance_momentum},
      {"invariance.lora_adam_negative", "LoRA-Adam trajectories depend on the gauge",
       check_invariance_adam_negative},
      {"invariance.weight_decay", "AltLoRA gauge deviation with weight decay",
       check_invariance_weight_decay},
      {"lorapro.x_independence", "LoRA-Pro equivalent gradient ignores X", check_lorapro_x},
      {"gradient.finite_difference", "backprop and factor gradients match finite differences",
       check_finite_difference},
      {"stall.b_zero_a_first", "A-first step from B = 0 leaves A untouched", check_b_zero_stall},
      {"accounting.state_budget", "optimizer state stays within 6(kr+rd)", check_state_budget},
      {"bench.condition_number", "steps to threshold versus condition number", check_condition_number},
      {"bench.width_scaling", "feature update magnitude versus width", check_width_scaling},
      {"bench.determinism", "identical specs give identical run records", check_determinism},
  };
  return registry;
}

bool glob_match(std::string_view pattern, std::string_view name) {
  return ::fnmatch(std::string(pattern).c_str(), std::string(name).c_str(), 0) == 0;
}

std::vector<const CheckInfo*> select_checks(std::string_view pattern) {
  std::vector<const CheckInfo*> out;
  for (const CheckInfo& info : check_registry()) {
    if (glob_match(pattern, info.name)) {
      out.push_back(&info);
    }
  }
  return out;
}

CheckResult run_check(const CheckInfo& info) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult result = info.run();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.name = info.name;
  return result;
}

CheckResult run_check(std::string_view name) {
  for (const CheckInfo& info : check_registry()) {
    if (info.name == name) {
      return run_check(info);
    }
  }
  throw std::out_of_range("unknown check '" + std::string(name) + "'");
}

int failure_count(const std::vector<CheckResult>& results) {
  return static_cast<int>(std::count_if(results.begin(), results.end(), [](const CheckResult& r) {
    return !r.passed && !r.informational;
  }));
}

nlohmann::json report_json(const std::vector<CheckResult>& results) {
  json checks = json::array();
  for (const CheckResult& r : results) {
    checks.push_back({{"name", r.name},
                      {"instances", r.instances},
                      {"max_deviation", std::isfinite(r.max_deviation) ? json(r.max_deviation) : json(nullptr)},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed},
                      {"informational", r.informational},
                      {"detail", r.detail},
                      {"data", r.data},
                      {"seconds", r.seconds}});
  }
  return json{{"build_id", ALTLORA_BUILD_ID},
              {"checks", checks},
              {"failures", failure_count(results)}};
}

}  // namespace altlora
