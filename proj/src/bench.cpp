// SPDX-License-Identifier: Apache-2.0
#include "altlora/bench.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#ifndef ALTLORA_BUILD_ID
#define ALTLORA_BUILD_ID "unknown"
#endif

namespace altlora {

using nlohmann::json;

ConditionSource ExperimentSpec::effective_condition_source() const {
  if (condition_source) {
    return *condition_source;
  }
  return task == TaskKind::TwoLayerRelu ? ConditionSource::Input : ConditionSource::Teacher;
}

void validate(const ExperimentSpec& spec) {
  auto fail = [](const std::string& what) { throw InvalidSpec(what); };
  if (spec.k < 1 || spec.d < 1 || spec.r < 1 || spec.teacher_rank < 1) {
    fail("k, d, r and teacher_rank must be positive");
  }
  if (!(spec.kappa >= 1.0) || !std::isfinite(spec.kappa)) {
    fail("kappa must be a finite number >= 1");
  }
  if (!(spec.sigma_max > 0.0)) {
    fail("sigma_max must be positive");
  }
  if (!(spec.alpha > 0.0)) {
    fail("alpha must be positive");
  }
  if (spec.eval_every < 1) {
    fail("eval_every must be positive");
  }
  if (spec.samples < 0) {
    fail("samples must be non-negative");
  }
  if (spec.effective_samples() < spec.d &&
      spec.effective_condition_source() == ConditionSource::Input) {
    fail("input conditioning needs at least d samples");
  }
  if (spec.task == TaskKind::LowRankFactorization) {
    if (!(spec.teacher_rank <= spec.r && spec.r <= std::min(spec.k, spec.d))) {
      fail("need teacher_rank <= r <= min(k, d)");
    }
  } else {
    if (spec.width < 4 * spec.d) {
      fail("width must be at least 4·d");
    }
    if (spec.r > std::min(spec.width, spec.d) || spec.teacher_rank > std::min(spec.width, spec.d)) {
      fail("ranks must not exceed min(width, d)");
    }
  }
  try {
    validate(spec.train);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

namespace {

Vector log_spaced(Index count, double top, double ratio) {
  Vector v(count);
  for (Index i = 0; i < count; ++i) {
    const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
    v(i) = top * std::pow(ratio, -t);
  }
  return v;
}

/// U·diag(σ)·Vᵀ with random orthonormal U (rows×rank) and V (cols×rank).
Matrix low_rank_residual(Index rows, Index cols, Index rank, double sigma_max, double kappa,
                         Rng& rng) {
  const Matrix u = random_orthonormal_columns(rows, rank, rng);
  const Matrix v = random_orthonormal_columns(cols, rank, rng);
  return u * log_spaced(rank, sigma_max, kappa).asDiagonal() * v.transpose();
}

}  // namespace

Matrix conditioned_inputs(Index d, Index m, double kappa, Rng& rng) {
  if (m < d) {
    throw InvalidSpec("conditioned_inputs: need m >= d");
  }
  const Matrix z = rng.gaussian(d, m);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(z * z.transpose() / static_cast<double>(m));
  const Matrix whitening = eig.eigenvectors() *
                           eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                           eig.eigenvectors().transpose();
  const Matrix rotation = random_orthogonal(d, rng);
  const Vector spectrum = log_spaced(d, 1.0, kappa);
  return rotation * spectrum.cwiseSqrt().asDiagonal() * rotation.transpose() * (whitening * z);
}

Task gen_lowrank_task(const ExperimentSpec& spec) {
  validate(spec);
  if (spec.task != TaskKind::LowRankFactorization) {
    throw InvalidSpec("gen_lowrank_task: wrong task kind");
  }
  Rng rng(spec.seed);
  const bool teacher_cond = spec.effective_condition_source() == ConditionSource::Teacher;
  Matrix base = rng.gaussian(spec.k, spec.d, 1.0 / std::sqrt(static_cast<double>(spec.d)));
  Matrix delta = low_rank_residual(spec.k, spec.d, spec.teacher_rank, spec.sigma_max,
                                   teacher_cond ? spec.kappa : 1.0, rng);
  const Index m = spec.effective_samples();
  Matrix inputs = teacher_cond ? rng.gaussian(spec.d, m) : conditioned_inputs(spec.d, m, spec.kappa, rng);
  Matrix teacher = base + delta;
  Matrix targets = teacher * inputs;
  LoraLayer layer = make_layer(std::move(base), spec.r, spec.alpha, spec.init_a, spec.init_b, rng);
  return Task{make_linear_model(std::move(layer)), Dataset{std::move(inputs), std::move(targets)},
              std::move(teacher), std::move(delta)};
}

Task gen_relu_task(const ExperimentSpec& spec) {
  validate(spec);
  if (spec.task != TaskKind::TwoLayerRelu) {
    throw InvalidSpec("gen_relu_task: wrong task kind");
  }
  Rng rng(spec.seed);
  const bool teacher_cond = spec.effective_condition_source() == ConditionSource::Teacher;
  const Index n = spec.width;
  Matrix base = rng.gaussian(n, spec.d, 1.0 / std::sqrt(static_cast<double>(spec.d)));
  Matrix head = rng.gaussian(spec.k, n, 1.0 / std::sqrt(static_cast<double>(n)));
  Matrix delta = low_rank_residual(n, spec.d, spec.teacher_rank, spec.sigma_max,
                                   teacher_cond ? spec.kappa : 1.0, rng);
  const Index m = spec.effective_samples();
  Matrix inputs = teacher_cond ? rng.gaussian(spec.d, m) : conditioned_inputs(spec.d, m, spec.kappa, rng);
  Matrix teacher = base + delta;
  Matrix targets = head * (teacher * inputs).cwiseMax(0.0);
  LoraLayer layer = make_layer(std::move(base), spec.r, spec.alpha, spec.init_a, spec.init_b, rng);
  return Task{make_relu_model(std::move(layer), std::move(head)),
              Dataset{std::move(inputs), std::move(targets)}, std::move(teacher), std::move(delta)};
}

Task make_task(const ExperimentSpec& spec) {
  return spec.task == TaskKind::LowRankFactorization ? gen_lowrank_task(spec) : gen_relu_task(spec);
}

std::uint64_t step_flops(OptimizerKind kind, Factor phase, const ToyModel& model, Index samples) {
  const auto k = static_cast<std::uint64_t>(model.layer.rows());
  const auto d = static_cast<std::uint64_t>(model.layer.cols());
  const auto r = static_cast<std::uint64_t>(model.layer.rank());
  const auto m = static_cast<std::uint64_t>(samples);
  // Merged weight, forward product, gradient product and residual.
  std::uint64_t flops = 2 * k * r * d + k * d + 4 * k * d * m + 3 * k * m;
  if (model.kind == ModelKind::TwoLayerRelu) {
    const auto out = static_cast<std::uint64_t>(model.head.rows());
    flops += 4 * out * k * m + 2 * k * m;
  }
  const std::uint64_t inverse = r * r * r;
  const std::uint64_t factor_a = r * d;
  const std::uint64_t factor_b = k * r;
  // Raw factor gradient, scaled gradient (Gram, inverse, apply) and update.
  const std::uint64_t scaled_a = 2 * k * r * d + 2 * k * r * r + inverse + 2 * r * r * d + 3 * factor_a;
  const std::uint64_t scaled_b = 2 * k * r * d + 2 * d * r * r + inverse + 2 * k * r * r + 3 * factor_b;
  // Realignment: Bnewᵀ·Bold and the product with the moment, likewise for A.
  const std::uint64_t align_a = 2 * k * r * r + 2 * r * r * d + 2 * r * r * d;
  const std::uint64_t align_b = 2 * r * d * r + 2 * k * r * r + 2 * k * r * r;
  const std::uint64_t adaptive = 6;
  switch (kind) {
    case OptimizerKind::AltLora:
    case OptimizerKind::AltLoraPlus: {
      const std::uint64_t extra = kind == OptimizerKind::AltLoraPlus ? adaptive : 0;
      if (phase == Factor::A) {
        flops += scaled_a + align_a + (2 + extra) * factor_a;
      } else if (phase == Factor::B) {
        flops += scaled_b + align_b + (2 + extra) * factor_b;
      } else {
        flops += scaled_a + align_a + scaled_b + align_b + (2 + extra) * (factor_a + factor_b);
      }
      break;
    }
    case OptimizerKind::LoraSgd:
    case OptimizerKind::LoraPlus:
      flops += 4 * k * r * d + 3 * (factor_a + factor_b);
      break;
    case OptimizerKind::LoraAdam:
      flops += 4 * k * r * d + (3 + 2 + adaptive) * (factor_a + factor_b);
      break;
    case OptimizerKind::ScaledGdJoint:
      flops += scaled_a + scaled_b + 2 * (factor_a + factor_b);
      break;
  }
  return flops;
}

RunRecord run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  Task task = make_task(spec);
  ToyModel& model = task.model;
  AltLoraState state = AltLoraState::create(spec.optimizer, model.layer);
  const Index samples = task.data.inputs.cols();

  RunRecord record;
  std::uint64_t flops = 0;
  const long steps = spec.train.steps;
  for (long t = 0;; ++t) {
    const LossAndGradient lg = evaluate(model, task.data);
    const bool diverged = !std::isfinite(lg.loss) || lg.loss > 1e6;
    const bool reached = lg.loss <= spec.loss_threshold;
    if (reached && record.steps_to_threshold < 0) {
      record.steps_to_threshold = t;
    }
    const bool last = t == steps || diverged || (reached && spec.stop_at_threshold);
    if (t % spec.eval_every == 0 || last) {
      record.rows.push_back(RunRow{t, lg.loss, (merged_weight(model.layer) - task.teacher_weight).norm(),
                                   lg.grad.norm(), state.entry_count(), flops});
    }
    if (diverged) {
      record.diverged = true;
      break;
    }
    if (last) {
      break;
    }
    TrainConfig scheduled = spec.train;
    scheduled.eta = learning_rate_at(spec.train, static_cast<int>(t));
    flops += step_flops(spec.optimizer, next_phase(spec.optimizer, spec.train, state.step), model,
                        samples);
    optimizer_step(spec.optimizer, model.layer, state, lg.grad, scheduled);
  }
  return record;
}

void write_csv(std::ostream& out, const RunRecord& record) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << kRunCsvHeader << '\n' << std::setprecision(17);
  for (const RunRow& row : record.rows) {
    out << row.step << ',' << row.loss << ',' << row.weight_err << ',' << row.grad_norm << ','
        << row.state_entries << ',' << row.flops << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::LowRankFactorization ? "lowrank" : "relu";
}

std::string_view to_string(InitPolicy policy) {
  switch (policy) {
    case InitPolicy::Gaussian: return "gaussian";
    case InitPolicy::Kaiming: return "kaiming";
    case InitPolicy::Spectral: return "spectral";
    case InitPolicy::Zero: return "zero";
  }
  return "unknown";
}

std::string_view to_string(ConditionSource source) {
  return source == ConditionSource::Teacher ? "teacher" : "input";
}

namespace {

std::string_view to_string(Schedule schedule) {
  return schedule == Schedule::Constant ? "constant" : "cosine";
}

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& name, const Enum (&values)[N], std::string_view what) {
  for (Enum value : values) {
    if (to_string(value) == name) {
      return value;
    }
  }
  throw InvalidSpec("unknown " + std::string(what) + " '" + name + "'");
}

constexpr TaskKind kTasks[] = {TaskKind::LowRankFactorization, TaskKind::TwoLayerRelu};
constexpr InitPolicy kInits[] = {InitPolicy::Gaussian, InitPolicy::Kaiming, InitPolicy::Spectral,
                                 InitPolicy::Zero};
constexpr ConditionSource kSources[] = {ConditionSource::Teacher, ConditionSource::Input};
constexpr Schedule kSchedules[] = {Schedule::Constant, Schedule::Cosine};
constexpr OptimizerKind kOptimizers[] = {OptimizerKind::AltLora, OptimizerKind::AltLoraPlus,
                                         OptimizerKind::LoraSgd, OptimizerKind::LoraAdam,
                                         OptimizerKind::LoraPlus, OptimizerKind::ScaledGdJoint};
constexpr UpdateOrder kOrders[] = {UpdateOrder::AFirst, UpdateOrder::BFirst, UpdateOrder::Joint};

json train_to_json(const TrainConfig& cfg) {
  return json{{"eta", cfg.eta},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"gamma", cfg.gamma},
              {"lambda", cfg.lambda},
              {"order", std::string(to_string(cfg.order))},
              {"steps", cfg.steps},
              {"eps", cfg.eps},
              {"bias_correction", cfg.bias_correction},
              {"lr_ratio", cfg.lr_ratio},
              {"schedule", std::string(to_string(cfg.schedule))},
              {"warmup_ratio", cfg.warmup_ratio}};
}

TrainConfig train_from_json(const json& doc, bool strict) {
  if (!doc.is_object()) {
    throw InvalidSpec("'train' must be an object");
  }
  TrainConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "eta") cfg.eta = value.get<double>();
    else if (key == "beta1") cfg.beta1 = value.get<double>();
    else if (key == "beta2") cfg.beta2 = value.get<double>();
    else if (key == "gamma") cfg.gamma = value.get<double>();
    else if (key == "lambda") cfg.lambda = value.get<double>();
    else if (key == "order") cfg.order = parse_enum(value.get<std::string>(), kOrders, "order");
    else if (key == "steps") cfg.steps = value.get<int>();
    else if (key == "eps") cfg.eps = value.get<double>();
    else if (key == "bias_correction") cfg.bias_correction = value.get<bool>();
    else if (key == "lr_ratio") cfg.lr_ratio = value.get<double>();
    else if (key == "schedule") cfg.schedule = parse_enum(value.get<std::string>(), kSchedules, "schedule");
    else if (key == "warmup_ratio") cfg.warmup_ratio = value.get<double>();
    else if (strict) throw InvalidSpec("unknown key 'train." + key + "'");
  }
  return cfg;
}

}  // namespace

json spec_to_json(const ExperimentSpec& spec) {
  return json{{"task", std::string(to_string(spec.task))},
              {"k", spec.k},
              {"d", spec.d},
              {"r", spec.r},
              {"width", spec.width},
              {"teacher_rank", spec.teacher_rank},
              {"kappa", spec.kappa},
              {"condition_source", std::string(to_string(spec.effective_condition_source()))},
              {"samples", spec.effective_samples()},
              {"sigma_max", spec.sigma_max},
              {"alpha", spec.alpha},
              {"optimizer", std::string(to_string(spec.optimizer))},
              {"init_a", std::string(to_string(spec.init_a))},
              {"init_b", std::string(to_string(spec.init_b))},
              {"seed", spec.seed},
              {"eval_every", spec.eval_every},
              {"loss_threshold", spec.loss_threshold},
              {"stop_at_threshold", spec.stop_at_threshold},
              {"train", train_to_json(spec.train)}};
}

ExperimentSpec spec_from_json(const json& doc, bool strict) {
  if (!doc.is_object()) {
    throw InvalidSpec("experiment spec must be a JSON object");
  }
  ExperimentSpec spec;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "task") spec.task = parse_enum(value.get<std::string>(), kTasks, "task");
      else if (key == "k") spec.k = value.get<Index>();
      else if (key == "d") spec.d = value.get<Index>();
      else if (key == "r") spec.r = value.get<Index>();
      else if (key == "width") spec.width = value.get<Index>();
      else if (key == "teacher_rank") spec.teacher_rank = value.get<Index>();
      else if (key == "kappa") spec.kappa = value.get<double>();
      else if (key == "condition_source")
        spec.condition_source = parse_enum(value.get<std::string>(), kSources, "condition_source");
      else if (key == "samples") spec.samples = value.get<Index>();
      else if (key == "sigma_max") spec.sigma_max = value.get<double>();
      else if (key == "alpha") spec.alpha = value.get<double>();
      else if (key == "optimizer") spec.optimizer = parse_enum(value.get<std::string>(), kOptimizers, "optimizer");
      else if (key == "init_a") spec.init_a = parse_enum(value.get<std::string>(), kInits, "init_a");
      else if (key == "init_b") spec.init_b = parse_enum(value.get<std::string>(), kInits, "init_b");
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else if (key == "eval_every") spec.eval_every = value.get<int>();
      else if (key == "loss_threshold") spec.loss_threshold = value.get<double>();
      else if (key == "stop_at_threshold") spec.stop_at_threshold = value.get<bool>();
      else if (key == "train") spec.train = train_from_json(value, strict);
      else if (strict) throw InvalidSpec("unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("bad value in experiment spec: ") + e.what());
  }
  return spec;
}

json sidecar_json(const ExperimentSpec& spec, const RunRecord& record) {
  return json{{"spec", spec_to_json(spec)},
              {"steps_to_threshold", record.steps_to_threshold},
              {"diverged", record.diverged},
              {"rows", record.rows.size()},
              {"final_loss", record.rows.empty() ? 0.0 : record.rows.back().loss},
              {"csv_header", std::string(kRunCsvHeader)},
              {"build_id", ALTLORA_BUILD_ID}};
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("log_log_slope: need at least two paired points");
  }
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    mean_x += std::log(x[i]);
    mean_y += std::log(y[i]);
  }
  mean_x /= static_cast<double>(x.size());
  mean_y /= static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mean_x;
    sxy += dx * (std::log(y[i]) - mean_y);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

ProbeResult width_scaling_probe(const std::vector<Index>& widths, OptimizerKind kind,
                                const TrainConfig& cfg, const ProbeOptions& options) {
  if (widths.size() < 4) {
    throw std::invalid_argument("width_scaling_probe: need at least four widths");
  }
  for (std::size_t i = 1; i < widths.size(); ++i) {
    if (widths[i] <= widths[i - 1]) {
      throw std::invalid_argument("width_scaling_probe: widths must be strictly increasing");
    }
  }
  if (widths.front() < options.rank || options.seeds < 1) {
    throw std::invalid_argument("width_scaling_probe: widths below rank or no seeds");
  }
  ProbeResult result;
  result.widths = widths;
  const Index q = options.rank;
  for (const Index n : widths) {
    double total = 0.0;
    for (int s = 0; s < options.seeds; ++s) {
      Rng rng(options.seed * 1'000'003ULL + static_cast<std::uint64_t>(n) * 1'009ULL +
              static_cast<std::uint64_t>(s));
      Matrix base = rng.gaussian(n, n, 1.0 / std::sqrt(static_cast<double>(n)));
      LoraLayer layer = make_layer(std::move(base), options.rank, options.alpha,
                                   InitPolicy::Kaiming, InitPolicy::Zero, rng);
      const Matrix inputs = rng.rademacher(n, q);
      const Matrix directions = rng.rademacher(n, q);
      const Matrix g = (options.grad_scale / static_cast<double>(n * q)) *
                       (directions * inputs.transpose());
      const Vector x0 = inputs.col(0);
      const Vector before = layer.scale() * (layer.b() * (layer.a() * x0));
      AltLoraState state = AltLoraState::create(kind, layer);
      optimizer_step(kind, layer, state, g, cfg);
      optimizer_step(kind, layer, state, g, cfg);
      const Vector after = layer.scale() * (layer.b() * (layer.a() * x0));
      total += (after - before).cwiseAbs().maxCoeff();
    }
    result.magnitudes.push_back(total / static_cast<double>(options.seeds));
  }
  std::vector<double> xs(widths.begin(), widths.end());
  result.slope = log_log_slope(xs, result.magnitudes);
  return result;
}

StateAccounting state_accounting(Index k, Index d, Index r, OptimizerKind kind) {
  StateAccounting acc;
  acc.trainable = k * r + r * d;
  acc.optimizer_state = optimizer_state_entries(kind, k, d, r);
  // Decomposition oracle: three merged weights, three report terms, two projectors.
  acc.verification_peak = 6 * k * d + k * k + d * d;
  acc.full_moment_reference = 2 * k * d;
  return acc;
}

}  // namespace altlora
