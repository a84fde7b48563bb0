// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>

#include "altlora/errors.hpp"
#include "altlora/optim.hpp"
#include "altlora/oracle.hpp"

namespace altlora {
namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) {
      m(i, j++) = v;
    }
    ++i;
  }
  return m;
}

LoraLayer random_layer(Rng& rng, Index k, Index d, Index r, double alpha) {
  return LoraLayer(rng.gaussian(k, d, 0.3), rng.gaussian(r, d), rng.gaussian(k, r), alpha);
}

TrainConfig plain(double eta) {
  TrainConfig cfg;
  cfg.eta = eta;
  cfg.beta1 = 0.0;
  cfg.lambda = 0.0;
  return cfg;
}

double residual(const Matrix& design, const Matrix& z, const Matrix& target) {
  return (design * z - target).norm();
}

TEST(ScaledGradA, ZeroBStalls) {
  Rng rng(1);
  const LoraLayer layer(rng.gaussian(4, 5), rng.gaussian(2, 5), Matrix::Zero(4, 2), 2.0);
  const Matrix grad_a = lora_grads(rng.gaussian(4, 5), layer).grad_a;
  const Matrix out = scaled_grad_a(grad_a, layer.b(), layer.scale(), 1.0);
  EXPECT_TRUE((out.array() == 0.0).all());
}

TEST(ScaledGradA, OrthonormalColumn) {
  const Matrix out = scaled_grad_a(from_rows({{2, 0}}), from_rows({{1}, {0}}), 1.0, 0.0);
  EXPECT_LT((out - from_rows({{2, 0}})).norm(), 1e-15);
}

TEST(ScaledGradA, LocallyMinimalResidual) {
  Rng rng(2);
  const Matrix b = rng.gaussian(16, 4);
  const Matrix g = rng.gaussian(16, 32);
  const Matrix z = scaled_grad_a(b.transpose() * g, b, 1.0, 0.0);
  EXPECT_LT(relative_error(z, lstsq_left_factor(b, g, 1.0)), 1e-9);
  const double best = residual(b, z, g);
  for (int i = 0; i < 1000; ++i) {
    Matrix delta = rng.gaussian(4, 32);
    delta *= 1e-3 / delta.norm();
    EXPECT_LT(best, residual(b, z + delta, g));
  }
}

TEST(ScaledGradA, ShapeChecked) {
  EXPECT_THROW(scaled_grad_a(Matrix::Zero(3, 4), Matrix::Zero(5, 2), 1.0, 1.0), ShapeMismatch);
}

TEST(ScaledGradB, OrthonormalRowsIsIdentity) {
  Rng rng(3);
  const Matrix a = random_orthonormal_columns(7, 3, rng).transpose();
  const Matrix grad_b = rng.gaussian(5, 3);
  EXPECT_LT(relative_error(scaled_grad_b(grad_b, a, 1.0, 0.0), grad_b), 1e-12);
}

TEST(ScaledGradB, InverseSquareScaling) {
  Rng rng(4);
  const Matrix a = rng.gaussian(3, 8);
  const Matrix grad_b = rng.gaussian(6, 3);
  const Matrix one = scaled_grad_b(grad_b, a, 1.0, 0.0);
  const Matrix two = scaled_grad_b(grad_b, a, 2.0, 0.0);
  EXPECT_LT(relative_error(Matrix(4.0 * two), one), 1e-14);
}

TEST(ScaledGradB, MatchesTransposedOracle) {
  Rng rng(5);
  const Matrix a = rng.gaussian(4, 32);
  const Matrix g = rng.gaussian(16, 32);
  EXPECT_LT(relative_error(scaled_grad_b(g * a.transpose(), a, 1.0, 0.0), lstsq_right_factor(a, g, 1.0)),
            1e-9);
}

TEST(AlignMomentumB, SameSubspaceIsIdentity) {
  Rng rng(6);
  const Matrix mb = rng.gaussian(5, 2);
  const Matrix a = rng.gaussian(2, 7);
  EXPECT_LT(relative_error(align_momentum_b(mb, a, a, 0.0), mb), 1e-12);
}

TEST(AlignMomentumB, OrthogonalSubspacesKillMomentum) {
  const Matrix out = align_momentum_b(from_rows({{3}, {4}}), from_rows({{1, 0}}), from_rows({{0, 1}}), 0.0);
  EXPECT_LT(out.norm(), 1e-15);
}

TEST(AlignMomentumB, LeastSquaresOptimal) {
  Rng rng(7);
  const Matrix mb = rng.gaussian(8, 2);
  const Matrix a_old = rng.gaussian(2, 16);
  const Matrix a_new = rng.gaussian(2, 16);
  const Matrix z = align_momentum_b(mb, a_old, a_new, 0.0);
  EXPECT_LT(relative_error(z, lstsq_momentum_b(mb, a_old, a_new)), 1e-9);
  const double best = (mb * a_old - z * a_new).norm();
  for (int i = 0; i < 1000; ++i) {
    Matrix delta = rng.gaussian(8, 2);
    delta *= 1e-3 / delta.norm();
    EXPECT_LT(best, (mb * a_old - (z + delta) * a_new).norm());
  }
}

TEST(AlignMomentumA, SameSubspaceIsIdentity) {
  Rng rng(8);
  const Matrix ma = rng.gaussian(3, 6);
  const Matrix b = rng.gaussian(9, 3);
  EXPECT_LT(relative_error(align_momentum_a(ma, b, b, 0.0), ma), 1e-12);
}

TEST(AlignMomentumA, OrthogonalSubspacesKillMomentum) {
  const Matrix out = align_momentum_a(from_rows({{3, 4}}), from_rows({{1}, {0}}), from_rows({{0}, {1}}), 0.0);
  EXPECT_LT(out.norm(), 1e-15);
}

TEST(AlignMomentumA, MatchesOracle) {
  Rng rng(9);
  const Matrix ma = rng.gaussian(3, 10);
  const Matrix b_old = rng.gaussian(12, 3);
  const Matrix b_new = rng.gaussian(12, 3);
  EXPECT_LT(relative_error(align_momentum_a(ma, b_old, b_new, 0.0), lstsq_momentum_a(ma, b_old, b_new)), 1e-9);
}

TEST(AltLoraStep, FirstBPhaseFromZeroB) {
  Rng rng(10);
  LoraLayer layer = make_layer(rng.gaussian(6, 8), 2, 4.0, InitPolicy::Kaiming, InitPolicy::Zero, rng);
  const Matrix a_before = layer.a();
  const Matrix g = rng.gaussian(6, 8);
  TrainConfig cfg;
  cfg.eta = 0.05;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLora, layer);
  altlora_step(layer, state, g, cfg);
  const Matrix a = a_before;
  const Matrix expected = -cfg.eta * (1.0 - cfg.beta1) / layer.scale() *
                          (g * a.transpose() * (a * a.transpose() + cfg.lambda * Matrix::Identity(2, 2)).inverse());
  EXPECT_LT(relative_error(layer.b(), expected), 1e-12);
  EXPECT_TRUE((layer.a().array() == a_before.array()).all());
  EXPECT_EQ(state.b_updates, 1);
  EXPECT_EQ(state.a_updates, 0);
  EXPECT_EQ(state.ma.norm(), 0.0);
}

TEST(AltLoraStep, PureWeightDecay) {
  Rng rng(11);
  LoraLayer layer = random_layer(rng, 5, 6, 2, 2.0);
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.gamma = 0.5;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLora, layer);
  const Matrix b_before = layer.b();
  altlora_step(layer, state, Matrix::Zero(5, 6), cfg);
  EXPECT_LT(relative_error(layer.b(), Matrix((1.0 - 0.05) * b_before)), 1e-15);
}

TEST(AltLoraStep, PairStepIsTwoProjections) {
  Rng rng(12);
  ToyModel model = make_linear_model(random_layer(rng, 7, 9, 3, 3.0));
  const Dataset data{rng.gaussian(9, 20), rng.gaussian(7, 20)};
  const TrainConfig cfg = plain(0.05);
  const LoraLayer start = model.layer;
  const Matrix g_t = evaluate(model, data).grad;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLora, model.layer);
  altlora_step(model.layer, state, g_t, cfg);  // B first
  const Matrix b_plus = model.layer.b();
  const Matrix g_half = evaluate(model, data).grad;
  altlora_step(model.layer, state, g_half, cfg);
  const Matrix expected = -cfg.eta * g_t * projector(start.a(), Space::RowSpace, 0.0) -
                          cfg.eta * projector(b_plus, Space::ColumnSpace, 0.0) * g_half;
  const Matrix actual = equivalent_update(start, model.layer);
  EXPECT_LT(relative_error(actual, expected), 1e-10);
}

TEST(AltLoraStep, PhaseOrder) {
  TrainConfig cfg;
  EXPECT_EQ(next_phase(OptimizerKind::AltLora, cfg, 0), Factor::B);
  EXPECT_EQ(next_phase(OptimizerKind::AltLora, cfg, 1), Factor::A);
  cfg.order = UpdateOrder::AFirst;
  EXPECT_EQ(next_phase(OptimizerKind::AltLoraPlus, cfg, 0), Factor::A);
  cfg.order = UpdateOrder::Joint;
  EXPECT_EQ(next_phase(OptimizerKind::AltLora, cfg, 3), Factor::Both);
  EXPECT_EQ(next_phase(OptimizerKind::LoraSgd, TrainConfig{}, 0), Factor::Both);
}

TEST(AltLoraStep, BookkeepingIdentity) {
  Rng rng(13);
  for (OptimizerKind kind : {OptimizerKind::AltLora, OptimizerKind::AltLoraPlus, OptimizerKind::LoraSgd,
                             OptimizerKind::LoraAdam, OptimizerKind::LoraPlus, OptimizerKind::ScaledGdJoint}) {
    LoraLayer layer = random_layer(rng, 6, 5, 2, 2.0);
    const LoraLayer before = layer;
    AltLoraState state = AltLoraState::create(kind, layer);
    optimizer_step(kind, layer, state, rng.gaussian(6, 5), TrainConfig{});
    const Matrix delta = equivalent_update(before, layer);
    EXPECT_LT((merged_weight(layer) - (merged_weight(before) + delta)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE((layer.base().array() == before.base().array()).all()) << to_string(kind);
  }
}

TEST(AltLoraStep, StateWithinBudgetAndZeroInitially) {
  Rng rng(14);
  const LoraLayer layer = random_layer(rng, 40, 30, 4, 8.0);
  for (OptimizerKind kind : {OptimizerKind::AltLora, OptimizerKind::AltLoraPlus, OptimizerKind::LoraAdam}) {
    const AltLoraState state = AltLoraState::create(kind, layer);
    EXPECT_EQ(state.ma.norm(), 0.0);
    EXPECT_EQ(state.mb.norm(), 0.0);
    EXPECT_LE(state.entry_count(), state_budget(layer));
    EXPECT_EQ(state.entry_count(), optimizer_state_entries(kind, 40, 30, 4));
  }
}

TEST(AltLoraStep, WrongStateRejected) {
  Rng rng(15);
  LoraLayer layer = random_layer(rng, 4, 4, 1, 1.0);
  AltLoraState sgd_state = AltLoraState::create(OptimizerKind::LoraSgd, layer);
  EXPECT_THROW(altlora_step(layer, sgd_state, Matrix::Zero(4, 4), TrainConfig{}), std::logic_error);
  AltLoraState alt_state = AltLoraState::create(OptimizerKind::AltLora, layer);
  EXPECT_THROW(altlora_plus_step(layer, alt_state, Matrix::Zero(4, 4), TrainConfig{}), std::logic_error);
}

TEST(AltLoraStep, BPhaseLinearInGradient) {
  Rng rng(16);
  LoraLayer one = random_layer(rng, 5, 7, 2, 2.0);
  LoraLayer two = one;
  const LoraLayer start = one;
  const Matrix g = rng.gaussian(5, 7);
  AltLoraState s1 = AltLoraState::create(OptimizerKind::AltLora, one);
  AltLoraState s2 = AltLoraState::create(OptimizerKind::AltLora, two);
  altlora_step(one, s1, g, plain(0.1));
  altlora_step(two, s2, 2.0 * g, plain(0.1));
  EXPECT_LT(relative_error(Matrix(two.b() - start.b()), Matrix(2.0 * (one.b() - start.b()))), 1e-14);
  EXPECT_LT(relative_error(s2.mb, Matrix(2.0 * s1.mb)), 1e-14);
}

TEST(AltLoraPlusStep, LargeEpsReducesToScaledMomentum) {
  Rng rng(17);
  LoraLayer adaptive = random_layer(rng, 5, 6, 2, 2.0);
  const LoraLayer start = adaptive;
  const Matrix g = rng.gaussian(5, 6);
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.eps = 1e8;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLoraPlus, adaptive);
  altlora_plus_step(adaptive, state, g, cfg);
  const Matrix m_hat = state.mb / (1.0 - cfg.beta1);
  EXPECT_LT(relative_error(Matrix(start.b() - adaptive.b()), Matrix(m_hat / cfg.eps)), 1e-6);
}

TEST(AltLoraPlusStep, SignLimit) {
  Rng rng(18);
  LoraLayer layer = random_layer(rng, 5, 6, 2, 2.0);
  const LoraLayer start = layer;
  const Matrix g = rng.gaussian(5, 6);
  TrainConfig cfg;
  cfg.eta = 1e-3;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  cfg.lambda = 0.0;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLoraPlus, layer);
  altlora_plus_step(layer, state, g, cfg);
  const Matrix scaled = scaled_grad_b(lora_grads(g, start).grad_b, start.a(), start.scale(), 0.0);
  const Matrix expected = -cfg.eta * scaled.array().sign().matrix();
  EXPECT_LT((layer.b() - start.b() - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AltLoraPlusStep, PerEntryStepBounded) {
  Rng rng(19);
  ToyModel model = make_linear_model(random_layer(rng, 8, 10, 3, 6.0));
  const Dataset data{rng.gaussian(10, 30), rng.gaussian(8, 30)};
  TrainConfig cfg;
  cfg.eta = 1e-2;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.9;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLoraPlus, model.layer);
  for (int t = 1; t <= 10; ++t) {
    const LoraLayer before = model.layer;
    train_step(OptimizerKind::AltLoraPlus, model, state, data, cfg);
    const double change = std::max((model.layer.a() - before.a()).cwiseAbs().maxCoeff(),
                                   (model.layer.b() - before.b()).cwiseAbs().maxCoeff());
    // Bias-corrected V retains at least (1 - beta2) g^2 / (1 - beta2^t).
    const double bound = cfg.eta * std::sqrt((1.0 - std::pow(cfg.beta2, t)) / (1.0 - cfg.beta2));
    EXPECT_LE(change, bound * (1.0 + 1e-6)) << "step " << t;
  }
}

TEST(BaselineStep, SgdWithZeroBLeavesA) {
  Rng rng(20);
  LoraLayer layer = make_layer(rng.gaussian(4, 6), 2, 2.0, InitPolicy::Kaiming, InitPolicy::Zero, rng);
  const Matrix a_before = layer.a();
  AltLoraState state = AltLoraState::create(OptimizerKind::LoraSgd, layer);
  baseline_step(OptimizerKind::LoraSgd, layer, state, rng.gaussian(4, 6), plain(0.1));
  EXPECT_TRUE((layer.a().array() == a_before.array()).all());
  EXPECT_GT(layer.b().norm(), 0.0);
  EXPECT_EQ(state.entry_count(), 0);
}

TEST(BaselineStep, LoraPlusRatioOneIsSgd) {
  Rng rng(21);
  LoraLayer sgd = random_layer(rng, 5, 5, 2, 2.0);
  LoraLayer plus = sgd;
  const Matrix g = rng.gaussian(5, 5);
  TrainConfig cfg = plain(0.1);
  cfg.lr_ratio = 1.0;
  AltLoraState s1 = AltLoraState::create(OptimizerKind::LoraSgd, sgd);
  AltLoraState s2 = AltLoraState::create(OptimizerKind::LoraPlus, plus);
  baseline_step(OptimizerKind::LoraSgd, sgd, s1, g, cfg);
  baseline_step(OptimizerKind::LoraPlus, plus, s2, g, cfg);
  EXPECT_TRUE((sgd.a().array() == plus.a().array()).all());
  EXPECT_TRUE((sgd.b().array() == plus.b().array()).all());
}

TEST(BaselineStep, ScaledGdJointTermByTerm) {
  Rng rng(22);
  const double lambda = 0.3;
  LoraLayer layer = random_layer(rng, 6, 8, 2, 2.0);
  const LoraLayer start = layer;
  const Matrix g = rng.gaussian(6, 8);
  TrainConfig cfg = plain(0.2);
  cfg.lambda = lambda;
  AltLoraState state = AltLoraState::create(OptimizerKind::ScaledGdJoint, layer);
  baseline_step(OptimizerKind::ScaledGdJoint, layer, state, g, cfg);
  const Matrix& a = start.a();
  const Matrix& b = start.b();
  const double s = start.scale();
  const Matrix inv_b = (b.transpose() * b + lambda * Matrix::Identity(2, 2)).inverse();
  const Matrix inv_a = (a * a.transpose() + lambda * Matrix::Identity(2, 2)).inverse();
  const Matrix expected = -cfg.eta * b * inv_b * b.transpose() * g -
                          cfg.eta * g * a.transpose() * inv_a * a +
                          cfg.eta * cfg.eta / s * g * a.transpose() * inv_a * inv_b * b.transpose() * g;
  EXPECT_LT(relative_error(equivalent_update(start, layer), expected), 1e-12);
}

TEST(BaselineStep, AdamFirstStepIsSignLike) {
  Rng rng(23);
  LoraLayer layer = random_layer(rng, 4, 4, 2, 2.0);
  const LoraLayer start = layer;
  const Matrix g = rng.gaussian(4, 4);
  TrainConfig cfg;
  cfg.eta = 1e-3;
  AltLoraState state = AltLoraState::create(OptimizerKind::LoraAdam, layer);
  baseline_step(OptimizerKind::LoraAdam, layer, state, g, cfg);
  const LoraGrads raw = lora_grads(g, start);
  EXPECT_LT((layer.a() - start.a() + cfg.eta * raw.grad_a.array().sign().matrix()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BaselineStep, RejectsAlternatingKind) {
  Rng rng(24);
  LoraLayer layer = random_layer(rng, 3, 3, 1, 1.0);
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLora, layer);
  EXPECT_THROW(baseline_step(OptimizerKind::AltLora, layer, state, Matrix::Zero(3, 3), TrainConfig{}),
               std::invalid_argument);
}

TEST(LoraPro, IdentityGrams) {
  Rng rng(25);
  const Matrix b = random_orthonormal_columns(6, 2, rng);
  const Matrix a = random_orthonormal_columns(5, 2, rng).transpose();
  const LoraLayer layer(Matrix::Zero(6, 5), a, b, 2.0);
  const Matrix g = rng.gaussian(6, 5);
  const LoraProGrads out = lorapro_equiv_grad(g, layer, Matrix::Zero(2, 2), 0.0);
  EXPECT_LT(relative_error(out.grad_a, Matrix(b.transpose() * g)), 1e-12);
  EXPECT_LT(relative_error(out.grad_b, Matrix((Matrix::Identity(6, 6) - b * b.transpose()) * g * a.transpose())),
            1e-12);
}

TEST(LoraPro, EquivalentGradientIgnoresX) {
  Rng rng(26);
  const LoraLayer layer = random_layer(rng, 7, 9, 3, 6.0);
  const Matrix g = rng.gaussian(7, 9);
  auto equivalent = [&](const Matrix& x) {
    const LoraProGrads p = lorapro_equiv_grad(g, layer, x, 1e-6);
    return Matrix(layer.scale() * (layer.b() * p.grad_a + p.grad_b * layer.a()));
  };
  EXPECT_LT(relative_error(equivalent(rng.gaussian(3, 3)), equivalent(Matrix::Zero(3, 3))), 1e-10);
}

TEST(LoraPro, ZeroB) {
  Rng rng(27);
  const Matrix a = rng.gaussian(2, 5);
  const LoraLayer layer(Matrix::Zero(4, 5), a, Matrix::Zero(4, 2), 4.0);
  const Matrix g = rng.gaussian(4, 5);
  const double lambda = 0.01;
  const LoraProGrads out = lorapro_equiv_grad(g, layer, Matrix::Zero(2, 2), lambda);
  EXPECT_EQ(out.grad_a.norm(), 0.0);
  const Matrix expected = g * a.transpose() * (a * a.transpose() + lambda * Matrix::Identity(2, 2)).inverse() / 2.0;
  EXPECT_LT(relative_error(out.grad_b, expected), 1e-12);
}

TEST(TrainConfig, ValidateRejectsOutOfRange) {
  TrainConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.beta1 = 1.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.eps = 0.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

TEST(TrainConfig, Defaults) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.beta1, 0.9);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(cfg.gamma, 0.0);
  EXPECT_EQ(cfg.lambda, 1e-6);
  EXPECT_EQ(cfg.order, UpdateOrder::BFirst);
  EXPECT_TRUE(cfg.bias_correction);
}

TEST(Schedule, CosineWithWarmup) {
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.steps = 100;
  cfg.schedule = Schedule::Cosine;
  cfg.warmup_ratio = 0.1;
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 0), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 9), 1.0);
  EXPECT_NEAR(learning_rate_at(cfg, 55), 0.5, 1e-12);
  EXPECT_NEAR(learning_rate_at(cfg, 100), 0.0, 1e-12);
  cfg.schedule = Schedule::Constant;
  EXPECT_EQ(learning_rate_at(cfg, 57), 1.0);
}

TEST(Names, RoundTrip) {
  for (OptimizerKind kind : {OptimizerKind::AltLora, OptimizerKind::AltLoraPlus, OptimizerKind::LoraSgd,
                             OptimizerKind::LoraAdam, OptimizerKind::LoraPlus, OptimizerKind::ScaledGdJoint}) {
    EXPECT_EQ(parse_optimizer(to_string(kind)), kind);
  }
  for (UpdateOrder order : {UpdateOrder::AFirst, UpdateOrder::BFirst, UpdateOrder::Joint}) {
    EXPECT_EQ(parse_order(to_string(order)), order);
  }
  EXPECT_THROW(parse_optimizer("sgd"), std::invalid_argument);
}

TEST(TrainStep, ReducesLossOnLinearTask) {
  Rng rng(28);
  Matrix base = rng.gaussian(10, 10, 0.3);
  const Matrix teacher = base + rng.gaussian(10, 2) * rng.gaussian(2, 10) * 0.3;
  ToyModel model = make_linear_model(make_layer(base, 2, 4.0, InitPolicy::Kaiming, InitPolicy::Zero, rng));
  const Matrix x = rng.gaussian(10, 40);
  const Dataset data{x, teacher * x};
  TrainConfig cfg;
  cfg.eta = 0.2;
  AltLoraState state = AltLoraState::create(OptimizerKind::AltLora, model.layer);
  const double initial = evaluate(model, data).loss;
  for (int t = 0; t < 400; ++t) {
    train_step(OptimizerKind::AltLora, model, state, data, cfg);
  }
  EXPECT_LT(evaluate(model, data).loss, 1e-3 * initial);
}

}  // namespace
}  // namespace altlora
