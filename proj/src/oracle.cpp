// SPDX-License-Identifier: Apache-2.0
#include "altlora/oracle.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <utility>

namespace altlora {

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::LeftFactor: return "left_factor";
    case Objective::RightFactor: return "right_factor";
    case Objective::MomentumB: return "momentum_b";
    case Objective::MomentumA: return "momentum_a";
  }
  return "unknown";
}

namespace {

/// Solves n·x = rhs (all columns) by Gaussian elimination with partial pivoting.
Matrix gaussian_elimination(Matrix n, Matrix rhs) {
  const Index size = n.rows();
  double scale = 0.0;
  for (Index i = 0; i < size; ++i) {
    scale = std::max(scale, std::abs(n(i, i)));
  }
  for (Index col = 0; col < size; ++col) {
    Index pivot = col;
    for (Index row = col + 1; row < size; ++row) {
      if (std::abs(n(row, col)) > std::abs(n(pivot, col))) {
        pivot = row;
      }
    }
    if (!(std::abs(n(pivot, col)) > 1e-12 * scale)) {
      throw SingularSystem("least-squares oracle: normal matrix is rank deficient");
    }
    if (pivot != col) {
      n.row(pivot).swap(n.row(col));
      rhs.row(pivot).swap(rhs.row(col));
    }
    for (Index row = col + 1; row < size; ++row) {
      const double factor = n(row, col) / n(col, col);
      if (factor == 0.0) {
        continue;
      }
      for (Index j = col; j < size; ++j) {
        n(row, j) -= factor * n(col, j);
      }
      for (Index j = 0; j < rhs.cols(); ++j) {
        rhs(row, j) -= factor * rhs(col, j);
      }
    }
  }
  Matrix x(size, rhs.cols());
  for (Index j = 0; j < rhs.cols(); ++j) {
    for (Index row = size - 1; row >= 0; --row) {
      double acc = rhs(row, j);
      for (Index k = row + 1; k < size; ++k) {
        acc -= n(row, k) * x(k, j);
      }
      x(row, j) = acc / n(row, row);
    }
  }
  return x;
}

}  // namespace

Matrix lstsq_columns(const Matrix& design, const Matrix& target) {
  if (design.rows() != target.rows()) {
    throw ShapeMismatch("lstsq_columns: design and target row counts differ");
  }
  const Index m = design.rows();
  const Index unknowns = design.cols();
  Matrix normal = Matrix::Zero(unknowns, unknowns);
  for (Index p = 0; p < unknowns; ++p) {
    for (Index q = 0; q < unknowns; ++q) {
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) {
        acc += design(i, p) * design(i, q);
      }
      normal(p, q) = acc;
    }
  }
  Matrix rhs = Matrix::Zero(unknowns, target.cols());
  for (Index j = 0; j < target.cols(); ++j) {
    for (Index p = 0; p < unknowns; ++p) {
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) {
        acc += design(i, p) * target(i, j);
      }
      rhs(p, j) = acc;
    }
  }
  return gaussian_elimination(std::move(normal), std::move(rhs));
}

Matrix lstsq_left_factor(const Matrix& b, const Matrix& g, double s) {
  return lstsq_columns(s * b, g);
}

Matrix lstsq_right_factor(const Matrix& a, const Matrix& g, double s) {
  // ‖s·Z·A − G‖ = ‖s·Aᵀ·Zᵀ − Gᵀ‖
  return lstsq_columns(s * a.transpose(), g.transpose()).transpose();
}

Matrix lstsq_momentum_b(const Matrix& mb, const Matrix& a_old, const Matrix& a_new) {
  const Matrix target = mb * a_old;
  return lstsq_columns(a_new.transpose(), target.transpose()).transpose();
}

Matrix lstsq_momentum_a(const Matrix& ma, const Matrix& b_old, const Matrix& b_new) {
  return lstsq_columns(b_new, b_old * ma);
}

Matrix equivalent_update(const LoraLayer& before, const LoraLayer& after) {
  if (before.rows() != after.rows() || before.cols() != after.cols() ||
      before.rank() != after.rank()) {
    throw ShapeMismatch("equivalent_update: layer shapes differ");
  }
  return merged_weight(after) - merged_weight(before);
}

Matrix cross_term_formula(const LoraLayer& layer, const Matrix& g, double eta, double lambda) {
  const Matrix& a = layer.a();
  const Matrix& b = layer.b();
  return (eta * eta / layer.scale()) *
         (g * a.transpose() * damped_gram_inverse(a, Side::Right, lambda) *
          damped_gram_inverse(b, Side::Left, lambda) * b.transpose() * g);
}

DecompositionReport decompose_pair_step(const LoraLayer& layer, const Matrix& g_t,
                                        const Matrix& g_half, const TrainConfig& cfg) {
  if (cfg.beta1 != 0.0 || cfg.gamma != 0.0) {
    throw PreconditionViolated("decompose_pair_step requires beta1 = 0 and gamma = 0");
  }
  TrainConfig alt_cfg = cfg;
  alt_cfg.order = UpdateOrder::AFirst;

  LoraLayer alt = layer;
  AltLoraState alt_state = AltLoraState::create(OptimizerKind::AltLora, alt);
  altlora_step(alt, alt_state, g_t, alt_cfg);
  const Matrix a_plus = alt.a();
  altlora_step(alt, alt_state, g_half, alt_cfg);

  LoraLayer joint = layer;
  AltLoraState joint_state = AltLoraState::create(OptimizerKind::ScaledGdJoint, joint);
  baseline_step(OptimizerKind::ScaledGdJoint, joint, joint_state, g_t, cfg);

  DecompositionReport report;
  report.alternating_update = equivalent_update(layer, alt);
  report.joint_update = equivalent_update(layer, joint);
  report.projected_col_term = -cfg.eta * (projector(layer.b(), Space::ColumnSpace, cfg.lambda) * g_t);
  report.projected_row_term = -cfg.eta * (g_half * projector(a_plus, Space::RowSpace, cfg.lambda));
  report.residual_norm =
      (report.alternating_update - report.projected_col_term - report.projected_row_term).norm();
  const Matrix joint_row_term = -cfg.eta * (g_t * projector(layer.a(), Space::RowSpace, cfg.lambda));
  report.cross_term = report.joint_update - report.projected_col_term - joint_row_term;
  report.predicted_cross_term = cross_term_formula(layer, g_t, cfg.eta, cfg.lambda);
  return report;
}

GaugeCheck projector_gauge_check(const Matrix& a1, const Matrix& b1, const Matrix& a2,
                                 const Matrix& b2, double tol) {
  if (relative_error(b2 * a2, b1 * a1) > 1e-10) {
    throw PreconditionViolated("projector_gauge_check: B1·A1 and B2·A2 differ");
  }
  const double col = relative_error(projector(b2, Space::ColumnSpace, 0.0),
                                    projector(b1, Space::ColumnSpace, 0.0));
  const double row =
      relative_error(projector(a2, Space::RowSpace, 0.0), projector(a1, Space::RowSpace, 0.0));
  GaugeCheck check;
  check.deviation = std::max(col, row);
  check.passed = check.deviation < tol;
  return check;
}

namespace {

Matrix gauge_left(const Matrix& m, const Eigen::PartialPivLU<Matrix>& lu) {
  return m.size() == 0 ? m : Matrix(lu.solve(m));
}

Matrix gauge_right(const Matrix& m, const Matrix& gauge) {
  return m.size() == 0 ? m : Matrix(m * gauge);
}

}  // namespace

LoraLayer apply_gauge(const LoraLayer& layer, const Matrix& gauge) {
  require_shape(gauge, layer.rank(), layer.rank(), "apply_gauge R");
  const Eigen::PartialPivLU<Matrix> lu(gauge);
  return LoraLayer(layer.base(), lu.solve(layer.a()), layer.b() * gauge, layer.alpha());
}

AltLoraState apply_gauge(const AltLoraState& state, const Matrix& gauge) {
  const Eigen::PartialPivLU<Matrix> lu(gauge);
  AltLoraState out = state;
  out.ma = gauge_left(state.ma, lu);
  out.prev_a = gauge_left(state.prev_a, lu);
  out.mb = gauge_right(state.mb, gauge);
  out.prev_b = gauge_right(state.prev_b, gauge);
  return out;
}

InvarianceReport trajectory_invariance_check(const ToyModel& model, const Dataset& data,
                                             const TrainConfig& cfg, const Matrix& gauge,
                                             int steps, double tol, OptimizerKind kind,
                                             const std::optional<AltLoraState>& initial) {
  ToyModel first = model;
  ToyModel second = model;
  second.layer = apply_gauge(model.layer, gauge);
  AltLoraState first_state = initial ? *initial : AltLoraState::create(kind, first.layer);
  AltLoraState second_state = apply_gauge(first_state, gauge);

  InvarianceReport report;
  auto record = [&] {
    const Matrix w1 = merged_weight(first.layer);
    const double dev = relative_error(merged_weight(second.layer), w1);
    report.deviations.push_back(dev);
    // NaN compares false, so propagate it explicitly.
    if (std::isnan(dev) || dev > report.max_deviation || std::isnan(report.max_deviation)) {
      report.max_deviation = dev;
    }
  };
  record();
  for (int t = 0; t < steps; ++t) {
    train_step(kind, first, first_state, data, cfg);
    train_step(kind, second, second_state, data, cfg);
    record();
  }
  report.passed = report.max_deviation <= tol;
  return report;
}

}  // namespace altlora
