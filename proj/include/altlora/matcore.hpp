// SPDX-License-Identifier: Apache-2.0
//
// Small dense kernels shared by the adapter, optimizer and oracle modules:
// damped Gram inverses, subspace projectors, seeded sampling and the text
// format used by golden-file fixtures.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string_view>

#include "altlora/errors.hpp"

namespace altlora {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Matrix = MatrixX<double>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Ridge term added to every Gram matrix unless the caller overrides it.
inline constexpr double kDefaultDamping = 1e-6;
/// Undamped factorizations fail when a pivot drops below this times the trace.
inline constexpr double kPivotThreshold = 1e-12;

enum class Side { Left, Right };
enum class Space { ColumnSpace, RowSpace };

/// MᵀM for Side::Left, MMᵀ for Side::Right.
template <typename Derived>
MatrixX<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& m, Side side) {
  if (side == Side::Left) {
    return m.transpose() * m;
  }
  return m * m.transpose();
}

/// Inverse of a symmetric positive definite matrix through an LLᵀ factorization.
///
/// With `undamped` set the factorization is rejected when the smallest pivot
/// falls below kPivotThreshold times the trace, which catches numerically
/// rank-deficient Gram matrices that LLᵀ would otherwise accept.
template <typename Scalar>
MatrixX<Scalar> spd_inverse(const MatrixX<Scalar>& spd, bool undamped) {
  const Eigen::LLT<MatrixX<Scalar>> llt(spd);
  if (llt.info() != Eigen::Success) {
    throw SingularGram("Gram matrix is not positive definite; use a positive damping");
  }
  if (undamped) {
    const Scalar min_pivot = llt.matrixLLT().diagonal().array().square().minCoeff();
    if (!(min_pivot > Scalar(kPivotThreshold) * spd.trace())) {
      throw SingularGram("Gram matrix pivot below threshold; use a positive damping");
    }
  }
  MatrixX<Scalar> inv = llt.solve(MatrixX<Scalar>::Identity(spd.rows(), spd.cols()));
  return (inv + inv.transpose()) / Scalar(2);
}

/// (MᵀM + λI)⁻¹ for Side::Left, (MMᵀ + λI)⁻¹ for Side::Right.
template <typename Derived>
MatrixX<typename Derived::Scalar> damped_gram_inverse(const Eigen::MatrixBase<Derived>& m, Side side,
                                                      typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (!(lambda >= Scalar(0))) {
    throw std::invalid_argument("damping must be non-negative");
  }
  MatrixX<Scalar> g = gram(m, side);
  g.diagonal().array() += lambda;
  return spd_inverse<Scalar>(g, lambda == Scalar(0));
}

/// Orthogonal projector onto the column space (k×k, M is k×r) or the row
/// space (d×d, M is r×d) of M, with the Gram matrix damped by λ.
template <typename Derived>
MatrixX<typename Derived::Scalar> projector(const Eigen::MatrixBase<Derived>& m, Space space,
                                            typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> p;
  if (space == Space::ColumnSpace) {
    p = m * damped_gram_inverse(m, Side::Left, lambda) * m.transpose();
  } else {
    p = m.transpose() * damped_gram_inverse(m, Side::Right, lambda) * m;
  }
  return (p + p.transpose()) / Scalar(2);
}

/// ‖a − b‖_F / ‖b‖_F, falling back to the absolute error when b = 0.
template <typename DerivedA, typename DerivedB>
double relative_error(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double diff = (a - b).norm();
  const double ref = b.norm();
  return ref > 0.0 ? diff / ref : diff;
}

inline void require_shape(const Matrix& m, Index rows, Index cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()));
  }
}

/// Seeded generator used everywhere randomness enters the library.
///
/// The bit stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Uniform doubles take the top 53 bits of one draw; Gaussian
/// variates come from the Box–Muller transform of two uniforms (both outputs
/// of a pair are used). Matrices are filled in row-major order. Together this
/// makes every seeded quantity identical across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian();

  Matrix gaussian(Index rows, Index cols, double stddev = 1.0);
  Matrix uniform(Index rows, Index cols, double lo, double hi);
  /// ±1 entries with equal probability.
  Matrix rademacher(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Haar-distributed n×n orthogonal matrix (QR of a Gaussian with sign fix).
Matrix random_orthogonal(Index n, Rng& rng);
/// rows×cols matrix with orthonormal columns (rows ≥ cols).
Matrix random_orthonormal_columns(Index rows, Index cols, Rng& rng);

/// Invertible r×r gauge R = Q·diag(σ)·Q'ᵀ with log-uniform σ in
/// [1/√cond_max, √cond_max], so cond(R) ≤ cond_max. Deterministic per seed.
Matrix gauge_sample(Index r, double cond_max, std::uint64_t seed);

/// Row-major text: one row per line, entries space separated, 17 significant digits.
void write_matrix(std::ostream& out, const Matrix& m);
/// Inverse of write_matrix. Rejects ragged rows and non-finite entries.
Matrix read_matrix(std::istream& in);

}  // namespace altlora
