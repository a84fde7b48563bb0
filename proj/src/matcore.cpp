// SPDX-License-Identifier: Apache-2.0
#include "altlora/matcore.hpp"

#include <Eigen/QR>

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace altlora {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  // 1 - u lies in (0, 1], so the logarithm is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

Matrix Rng::gaussian(Index rows, Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = stddev * gaussian();
    }
  }
  return m;
}

Matrix Rng::uniform(Index rows, Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = uniform(lo, hi);
    }
  }
  return m;
}

Matrix Rng::rademacher(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = (engine_() >> 63) != 0 ? 1.0 : -1.0;
    }
  }
  return m;
}

Matrix random_orthonormal_columns(Index rows, Index cols, Rng& rng) {
  if (cols > rows) {
    throw std::invalid_argument("random_orthonormal_columns: cols exceeds rows");
  }
  const Matrix g = rng.gaussian(rows, cols);
  const Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Fix signs so the distribution is Haar and the result is unique per draw.
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) {
      q.col(j) *= -1.0;
    }
  }
  return q;
}

Matrix random_orthogonal(Index n, Rng& rng) {
  return random_orthonormal_columns(n, n, rng);
}

Matrix gauge_sample(Index r, double cond_max, std::uint64_t seed) {
  if (r < 1) {
    throw std::invalid_argument("gauge_sample: rank must be positive");
  }
  if (!(cond_max >= 1.0)) {
    throw std::invalid_argument("gauge_sample: cond_max must be >= 1");
  }
  Rng rng(seed);
  const Matrix left = random_orthogonal(r, rng);
  const Matrix right = random_orthogonal(r, rng);
  const double log_span = std::log(cond_max);
  Vector sigma(r);
  for (Index i = 0; i < r; ++i) {
    sigma(i) = std::exp((rng.uniform() - 0.5) * log_span);
  }
  return left * sigma.asDiagonal() * right.transpose();
}

void write_matrix(std::ostream& out, const Matrix& m) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) {
        out << ' ';
      }
      out << m(i, j);
    }
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(token, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("read_matrix: bad entry '" + token + "'");
      }
      if (used != token.size() || !std::isfinite(value)) {
        throw std::invalid_argument("read_matrix: bad entry '" + token + "'");
      }
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ShapeMismatch("read_matrix: ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::invalid_argument("read_matrix: empty input");
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

}  // namespace altlora
