#include "hte/rotation.hpp"

#include <cmath>

#include "hte/errors.hpp"

namespace hte {

Eigen::MatrixXd gaussian_matrix(int d, RngStream& rng) {
  if (d < 1) {
    throw InvalidInputError("gaussian_matrix: dimension must be >= 1");
  }
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      m(i, j) = rng.next_gaussian();
    }
  }
  return m;
}

QrResult householder_qr(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) {
    throw InvalidInputError("householder_qr: matrix has non-finite entries");
  }
  const int d = static_cast<int>(m.rows());
  Eigen::MatrixXd w = m;
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(d, d);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd x = w.col(k).tail(d - k);
    const double norm = x.norm();
    if (norm == 0.0) {
      throw DegenerateMatrixError("householder_qr: zero pivot column");
    }
    // Reflect onto -sign(x0) * norm * e1 for numerical stability.
    Eigen::VectorXd v = x;
    v(0) += (x(0) >= 0.0 ? norm : -norm);
    const double vnorm2 = v.squaredNorm();
    if (vnorm2 > 0.0) {
      const double beta = 2.0 / vnorm2;
      w.bottomRightCorner(d - k, d - k).noalias() -=
          beta * v * (v.transpose() * w.bottomRightCorner(d - k, d - k));
      q.rightCols(d - k).noalias() -= beta * (q.rightCols(d - k) * v) * v.transpose();
    }
    // Zero the subdiagonal explicitly; the reflection leaves roundoff there.
    for (int i = k + 1; i < d; ++i) {
      w(i, k) = 0.0;
    }
  }
  // Sign-normalize so diag(W) >= 0.
  for (int k = 0; k < d; ++k) {
    if (w(k, k) < 0.0) {
      w.row(k) = -w.row(k);
      q.col(k) = -q.col(k);
    }
  }
  for (int k = 0; k < d; ++k) {
    if (w(k, k) == 0.0) {
      throw DegenerateMatrixError("householder_qr: zero diagonal in W");
    }
  }
  return {std::move(q), std::move(w)};
}

Eigen::MatrixXd sample_rotation(int d, RngStream& rng) {
  if (d < 1) {
    throw InvalidInputError("sample_rotation: dimension must be >= 1");
  }
  constexpr int kMaxRetries = 16;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Eigen::MatrixXd g = gaussian_matrix(d, rng);
    try {
      Eigen::MatrixXd q = householder_qr(g).q;
      if (q.determinant() < 0.0) {
        q.col(0) = -q.col(0);
      }
      return q;
    } catch (const DegenerateMatrixError&) {
      // Probability-zero event; draw a fresh Gaussian matrix.
    }
  }
  throw RngDegeneracyError("sample_rotation: retry cap exceeded");
}

}  // namespace hte
