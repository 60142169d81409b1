#pragma once

#include <Eigen/Dense>

#include "hte/rng.hpp"

namespace hte {

/// d x d matrix of i.i.d. standard normal entries drawn from the stream.
Eigen::MatrixXd gaussian_matrix(int d, RngStream& rng);

struct QrResult {
  Eigen::MatrixXd q;  // orthogonal
  Eigen::MatrixXd w;  // upper triangular, nonnegative diagonal
};

/// Householder QR with the sign convention that diag(W) is positive whenever
/// the corresponding column is nonzero. Throws DegenerateMatrixError on an
/// exactly zero pivot; callers resample.
QrResult householder_qr(const Eigen::MatrixXd& m);

/// Uniformly distributed rotation (orthogonal, det = +1): QR of a Gaussian
/// matrix, first column negated if det(Q) < 0. Resamples on degeneracy, up
/// to a cap of 16 draws.
Eigen::MatrixXd sample_rotation(int d, RngStream& rng);

}  // namespace hte
