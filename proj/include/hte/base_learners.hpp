#pragma once

#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "hte/rng.hpp"
#include "hte/transform.hpp"

namespace hte {

/// Piecewise-constant regressor on the random grid induced by a histogram
/// transform: each nonempty cell predicts the clipped mean of its training
/// targets, empty cells predict default_value. Only nonempty bins are stored;
/// the number of nonempty bins is at most n while the full grid can be
/// astronomically larger.
struct HTRegressor {
  HistogramTransform transform;
  std::unordered_map<BinKey, double, BinKeyHash> values;
  double clip_bound = 1.0;     // M; stored values lie in [-M, M]
  double default_value = 0.0;  // prediction for empty bins
};

HTRegressor fit_ht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                   const HistogramTransform& t, double clip_bound);

/// Fit restricted to the given rows of xs/ys.
HTRegressor fit_ht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                   const HistogramTransform& t, double clip_bound,
                   const std::vector<int>& rows);

double predict_ht(const HTRegressor& m, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Node of a purely random binary partition: split coordinate and threshold.
struct BinarySplit {
  int coord = 0;
  double threshold = 0.5;
};

/// Complete random binary tree of depth p over [0,1]^d. Leaves tile the cube
/// exactly; leaf ids are 0 .. 2^p - 1 in left-to-right order. Nodes are stored
/// in heap order (root at 0).
struct BinaryPartition {
  int dim = 1;
  int depth = 0;
  std::vector<BinarySplit> nodes;  // size 2^depth - 1

  int num_leaves() const { return 1 << depth; }
  int leaf_id(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Split coordinate uniform on {0..d-1}, threshold uniform within the cell's
/// extent along that coordinate.
BinaryPartition sample_binary_partition(int d, int depth, RngStream& rng);

/// Variant with midpoint thresholds instead of random ones; the split rule is
/// configurable because the construction admits both readings.
BinaryPartition sample_binary_partition_midpoint(int d, int depth, RngStream& rng);

struct BinaryHistRegressor {
  BinaryPartition partition;
  std::vector<double> values;   // per leaf id, clipped cell means
  std::vector<char> occupied;   // leaves that saw training data
  double clip_bound = 1.0;
  double default_value = 0.0;
};

BinaryHistRegressor fit_binary(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                               const BinaryPartition& partition, double clip_bound);

BinaryHistRegressor fit_binary(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                               const BinaryPartition& partition, double clip_bound,
                               const std::vector<int>& rows);

double predict_binary(const BinaryHistRegressor& m, const Eigen::Ref<const Eigen::VectorXd>& x);

inline double clip_to(double v, double bound) {
  if (v > bound) return bound;
  if (v < -bound) return -bound;
  return v;
}

}  // namespace hte
