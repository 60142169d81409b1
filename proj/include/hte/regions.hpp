#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "hte/transform.hpp"  // BinKeyHash doubles as the cell-index hash

namespace hte {

/// Cell index of the axis-aligned grid anchored at 0, nonnegative components.
using CellIndex = std::vector<std::int64_t>;

/// Axis-aligned grid over [0,1]^d with a sparse set of active cells. Cells are
/// half-open boxes [i*w, (i+1)*w), truncated at the domain boundary; the top
/// face of the domain belongs to the last cell so [0,1]^d is covered exactly.
struct RegionPartition {
  double cell_width = 1.0;
  int dim = 1;
  std::unordered_set<CellIndex, BinKeyHash> active;

  std::int64_t cells_per_axis() const;
  bool empty() const { return active.empty(); }

  /// Index of the grid cell containing x (independent of the active set).
  CellIndex cell_of(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// True iff x lies in an active cell.
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Grid of width h0 with every cell active (boundary cells truncated to the
/// domain).
RegionPartition initial_partition(int d, double h0);

/// Active cells of width new_width whose point sets meet r's point set. When
/// new_width divides cell_width the cover is exact; otherwise it is the
/// minimal superset of new-grid cells intersecting r (at most one cell ring
/// of expansion).
RegionPartition refine(const RegionPartition& r, double new_width);

std::vector<char> membership_mask(const RegionPartition& r, const Eigen::MatrixXd& xs);

}  // namespace hte
