#include "hte/regions.hpp"

#include <cmath>

#include "hte/errors.hpp"

namespace hte {

std::int64_t RegionPartition::cells_per_axis() const {
  return static_cast<std::int64_t>(std::ceil(1.0 / cell_width - 1e-12));
}

CellIndex RegionPartition::cell_of(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const std::int64_t ncells = cells_per_axis();
  CellIndex idx(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) {
    auto i = static_cast<std::int64_t>(std::floor(x(j) / cell_width));
    // The domain's top face belongs to the last cell along each axis.
    if (i >= ncells) i = ncells - 1;
    if (i < 0) i = 0;
    idx[static_cast<std::size_t>(j)] = i;
  }
  return idx;
}

bool RegionPartition::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return active.find(cell_of(x)) != active.end();
}

RegionPartition initial_partition(int d, double h0) {
  if (d < 1 || !(h0 > 0.0) || h0 > 1.0) {
    throw InvalidInputError("initial_partition: need d >= 1 and h0 in (0, 1]");
  }
  RegionPartition r;
  r.dim = d;
  r.cell_width = h0;
  const std::int64_t ncells = r.cells_per_axis();
  CellIndex idx(static_cast<std::size_t>(d), 0);
  for (;;) {
    r.active.insert(idx);
    int j = 0;
    for (; j < d; ++j) {
      if (++idx[static_cast<std::size_t>(j)] < ncells) break;
      idx[static_cast<std::size_t>(j)] = 0;
    }
    if (j == d) break;
  }
  return r;
}

RegionPartition refine(const RegionPartition& r, double new_width) {
  if (!(new_width > 0.0) || new_width > r.cell_width * (1.0 + 1e-12)) {
    throw InvalidInputError("refine: new_width must lie in (0, cell_width]");
  }
  RegionPartition out;
  out.dim = r.dim;
  out.cell_width = new_width;
  const std::int64_t new_ncells = out.cells_per_axis();
  const double tol = 1e-9 * new_width;

  std::vector<std::vector<std::int64_t>> per_dim(static_cast<std::size_t>(r.dim));
  for (const CellIndex& cell : r.active) {
    for (int j = 0; j < r.dim; ++j) {
      auto& js = per_dim[static_cast<std::size_t>(j)];
      js.clear();
      const double lo = static_cast<double>(cell[static_cast<std::size_t>(j)]) * r.cell_width;
      const double hi =
          std::min((static_cast<double>(cell[static_cast<std::size_t>(j)]) + 1.0) * r.cell_width,
                   1.0);
      auto j_min = static_cast<std::int64_t>(std::floor(lo / new_width)) - 1;
      if (j_min < 0) j_min = 0;
      for (std::int64_t k = j_min; k < new_ncells; ++k) {
        const double klo = static_cast<double>(k) * new_width;
        if (klo >= hi - tol) break;
        const double khi = klo + new_width;
        if (std::min(khi, hi) - std::max(klo, lo) > tol) {
          js.push_back(k);
        }
      }
    }
    bool degenerate = false;
    for (const auto& js : per_dim) {
      if (js.empty()) degenerate = true;
    }
    if (degenerate) continue;  // cell lies outside the domain
    // Cartesian product of the per-dimension index lists.
    std::vector<std::size_t> pos(static_cast<std::size_t>(r.dim), 0);
    for (;;) {
      CellIndex idx(static_cast<std::size_t>(r.dim));
      for (int j = 0; j < r.dim; ++j) {
        idx[static_cast<std::size_t>(j)] =
            per_dim[static_cast<std::size_t>(j)][pos[static_cast<std::size_t>(j)]];
      }
      out.active.insert(std::move(idx));
      int j = 0;
      for (; j < r.dim; ++j) {
        if (++pos[static_cast<std::size_t>(j)] < per_dim[static_cast<std::size_t>(j)].size()) break;
        pos[static_cast<std::size_t>(j)] = 0;
      }
      if (j == r.dim) break;
    }
  }
  return out;
}

std::vector<char> membership_mask(const RegionPartition& r, const Eigen::MatrixXd& xs) {
  std::vector<char> mask(static_cast<std::size_t>(xs.rows()), 0);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    mask[static_cast<std::size_t>(i)] = r.contains(xs.row(i).transpose()) ? 1 : 0;
  }
  return mask;
}

}  // namespace hte
