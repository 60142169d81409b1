#include "hte/base_learners.hpp"

#include <numeric>

#include "hte/errors.hpp"

namespace hte {

namespace {

// Kahan-compensated accumulator so cell means do not depend on summation order
// noise across platforms.
struct CellAccum {
  double sum = 0.0;
  double comp = 0.0;
  std::int64_t count = 0;

  void add(double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
};

std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

HTRegressor fit_ht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                   const HistogramTransform& t, double clip_bound) {
  return fit_ht(xs, ys, t, clip_bound, all_rows(xs.rows()));
}

HTRegressor fit_ht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                   const HistogramTransform& t, double clip_bound,
                   const std::vector<int>& rows) {
  if (rows.empty() || xs.rows() == 0) {
    throw InvalidInputError("fit_ht: empty dataset");
  }
  if (clip_bound < 0.0) {
    throw InvalidInputError("fit_ht: clip_bound must be nonnegative");
  }
  HTRegressor m;
  m.transform = t;
  m.clip_bound = clip_bound;
  std::unordered_map<BinKey, CellAccum, BinKeyHash> accum;
  accum.reserve(rows.size());
  for (int r : rows) {
    accum[bin_key(t, xs.row(r).transpose())].add(ys(r));
  }
  m.values.reserve(accum.size());
  for (const auto& [key, acc] : accum) {
    m.values.emplace(key, clip_to(acc.mean(), clip_bound));
  }
  return m;
}

double predict_ht(const HTRegressor& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto it = m.values.find(bin_key(m.transform, x));
  return it == m.values.end() ? m.default_value : it->second;
}

int BinaryPartition::leaf_id(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  int node = 0;
  for (int level = 0; level < depth; ++level) {
    const BinarySplit& s = nodes[static_cast<std::size_t>(node)];
    node = 2 * node + (x(s.coord) < s.threshold ? 1 : 2);
  }
  return node - (num_leaves() - 1);
}

namespace {

void build_subtree(BinaryPartition& p, int node, int level,
                   Eigen::VectorXd& lo, Eigen::VectorXd& hi, RngStream& rng,
                   bool midpoint) {
  if (level == p.depth) {
    return;
  }
  const int coord = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(p.dim)));
  double threshold;
  if (midpoint) {
    threshold = 0.5 * (lo(coord) + hi(coord));
  } else {
    // Uniform strictly inside the cell extent; a draw of exactly 0 would put
    // the threshold on the cell face, so nudge it off.
    double u = rng.next_uniform();
    if (u == 0.0) u = 0.5;
    threshold = lo(coord) + u * (hi(coord) - lo(coord));
  }
  p.nodes[static_cast<std::size_t>(node)] = {coord, threshold};

  const double saved_hi = hi(coord);
  hi(coord) = threshold;
  build_subtree(p, 2 * node + 1, level + 1, lo, hi, rng, midpoint);
  hi(coord) = saved_hi;

  const double saved_lo = lo(coord);
  lo(coord) = threshold;
  build_subtree(p, 2 * node + 2, level + 1, lo, hi, rng, midpoint);
  lo(coord) = saved_lo;
}

BinaryPartition sample_partition_impl(int d, int depth, RngStream& rng, bool midpoint) {
  if (d < 1 || depth < 0) {
    throw InvalidInputError("sample_binary_partition: need d >= 1, depth >= 0");
  }
  BinaryPartition p;
  p.dim = d;
  p.depth = depth;
  p.nodes.resize(static_cast<std::size_t>((1 << depth) - 1));
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd hi = Eigen::VectorXd::Ones(d);
  build_subtree(p, 0, 0, lo, hi, rng, midpoint);
  return p;
}

}  // namespace

BinaryPartition sample_binary_partition(int d, int depth, RngStream& rng) {
  return sample_partition_impl(d, depth, rng, /*midpoint=*/false);
}

BinaryPartition sample_binary_partition_midpoint(int d, int depth, RngStream& rng) {
  return sample_partition_impl(d, depth, rng, /*midpoint=*/true);
}

BinaryHistRegressor fit_binary(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                               const BinaryPartition& partition, double clip_bound) {
  return fit_binary(xs, ys, partition, clip_bound, all_rows(xs.rows()));
}

BinaryHistRegressor fit_binary(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                               const BinaryPartition& partition, double clip_bound,
                               const std::vector<int>& rows) {
  if (rows.empty() || xs.rows() == 0) {
    throw InvalidInputError("fit_binary: empty dataset");
  }
  if (clip_bound < 0.0) {
    throw InvalidInputError("fit_binary: clip_bound must be nonnegative");
  }
  BinaryHistRegressor m;
  m.partition = partition;
  m.clip_bound = clip_bound;
  const int leaves = partition.num_leaves();
  std::vector<CellAccum> accum(static_cast<std::size_t>(leaves));
  for (int r : rows) {
    accum[static_cast<std::size_t>(partition.leaf_id(xs.row(r).transpose()))].add(ys(r));
  }
  m.values.assign(static_cast<std::size_t>(leaves), 0.0);
  m.occupied.assign(static_cast<std::size_t>(leaves), 0);
  for (int j = 0; j < leaves; ++j) {
    if (accum[static_cast<std::size_t>(j)].count > 0) {
      m.values[static_cast<std::size_t>(j)] =
          clip_to(accum[static_cast<std::size_t>(j)].mean(), clip_bound);
      m.occupied[static_cast<std::size_t>(j)] = 1;
    }
  }
  return m;
}

double predict_binary(const BinaryHistRegressor& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto leaf = static_cast<std::size_t>(m.partition.leaf_id(x));
  return m.occupied[leaf] ? m.values[leaf] : m.default_value;
}

}  // namespace hte
