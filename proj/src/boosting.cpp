#include "hte/boosting.hpp"

#include <algorithm>
#include <numeric>

#include "hte/transform.hpp"

namespace hte {

namespace {

std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Fit one HT learner against residuals aligned with `rows`, returning the
// learner and its predictions on those rows (cell keys are computed once).
std::pair<HTRegressor, Eigen::VectorXd> fit_ht_resid(const Eigen::MatrixXd& xs,
                                                     const Eigen::VectorXd& resid,
                                                     const std::vector<int>& rows,
                                                     const HistogramTransform& t,
                                                     double clip_bound) {
  struct Accum {
    double sum = 0.0, comp = 0.0;
    std::int64_t count = 0;
  };
  std::unordered_map<BinKey, Accum, BinKeyHash> accum;
  accum.reserve(rows.size());
  std::vector<BinKey> row_keys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    row_keys[i] = bin_key(t, xs.row(rows[i]).transpose());
    Accum& a = accum[row_keys[i]];
    const double v = resid(static_cast<Eigen::Index>(i));
    const double y = v - a.comp;
    const double s = a.sum + y;
    a.comp = (s - a.sum) - y;
    a.sum = s;
    ++a.count;
  }
  HTRegressor m;
  m.transform = t;
  m.clip_bound = clip_bound;
  m.values.reserve(accum.size());
  for (const auto& [key, a] : accum) {
    m.values.emplace(key, clip_to(a.sum / static_cast<double>(a.count), clip_bound));
  }
  Eigen::VectorXd preds(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    preds(static_cast<Eigen::Index>(i)) = m.values.at(row_keys[i]);
  }
  return {std::move(m), std::move(preds)};
}

std::pair<BinaryHistRegressor, Eigen::VectorXd> fit_binary_resid(const Eigen::MatrixXd& xs,
                                                                 const Eigen::VectorXd& resid,
                                                                 const std::vector<int>& rows,
                                                                 const BinaryPartition& part,
                                                                 double clip_bound) {
  struct Accum {
    double sum = 0.0, comp = 0.0;
    std::int64_t count = 0;
  };
  std::vector<Accum> accum(static_cast<std::size_t>(part.num_leaves()));
  std::vector<int> leaves(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    leaves[i] = part.leaf_id(xs.row(rows[i]).transpose());
    Accum& a = accum[static_cast<std::size_t>(leaves[i])];
    const double v = resid(static_cast<Eigen::Index>(i));
    const double y = v - a.comp;
    const double s = a.sum + y;
    a.comp = (s - a.sum) - y;
    a.sum = s;
    ++a.count;
  }
  BinaryHistRegressor m;
  m.partition = part;
  m.clip_bound = clip_bound;
  m.values.assign(accum.size(), 0.0);
  m.occupied.assign(accum.size(), 0);
  for (std::size_t j = 0; j < accum.size(); ++j) {
    if (accum[j].count > 0) {
      m.values[j] = clip_to(accum[j].sum / static_cast<double>(accum[j].count), clip_bound);
      m.occupied[j] = 1;
    }
  }
  Eigen::VectorXd preds(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto leaf = static_cast<std::size_t>(leaves[i]);
    preds(static_cast<Eigen::Index>(i)) = m.occupied[leaf] ? m.values[leaf] : m.default_value;
  }
  return {std::move(m), std::move(preds)};
}

}  // namespace

std::pair<BHTModel, Eigen::VectorXd> fit_bht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                                             double bin_width, const BoostConfig& cfg,
                                             RngStream rng) {
  return fit_bht(xs, ys, bin_width, cfg, rng, all_rows(xs.rows()));
}

std::pair<BHTModel, Eigen::VectorXd> fit_bht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                                             double bin_width, const BoostConfig& cfg,
                                             RngStream rng, const std::vector<int>& rows) {
  if (!(bin_width > 0.0)) {
    throw InvalidInputError("fit_bht: bin_width must be positive");
  }
  const int d = static_cast<int>(xs.cols());
  auto fitter = [&](const Eigen::VectorXd& resid, int) {
    const HistogramTransform t = sample_transform(bin_width, d, rng);
    return fit_ht_resid(xs, resid, rows, t, cfg.clip_bound);
  };
  auto result = fit_boosted<HTRegressor>(ys, rows, cfg, fitter, [](int, const HTRegressor&) {});
  return {std::move(result.model), std::move(result.residuals)};
}

std::pair<BinaryBHTModel, Eigen::VectorXd> fit_bht_binary(const Eigen::MatrixXd& xs,
                                                          const Eigen::VectorXd& ys, int depth,
                                                          const BoostConfig& cfg, RngStream rng) {
  return fit_bht_binary(xs, ys, depth, cfg, rng, all_rows(xs.rows()));
}

std::pair<BinaryBHTModel, Eigen::VectorXd> fit_bht_binary(const Eigen::MatrixXd& xs,
                                                          const Eigen::VectorXd& ys, int depth,
                                                          const BoostConfig& cfg, RngStream rng,
                                                          const std::vector<int>& rows) {
  if (depth < 0) {
    throw InvalidInputError("fit_bht_binary: depth must be >= 0");
  }
  const int d = static_cast<int>(xs.cols());
  auto fitter = [&](const Eigen::VectorXd& resid, int) {
    const BinaryPartition part = sample_binary_partition(d, depth, rng);
    return fit_binary_resid(xs, resid, rows, part, cfg.clip_bound);
  };
  auto result =
      fit_boosted<BinaryHistRegressor>(ys, rows, cfg, fitter, [](int, const BinaryHistRegressor&) {});
  return {std::move(result.model), std::move(result.residuals)};
}

namespace {

template <class Learner, class Fitter>
BoostSnapshots<Learner> snapshots_impl(const Eigen::VectorXd& ys, const std::vector<int>& rows,
                                       const Eigen::MatrixXd& heldout_xs,
                                       const std::vector<int>& heldout_rows, double learning_rate,
                                       const std::vector<int>& t_values, double clip_bound,
                                       int max_rejects, Fitter&& fitter) {
  BoostSnapshots<Learner> snaps;
  snaps.t_values = t_values;
  std::sort(snaps.t_values.begin(), snaps.t_values.end());
  snaps.t_values.erase(std::unique(snaps.t_values.begin(), snaps.t_values.end()),
                       snaps.t_values.end());

  BoostConfig cfg;
  cfg.learning_rate = learning_rate;
  cfg.max_iters = snaps.t_values.back();
  cfg.clip_bound = clip_bound;
  cfg.max_rejects = max_rejects;

  Eigen::VectorXd heldout_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(heldout_rows.size()));
  std::size_t next_snap = 0;
  double last_mse = 0.0;
  {
    double s = 0.0;
    for (int r : rows) s += ys(r) * ys(r);
    last_mse = s / static_cast<double>(rows.size());
  }

  auto on_accept = [&](int accepted, const Learner& learner) {
    for (std::size_t i = 0; i < heldout_rows.size(); ++i) {
      heldout_sum(static_cast<Eigen::Index>(i)) +=
          predict_base(learner, heldout_xs.row(heldout_rows[i]).transpose());
    }
    while (next_snap < snaps.t_values.size() && accepted == snaps.t_values[next_snap]) {
      snaps.learners_at.push_back(accepted);
      snaps.heldout_preds.push_back(learning_rate * heldout_sum);
      ++next_snap;
    }
  };

  auto result = fit_boosted<Learner>(ys, rows, cfg, fitter, on_accept);
  // A run that ended early (truncation) fills the remaining snapshots with its
  // final state.
  while (next_snap < snaps.t_values.size()) {
    snaps.learners_at.push_back(static_cast<int>(result.model.learners.size()));
    snaps.heldout_preds.push_back(learning_rate * heldout_sum);
    ++next_snap;
  }
  for (int k : snaps.learners_at) {
    snaps.train_mse.push_back(k == 0 ? last_mse
                                     : result.model.mse_trace[static_cast<std::size_t>(k - 1)]);
  }
  snaps.full = std::move(result.model);
  snaps.residuals = std::move(result.residuals);
  return snaps;
}

}  // namespace

BoostSnapshots<HTRegressor> fit_bht_snapshots(
    const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, const std::vector<int>& rows,
    const Eigen::MatrixXd& heldout_xs, const std::vector<int>& heldout_rows, double bin_width,
    double learning_rate, const std::vector<int>& t_values, double clip_bound, int max_rejects,
    RngStream rng) {
  if (!(bin_width > 0.0)) {
    throw InvalidInputError("fit_bht_snapshots: bin_width must be positive");
  }
  const int d = static_cast<int>(xs.cols());
  auto fitter = [&xs, &rows, bin_width, clip_bound, d, rng](const Eigen::VectorXd& resid,
                                                            int) mutable {
    const HistogramTransform t = sample_transform(bin_width, d, rng);
    return fit_ht_resid(xs, resid, rows, t, clip_bound);
  };
  return snapshots_impl<HTRegressor>(ys, rows, heldout_xs, heldout_rows, learning_rate, t_values,
                                     clip_bound, max_rejects, fitter);
}

BoostSnapshots<BinaryHistRegressor> fit_bht_binary_snapshots(
    const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, const std::vector<int>& rows,
    const Eigen::MatrixXd& heldout_xs, const std::vector<int>& heldout_rows, int depth,
    double learning_rate, const std::vector<int>& t_values, double clip_bound, int max_rejects,
    RngStream rng) {
  if (depth < 0) {
    throw InvalidInputError("fit_bht_binary_snapshots: depth must be >= 0");
  }
  const int d = static_cast<int>(xs.cols());
  auto fitter = [&xs, &rows, depth, clip_bound, d, rng](const Eigen::VectorXd& resid,
                                                        int) mutable {
    const BinaryPartition part = sample_binary_partition(d, depth, rng);
    return fit_binary_resid(xs, resid, rows, part, clip_bound);
  };
  return snapshots_impl<BinaryHistRegressor>(ys, rows, heldout_xs, heldout_rows, learning_rate,
                                             t_values, clip_bound, max_rejects, fitter);
}

}  // namespace hte
