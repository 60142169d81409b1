#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hte/base_learners.hpp"
#include "hte/errors.hpp"
#include "hte/rng.hpp"

namespace hte {

/// What to do with a boosting slot whose candidate learner raised training
/// MSE: retry draws a fresh random learner for the same slot (default), skip
/// abandons the slot and moves on.
enum class RejectPolicy { retry, skip };

struct BoostConfig {
  double learning_rate = 0.1;  // rho in (0, 1]
  int max_iters = 100;         // T
  double clip_bound = 1.0;     // M
  int max_rejects = 10;        // per-slot cap on rejected candidates
  RejectPolicy reject_policy = RejectPolicy::retry;
};

template <class Learner>
struct BoostedModel {
  std::vector<Learner> learners;
  double learning_rate = 0.1;
  double clip_bound = 1.0;
  std::vector<double> mse_trace;  // training MSE after each accepted learner
  bool truncated = false;         // stopped early: a slot ran out of candidates
};

using BHTModel = BoostedModel<HTRegressor>;
using BinaryBHTModel = BoostedModel<BinaryHistRegressor>;

inline double predict_base(const HTRegressor& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return predict_ht(m, x);
}
inline double predict_base(const BinaryHistRegressor& m,
                           const Eigen::Ref<const Eigen::VectorXd>& x) {
  return predict_binary(m, x);
}

/// rho times the sum of base predictions.
template <class Learner>
double predict_boosted(const BoostedModel<Learner>& m,
                       const Eigen::Ref<const Eigen::VectorXd>& x) {
  double sum = 0.0;
  for (const Learner& learner : m.learners) {
    sum += predict_base(learner, x);
  }
  return m.learning_rate * sum;
}

template <class Learner>
struct BoostResult {
  BoostedModel<Learner> model;
  Eigen::VectorXd residuals;  // final U_i, aligned with the fitted rows
};

/// Generic residual-boosting loop. `fitter(resid, rng)` fits one base learner
/// against the current residuals (aligned with `rows`) and returns it together
/// with its predictions on those rows. `on_accept(accepted_count, learner)` is
/// invoked after each commit. A candidate is accepted iff it does not increase
/// training MSE; the initial reference MSE is mean(y^2), so the first learner
/// must improve on predicting zero.
template <class Learner, class Fitter, class OnAccept>
BoostResult<Learner> fit_boosted(const Eigen::VectorXd& ys, const std::vector<int>& rows,
                                 const BoostConfig& cfg, Fitter&& fitter, OnAccept&& on_accept) {
  if (cfg.max_iters < 1) {
    throw InvalidInputError("fit_boosted: max_iters must be >= 1");
  }
  if (!(cfg.learning_rate > 0.0) || cfg.learning_rate > 1.0) {
    throw InvalidInputError("fit_boosted: learning_rate must be in (0, 1]");
  }
  if (rows.empty()) {
    throw InvalidInputError("fit_boosted: empty dataset");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());

  BoostResult<Learner> out;
  out.model.learning_rate = cfg.learning_rate;
  out.model.clip_bound = cfg.clip_bound;

  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    resid(i) = ys(rows[static_cast<std::size_t>(i)]);
  }
  double prev_mse = resid.squaredNorm() / static_cast<double>(n);

  for (int slot = 0; slot < cfg.max_iters; ++slot) {
    int rejects = 0;
    for (;;) {
      auto [learner, preds] = fitter(resid, slot);
      Eigen::VectorXd next = resid - cfg.learning_rate * preds;
      const double mse = next.squaredNorm() / static_cast<double>(n);
      if (mse <= prev_mse) {
        resid = std::move(next);
        prev_mse = mse;
        out.model.learners.push_back(std::move(learner));
        out.model.mse_trace.push_back(mse);
        on_accept(static_cast<int>(out.model.learners.size()), out.model.learners.back());
        break;
      }
      if (++rejects > cfg.max_rejects) {
        out.model.truncated = true;
        out.residuals = std::move(resid);
        return out;
      }
      if (cfg.reject_policy == RejectPolicy::skip) {
        break;  // abandon this slot, keep the iteration budget moving
      }
    }
  }
  out.residuals = std::move(resid);
  return out;
}

/// Algorithm: boosted histogram transforms with a fresh random transform per
/// iteration, bin width h throughout.
std::pair<BHTModel, Eigen::VectorXd> fit_bht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                                             double bin_width, const BoostConfig& cfg,
                                             RngStream rng);

std::pair<BHTModel, Eigen::VectorXd> fit_bht(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                                             double bin_width, const BoostConfig& cfg,
                                             RngStream rng, const std::vector<int>& rows);

/// Binary-histogram flavor: each iteration draws a fresh purely random binary
/// partition of the given depth.
std::pair<BinaryBHTModel, Eigen::VectorXd> fit_bht_binary(const Eigen::MatrixXd& xs,
                                                          const Eigen::VectorXd& ys, int depth,
                                                          const BoostConfig& cfg, RngStream rng);

std::pair<BinaryBHTModel, Eigen::VectorXd> fit_bht_binary(const Eigen::MatrixXd& xs,
                                                          const Eigen::VectorXd& ys, int depth,
                                                          const BoostConfig& cfg, RngStream rng,
                                                          const std::vector<int>& rows);

/// One boosted run at max(t_values) iterations, with the prefix model's
/// held-out predictions and training MSE captured at each requested iteration
/// count. A run that stops early repeats its final state for the remaining
/// snapshots. Truncating the learner list to learners_at[k] entries reproduces
/// the snapshot exactly, since the accept loop only looks backwards.
template <class Learner>
struct BoostSnapshots {
  BoostedModel<Learner> full;
  Eigen::VectorXd residuals;
  std::vector<int> t_values;
  std::vector<int> learners_at;                // accepted learners at snapshot
  std::vector<Eigen::VectorXd> heldout_preds;  // aligned with heldout rows
  std::vector<double> train_mse;

  BoostedModel<Learner> prefix(std::size_t snapshot) const {
    BoostedModel<Learner> m;
    m.learning_rate = full.learning_rate;
    m.clip_bound = full.clip_bound;
    const auto k = static_cast<std::size_t>(learners_at[snapshot]);
    m.learners.assign(full.learners.begin(), full.learners.begin() + static_cast<long>(k));
    m.mse_trace.assign(full.mse_trace.begin(), full.mse_trace.begin() + static_cast<long>(k));
    return m;
  }
};

BoostSnapshots<HTRegressor> fit_bht_snapshots(
    const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, const std::vector<int>& rows,
    const Eigen::MatrixXd& heldout_xs, const std::vector<int>& heldout_rows, double bin_width,
    double learning_rate, const std::vector<int>& t_values, double clip_bound, int max_rejects,
    RngStream rng);

BoostSnapshots<BinaryHistRegressor> fit_bht_binary_snapshots(
    const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, const std::vector<int>& rows,
    const Eigen::MatrixXd& heldout_xs, const std::vector<int>& heldout_rows, int depth,
    double learning_rate, const std::vector<int>& t_values, double clip_bound, int max_rejects,
    RngStream rng);

}  // namespace hte
