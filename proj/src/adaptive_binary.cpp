#include <algorithm>
#include <limits>
#include <unordered_map>

#include "hte/adaptive.hpp"
#include "hte/errors.hpp"

namespace hte {

namespace {

struct CandidateScores {
  int depth_index = 0;
  int rate_index = 0;
  std::vector<int> learners_at;
  std::vector<Eigen::VectorXd> heldout_preds;
  std::vector<double> train_mse;
};

struct Choice {
  double mse = std::numeric_limits<double>::infinity();
  int cand = -1;
  int snapshot = -1;
};

// Coarse-preferring margin for per-cell depth selection; see the grid flavor.
constexpr double kSelectionSlack = 0.3;

}  // namespace

int ABHTBinaryModel::stage_assignment(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto leaf = static_cast<std::size_t>(reference.leaf_id(x));
  for (const BinaryStageRecord& rec : stages) {
    if (rec.stopped_leaves[leaf]) return rec.stage;
  }
  return stages.empty() ? 0 : stages.back().stage;
}

ABHTBinaryModel fit_abht_binary(const LabeledDataset& train, const LabeledDataset& val,
                                const std::vector<int>& depth_grid,
                                const std::vector<double>& rates_in, const std::vector<int>& iters_in,
                                const AbhtConfig& config, RngStream rng) {
  if (depth_grid.empty() || rates_in.empty() || iters_in.empty()) {
    throw InvalidInputError("fit_abht_binary: empty hyperparameter grid");
  }
  if (train.n() == 0) {
    throw InvalidInputError("fit_abht_binary: empty training set");
  }
  std::vector<int> depths = depth_grid;  // ascending: small depth = coarse = smooth
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  std::vector<double> rates = rates_in;
  std::sort(rates.begin(), rates.end());
  std::vector<int> iters = iters_in;
  std::sort(iters.begin(), iters.end());
  iters.erase(std::unique(iters.begin(), iters.end()), iters.end());
  if (depths.front() < 0) {
    throw InvalidInputError("fit_abht_binary: depths must be nonnegative");
  }
  const int num_rates = static_cast<int>(rates.size());
  const int num_snaps = static_cast<int>(iters.size());
  const int ref_depth = depths.back();

  const int d = train.d();
  const auto n_tr = train.n();
  const auto n_val = val.n();
  const double clip =
      config.clip_bound > 0.0 ? config.clip_bound : train.ys.cwiseAbs().maxCoeff();

  ABHTBinaryModel model;
  model.dim = d;
  model.clip_bound = clip;
  {
    RngStream ref_rng = rng.substream(0);
    model.reference = sample_binary_partition(d, ref_depth, ref_rng);
  }
  const int num_leaves = model.reference.num_leaves();

  // Reference leaf per point, computed once.
  std::vector<int> leaf_tr(static_cast<std::size_t>(n_tr));
  for (Eigen::Index i = 0; i < n_tr; ++i) {
    leaf_tr[static_cast<std::size_t>(i)] = model.reference.leaf_id(train.xs.row(i).transpose());
  }
  std::vector<int> leaf_val(static_cast<std::size_t>(n_val));
  for (Eigen::Index i = 0; i < n_val; ++i) {
    leaf_val[static_cast<std::size_t>(i)] = model.reference.leaf_id(val.xs.row(i).transpose());
  }

  Eigen::VectorXd resid_tr = train.ys;
  Eigen::VectorXd resid_val = val.ys;
  Eigen::VectorXd cum_tr = Eigen::VectorXd::Zero(n_tr);
  Eigen::VectorXd cum_val = Eigen::VectorXd::Zero(n_val);
  std::vector<char> active_tr(static_cast<std::size_t>(n_tr), 1);
  std::vector<char> active_val(static_cast<std::size_t>(n_val), 1);
  std::vector<char> working(static_cast<std::size_t>(num_leaves), 1);

  int grid_start = 0;  // current grid is depths[grid_start..]
  int granularity = depths.front();
  double prev_rate = 1.0;

  for (int stage = 1; stage <= config.max_stages; ++stage) {
    if (std::none_of(working.begin(), working.end(), [](char c) { return c != 0; })) break;
    std::vector<int> rows_tr;
    for (Eigen::Index i = 0; i < n_tr; ++i) {
      if (active_tr[static_cast<std::size_t>(i)]) rows_tr.push_back(static_cast<int>(i));
    }
    if (rows_tr.empty()) break;
    std::vector<int> rows_val;
    for (Eigen::Index i = 0; i < n_val; ++i) {
      if (active_val[static_cast<std::size_t>(i)]) rows_val.push_back(static_cast<int>(i));
    }
    const bool fallback = rows_val.empty();
    if (fallback) model.used_training_fallback = true;
    const Eigen::MatrixXd& ho_xs = fallback ? train.xs : val.xs;
    const std::vector<int>& ho_rows = fallback ? rows_tr : rows_val;
    const Eigen::VectorXd& ho_resid = fallback ? resid_tr : resid_val;
    const std::vector<int>& ho_leaf = fallback ? leaf_tr : leaf_val;

    const int num_p = static_cast<int>(depths.size()) - grid_start;
    std::vector<CandidateScores> cands(static_cast<std::size_t>(num_p * num_rates));
    for (int pi = 0; pi < num_p; ++pi) {
      const int pf = grid_start + pi;
      for (int ri = 0; ri < num_rates; ++ri) {
        const int cand_id = pf * num_rates + ri;
        auto snaps = fit_bht_binary_snapshots(
            train.xs, resid_tr, rows_tr, ho_xs, ho_rows, depths[static_cast<std::size_t>(pf)],
            rates[static_cast<std::size_t>(ri)], iters, clip, config.max_rejects,
            abht_candidate_stream(rng, stage, cand_id));
        CandidateScores& c = cands[static_cast<std::size_t>(pi * num_rates + ri)];
        c.depth_index = pf;
        c.rate_index = ri;
        c.learners_at = std::move(snaps.learners_at);
        c.heldout_preds = std::move(snaps.heldout_preds);
        c.train_mse = std::move(snaps.train_mse);
      }
    }

    auto subset_mse = [&](const CandidateScores& c, int snapshot,
                          const std::vector<int>& members) {
      double s = 0.0;
      const Eigen::VectorXd& preds = c.heldout_preds[static_cast<std::size_t>(snapshot)];
      for (int m : members) {
        const double diff = ho_resid(ho_rows[static_cast<std::size_t>(m)]) - preds(m);
        s += diff * diff;
      }
      return s / static_cast<double>(members.size());
    };
    // Ties break toward the smallest depth (coarsest partition), then the
    // smallest iteration count, then the smallest rate. With slack > 0 the
    // first candidate within (1 + slack) of the minimum wins, keeping noisy
    // per-cell estimates from scattering the depth choices.
    auto best_choice = [&](const std::vector<int>& members, double slack) {
      Choice best;
      for (int pi = 0; pi < num_p; ++pi) {
        for (int si = 0; si < num_snaps; ++si) {
          for (int ri = 0; ri < num_rates; ++ri) {
            const int ci = pi * num_rates + ri;
            const double mse = subset_mse(cands[static_cast<std::size_t>(ci)], si, members);
            if (mse < best.mse) {
              best = {mse, ci, si};
            }
          }
        }
      }
      if (slack > 0.0) {
        for (int pi = 0; pi < num_p; ++pi) {
          for (int si = 0; si < num_snaps; ++si) {
            for (int ri = 0; ri < num_rates; ++ri) {
              const int ci = pi * num_rates + ri;
              const double mse = subset_mse(cands[static_cast<std::size_t>(ci)], si, members);
              if (mse <= best.mse * (1.0 + slack)) {
                return Choice{mse, ci, si};
              }
            }
          }
        }
      }
      return best;
    };

    // Entry cells: reference-tree ancestors at the current granularity.
    const int entry_shift = ref_depth - granularity;
    std::unordered_map<int, std::vector<int>> entry_groups;
    for (std::size_t m = 0; m < ho_rows.size(); ++m) {
      entry_groups[ho_leaf[static_cast<std::size_t>(ho_rows[m])] >> entry_shift].push_back(
          static_cast<int>(m));
    }
    std::vector<char> entry_cells(static_cast<std::size_t>(1 << granularity), 0);
    for (int leaf = 0; leaf < num_leaves; ++leaf) {
      if (working[static_cast<std::size_t>(leaf)]) {
        entry_cells[static_cast<std::size_t>(leaf >> entry_shift)] = 1;
      }
    }
    std::vector<char> starved_coarse(entry_cells.size(), 0);
    int best_pf = static_cast<int>(depths.size());
    for (std::size_t cell = 0; cell < entry_cells.size(); ++cell) {
      if (!entry_cells[cell]) continue;
      const auto git = entry_groups.find(static_cast<int>(cell));
      const int count = git == entry_groups.end() ? 0 : static_cast<int>(git->second.size());
      if (count < config.min_val_points) {
        starved_coarse[cell] = 1;
        continue;
      }
      const Choice choice = best_choice(git->second, kSelectionSlack);
      best_pf = std::min(best_pf, cands[static_cast<std::size_t>(choice.cand)].depth_index);
    }
    const bool all_starved = best_pf == static_cast<int>(depths.size());

    std::vector<int> all_members(ho_rows.size());
    for (std::size_t m = 0; m < ho_rows.size(); ++m) all_members[m] = static_cast<int>(m);
    Choice stage_choice;
    if (all_starved) {
      stage_choice = best_choice(all_members, 0.0);
      best_pf = cands[static_cast<std::size_t>(stage_choice.cand)].depth_index;
    } else {
      const int pi = best_pf - grid_start;
      for (int si = 0; si < num_snaps; ++si) {
        for (int ri = 0; ri < num_rates; ++ri) {
          const int ci = pi * num_rates + ri;
          const double mse = subset_mse(cands[static_cast<std::size_t>(ci)], si, all_members);
          if (mse < stage_choice.mse) {
            stage_choice = {mse, ci, si};
          }
        }
      }
    }
    const int p_star = depths[static_cast<std::size_t>(best_pf)];
    const CandidateScores& winner = cands[static_cast<std::size_t>(stage_choice.cand)];
    const double rate_star = rates[static_cast<std::size_t>(winner.rate_index)];
    const int t_star = iters[static_cast<std::size_t>(stage_choice.snapshot)];

    BoostConfig bc;
    bc.learning_rate = rate_star;
    bc.max_iters = t_star;
    bc.clip_bound = clip;
    bc.max_rejects = config.max_rejects;
    const int winner_id = winner.depth_index * num_rates + winner.rate_index;
    BinaryStageRecord rec;
    rec.stage = stage;
    rec.chosen_depth = p_star;
    rec.chosen_rate = rate_star;
    rec.chosen_iters = t_star;
    rec.boosted = fit_bht_binary(train.xs, resid_tr, p_star, bc,
                                 abht_candidate_stream(rng, stage, winner_id), rows_tr)
                      .first;
    rec.stopped_leaves.assign(static_cast<std::size_t>(num_leaves), 0);

    // Refined pass at depth p_star; a cell early-stops when its best depth
    // does not exceed the stage depth.
    const int fine_shift = ref_depth - p_star;
    std::vector<char> fine_stopped(static_cast<std::size_t>(1 << p_star), 0);
    if (all_starved) {
      for (int leaf = 0; leaf < num_leaves; ++leaf) {
        if (working[static_cast<std::size_t>(leaf)]) {
          rec.stopped_leaves[static_cast<std::size_t>(leaf)] = 1;
        }
      }
    } else {
      std::unordered_map<int, std::vector<int>> fine_groups;
      for (std::size_t m = 0; m < ho_rows.size(); ++m) {
        const int leaf = ho_leaf[static_cast<std::size_t>(ho_rows[m])];
        if (starved_coarse[static_cast<std::size_t>(leaf >> entry_shift)]) continue;
        fine_groups[leaf >> fine_shift].push_back(static_cast<int>(m));
      }
      std::vector<char> fine_cells(static_cast<std::size_t>(1 << p_star), 0);
      for (int leaf = 0; leaf < num_leaves; ++leaf) {
        if (working[static_cast<std::size_t>(leaf)] &&
            !starved_coarse[static_cast<std::size_t>(leaf >> entry_shift)]) {
          fine_cells[static_cast<std::size_t>(leaf >> fine_shift)] = 1;
        }
      }
      for (std::size_t cell = 0; cell < fine_cells.size(); ++cell) {
        if (!fine_cells[cell]) continue;
        const auto git = fine_groups.find(static_cast<int>(cell));
        const int count = git == fine_groups.end() ? 0 : static_cast<int>(git->second.size());
        if (count < config.min_val_points) {
          fine_stopped[cell] = 1;
          continue;
        }
        const Choice choice = best_choice(git->second, kSelectionSlack);
        if (cands[static_cast<std::size_t>(choice.cand)].depth_index <= best_pf) {
          fine_stopped[cell] = 1;
        }
      }
      for (int leaf = 0; leaf < num_leaves; ++leaf) {
        if (!working[static_cast<std::size_t>(leaf)]) continue;
        if (starved_coarse[static_cast<std::size_t>(leaf >> entry_shift)] ||
            fine_stopped[static_cast<std::size_t>(leaf >> fine_shift)]) {
          rec.stopped_leaves[static_cast<std::size_t>(leaf)] = 1;
        }
      }
    }

    auto sweep = [&](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                     const std::vector<int>& leaves, Eigen::VectorXd& cum, Eigen::VectorXd& resid,
                     std::vector<char>& active, const std::vector<int>& rows) {
      for (int i : rows) {
        const double pred = predict_boosted(rec.boosted, xs.row(i).transpose());
        cum(i) = stage == 1 ? pred : prev_rate * cum(i) + pred;
        if (rec.stopped_leaves[static_cast<std::size_t>(leaves[static_cast<std::size_t>(i)])]) {
          active[static_cast<std::size_t>(i)] = 0;
        } else {
          resid(i) = ys(i) - rate_star * cum(i);
        }
      }
    };
    sweep(train.xs, train.ys, leaf_tr, cum_tr, resid_tr, active_tr, rows_tr);
    sweep(val.xs, val.ys, leaf_val, cum_val, resid_val, active_val, rows_val);

    for (int leaf = 0; leaf < num_leaves; ++leaf) {
      if (rec.stopped_leaves[static_cast<std::size_t>(leaf)]) {
        working[static_cast<std::size_t>(leaf)] = 0;
      }
    }
    model.stages.push_back(std::move(rec));
    prev_rate = rate_star;
    grid_start = best_pf;
    granularity = p_star;
  }

  if (model.stages.empty()) {
    throw InvalidInputError("fit_abht_binary: no stage could be fit");
  }
  return model;
}

double predict_abht_binary(const ABHTBinaryModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(x(j) >= 0.0 && x(j) <= 1.0)) {
      throw OutOfDomainError("predict_abht_binary: point outside [0,1]^d");
    }
  }
  const int last = m.stage_assignment(x);
  double value = 0.0;
  for (const BinaryStageRecord& rec : m.stages) {
    if (rec.stage > last) break;
    const double pred = predict_boosted(rec.boosted, x);
    value = rec.stage == 1 ? pred
                           : m.stages[static_cast<std::size_t>(rec.stage - 2)].chosen_rate * value +
                                 pred;
  }
  return value;
}

}  // namespace hte
