#include "hte/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hte/errors.hpp"

namespace hte {

namespace {

struct CandidateScores {
  int grid_index = 0;  // index into the full descending bin-width grid
  int rate_index = 0;
  std::vector<int> learners_at;
  std::vector<Eigen::VectorXd> heldout_preds;  // aligned with the held-out rows
  std::vector<double> train_mse;
};

struct Choice {
  double mse = std::numeric_limits<double>::infinity();
  int cand = -1;
  int snapshot = -1;
};

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

// Per-cell bandwidth selection is regularized toward coarse: a finer bandwidth
// only wins a cell when it beats the coarser one's held-out MSE by this
// relative margin. Cell-level MSE estimates rest on a few dozen points, so an
// unregularized argmin would pick bandwidths by noise and scatter the
// early-stopping decisions across cells of equal smoothness.
constexpr double kSelectionSlack = 0.3;

}  // namespace

RngStream abht_candidate_stream(const RngStream& base, int stage, int candidate) {
  return base.substream(static_cast<std::uint64_t>(stage))
      .substream(static_cast<std::uint64_t>(candidate));
}

int ABHTModel::stage_assignment(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  for (const StageRecord& rec : stages) {
    if (rec.stops(x)) return rec.stage;
  }
  return stages.empty() ? 0 : stages.back().stage;
}

ABHTModel fit_abht(const LabeledDataset& train, const LabeledDataset& val, const AbhtGrids& grids,
                   const AbhtConfig& config, RngStream rng) {
  if (grids.bin_widths.empty() || grids.rates.empty() || grids.iters.empty()) {
    throw InvalidInputError("fit_abht: empty hyperparameter grid");
  }
  if (train.n() == 0) {
    throw InvalidInputError("fit_abht: empty training set");
  }
  if (config.max_stages < 1 || !(config.h0 > 0.0) || config.h0 > 1.0) {
    throw InvalidInputError("fit_abht: need max_stages >= 1 and h0 in (0, 1]");
  }

  std::vector<double> h_full = grids.bin_widths;
  std::sort(h_full.begin(), h_full.end(), std::greater<>());
  h_full.erase(std::unique(h_full.begin(), h_full.end()), h_full.end());
  std::vector<double> rates = grids.rates;
  std::sort(rates.begin(), rates.end());
  std::vector<int> iters = grids.iters;
  std::sort(iters.begin(), iters.end());
  iters.erase(std::unique(iters.begin(), iters.end()), iters.end());
  const int num_rates = static_cast<int>(rates.size());
  const int num_snaps = static_cast<int>(iters.size());

  const int d = train.d();
  const auto n_tr = train.n();
  const auto n_val = val.n();
  const double clip = config.clip_bound > 0.0 ? config.clip_bound : max_abs(train.ys);

  ABHTModel model;
  model.dim = d;
  model.clip_bound = clip;

  Eigen::VectorXd resid_tr = train.ys;
  Eigen::VectorXd resid_val = val.ys;
  Eigen::VectorXd cum_tr = Eigen::VectorXd::Zero(n_tr);
  Eigen::VectorXd cum_val = Eigen::VectorXd::Zero(n_val);
  std::vector<char> active_tr(static_cast<std::size_t>(n_tr), 1);
  std::vector<char> active_val(static_cast<std::size_t>(n_val), 1);

  RegionPartition working = initial_partition(d, config.h0);
  int grid_start = 0;  // current grid is the suffix h_full[grid_start..]
  double prev_rate = 1.0;

  for (int stage = 1; stage <= config.max_stages && !working.empty(); ++stage) {
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

    // (a) One boosted run per (h, rate), scored at every iteration count.
    const int num_h = static_cast<int>(h_full.size()) - grid_start;
    std::vector<CandidateScores> cands(static_cast<std::size_t>(num_h * num_rates));
    for (int hi = 0; hi < num_h; ++hi) {
      const int hf = grid_start + hi;
      for (int ri = 0; ri < num_rates; ++ri) {
        const int cand_id = hf * num_rates + ri;
        auto snaps = fit_bht_snapshots(train.xs, resid_tr, rows_tr, ho_xs, ho_rows, h_full[hf],
                                       rates[static_cast<std::size_t>(ri)], iters, clip,
                                       config.max_rejects,
                                       abht_candidate_stream(rng, stage, cand_id));
        CandidateScores& c = cands[static_cast<std::size_t>(hi * num_rates + ri)];
        c.grid_index = hf;
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
    // Ties break toward the largest bin width, then the smallest iteration
    // count, then the smallest rate; the loop order encodes that priority.
    // With slack > 0 the first candidate within (1 + slack) of the minimum
    // wins, so near-ties also resolve toward coarse-and-small.
    auto best_choice = [&](const std::vector<int>& members, double slack) {
      Choice best;
      for (int hi = 0; hi < num_h; ++hi) {
        for (int si = 0; si < num_snaps; ++si) {
          for (int ri = 0; ri < num_rates; ++ri) {
            const int ci = hi * num_rates + ri;
            const double mse = subset_mse(cands[static_cast<std::size_t>(ci)], si, members);
            if (mse < best.mse) {
              best = {mse, ci, si};
            }
          }
        }
      }
      if (slack > 0.0) {
        for (int hi = 0; hi < num_h; ++hi) {
          for (int si = 0; si < num_snaps; ++si) {
            for (int ri = 0; ri < num_rates; ++ri) {
              const int ci = hi * num_rates + ri;
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

    // (b) Per-cell choice on the entry partition; the stage bandwidth is the
    // largest per-cell optimum.
    std::unordered_map<CellIndex, std::vector<int>, BinKeyHash> entry_groups;
    for (std::size_t m = 0; m < ho_rows.size(); ++m) {
      entry_groups[working.cell_of(ho_xs.row(ho_rows[m]).transpose())].push_back(
          static_cast<int>(m));
    }
    StageRecord rec;
    rec.stage = stage;
    rec.entry = working;
    rec.starved_coarse.dim = d;
    rec.starved_coarse.cell_width = working.cell_width;
    int best_hf = static_cast<int>(h_full.size());  // largest chosen h over cells
    for (const CellIndex& cell : working.active) {
      const auto git = entry_groups.find(cell);
      const int count = git == entry_groups.end() ? 0 : static_cast<int>(git->second.size());
      if (count < config.min_val_points) {
        rec.starved_coarse.active.insert(cell);
        continue;
      }
      const Choice choice = best_choice(git->second, kSelectionSlack);
      best_hf = std::min(best_hf, cands[static_cast<std::size_t>(choice.cand)].grid_index);
    }
    const bool all_starved = best_hf == static_cast<int>(h_full.size());

    // Stage-level (rate, T): best over the whole working region at the stage
    // bandwidth (or over every candidate when all cells starved).
    std::vector<int> all_members(ho_rows.size());
    for (std::size_t m = 0; m < ho_rows.size(); ++m) all_members[m] = static_cast<int>(m);
    Choice stage_choice;
    if (all_starved) {
      stage_choice = best_choice(all_members, 0.0);
      best_hf = cands[static_cast<std::size_t>(stage_choice.cand)].grid_index;
    } else {
      const int hi = best_hf - grid_start;
      for (int si = 0; si < num_snaps; ++si) {
        for (int ri = 0; ri < num_rates; ++ri) {
          const int ci = hi * num_rates + ri;
          const double mse = subset_mse(cands[static_cast<std::size_t>(ci)], si, all_members);
          if (mse < stage_choice.mse) {
            stage_choice = {mse, ci, si};
          }
        }
      }
    }
    const double h_star = h_full[static_cast<std::size_t>(best_hf)];
    const CandidateScores& winner = cands[static_cast<std::size_t>(stage_choice.cand)];
    const double rate_star = rates[static_cast<std::size_t>(winner.rate_index)];
    const int t_star = iters[static_cast<std::size_t>(stage_choice.snapshot)];

    // Commit: refit the winning candidate on its own substream; the run is the
    // exact prefix of the scored one.
    BoostConfig bc;
    bc.learning_rate = rate_star;
    bc.max_iters = t_star;
    bc.clip_bound = clip;
    bc.max_rejects = config.max_rejects;
    const int winner_id = winner.grid_index * num_rates + winner.rate_index;
    rec.chosen_bin_width = h_star;
    rec.chosen_rate = rate_star;
    rec.chosen_iters = t_star;
    rec.boosted = fit_bht(train.xs, resid_tr, h_star, bc,
                          abht_candidate_stream(rng, stage, winner_id), rows_tr)
                      .first;

    // (d) Refine to the stage bandwidth and re-score; cells whose best
    // bandwidth reaches h_star are early-stopped.
    RegionPartition refined = refine(working, h_star);
    rec.stopped.dim = d;
    rec.stopped.cell_width = h_star;
    rec.starved_fine.dim = d;
    rec.starved_fine.cell_width = h_star;
    if (all_starved) {
      rec.starved_coarse.active = working.active;
    } else {
      std::unordered_map<CellIndex, std::vector<int>, BinKeyHash> fine_groups;
      for (std::size_t m = 0; m < ho_rows.size(); ++m) {
        const auto x = ho_xs.row(ho_rows[m]).transpose();
        if (rec.starved_coarse.contains(x)) continue;
        fine_groups[refined.cell_of(x)].push_back(static_cast<int>(m));
      }
      Eigen::VectorXd center(d);
      for (const CellIndex& cell : refined.active) {
        for (int j = 0; j < d; ++j) {
          center(j) = std::min((static_cast<double>(cell[static_cast<std::size_t>(j)]) + 0.5) *
                                   h_star,
                               1.0);
        }
        if (rec.starved_coarse.contains(center)) continue;  // stopped at coarse level
        const auto git = fine_groups.find(cell);
        const int count = git == fine_groups.end() ? 0 : static_cast<int>(git->second.size());
        if (count < config.min_val_points) {
          rec.starved_fine.active.insert(cell);
          continue;
        }
        const Choice choice = best_choice(git->second, kSelectionSlack);
        const double cell_h =
            h_full[static_cast<std::size_t>(cands[static_cast<std::size_t>(choice.cand)].grid_index)];
        rec.per_cell_choice.emplace(cell, cell_h);
        if (cell_h >= h_star * (1.0 - 1e-12)) {
          rec.stopped.active.insert(cell);
        }
      }
    }

    // End-of-stage sweep: chain the cumulative model, freeze stopped points,
    // update residuals for the rest.
    auto sweep = [&](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                     Eigen::VectorXd& cum, Eigen::VectorXd& resid, std::vector<char>& active,
                     const std::vector<int>& rows) {
      for (int i : rows) {
        const auto x = xs.row(i).transpose();
        const double pred = predict_boosted(rec.boosted, x);
        cum(i) = stage == 1 ? pred : prev_rate * cum(i) + pred;
        if (rec.stops(x)) {
          active[static_cast<std::size_t>(i)] = 0;
        } else {
          resid(i) = ys(i) - rate_star * cum(i);
        }
      }
    };
    sweep(train.xs, train.ys, cum_tr, resid_tr, active_tr, rows_tr);
    sweep(val.xs, val.ys, cum_val, resid_val, active_val, rows_val);

    // Residual region for the next stage.
    RegionPartition next_working;
    next_working.dim = d;
    next_working.cell_width = h_star;
    if (!all_starved) {
      Eigen::VectorXd center(d);
      for (const CellIndex& cell : refined.active) {
        if (rec.stopped.active.count(cell) > 0 || rec.starved_fine.active.count(cell) > 0) {
          continue;
        }
        for (int j = 0; j < d; ++j) {
          center(j) = std::min((static_cast<double>(cell[static_cast<std::size_t>(j)]) + 0.5) *
                                   h_star,
                               1.0);
        }
        if (rec.starved_coarse.contains(center)) continue;
        next_working.active.insert(cell);
      }
    }

    model.stages.push_back(std::move(rec));
    working = std::move(next_working);
    prev_rate = rate_star;
    grid_start = best_hf;  // grid shrinks to {h <= h_star}
  }

  if (model.stages.empty()) {
    throw InvalidInputError("fit_abht: no stage could be fit");
  }
  return model;
}

double predict_abht_partial(const ABHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                            int max_stage) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(x(j) >= 0.0 && x(j) <= 1.0)) {
      throw OutOfDomainError("predict_abht: point outside [0,1]^d");
    }
  }
  const int assigned = m.stage_assignment(x);
  const int last = std::min(assigned, max_stage);
  double value = 0.0;
  for (const StageRecord& rec : m.stages) {
    if (rec.stage > last) break;
    const double pred = predict_boosted(rec.boosted, x);
    value = rec.stage == 1 ? pred
                           : m.stages[static_cast<std::size_t>(rec.stage - 2)].chosen_rate * value +
                                 pred;
  }
  return value;
}

double predict_abht(const ABHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return predict_abht_partial(m, x, static_cast<int>(m.stages.size()));
}

}  // namespace hte
