#pragma once

#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "hte/boosting.hpp"
#include "hte/data.hpp"
#include "hte/regions.hpp"
#include "hte/rng.hpp"

namespace hte {

struct AbhtGrids {
  std::vector<double> bin_widths;  // searched per stage, shrinks to {h <= h_star}
  std::vector<double> rates;       // boosting learning rate, selected per stage
  std::vector<int> iters;          // iteration counts, selected per stage
};

struct AbhtConfig {
  double h0 = 0.2;          // width of the initial region partition
  int max_stages = 8;       // hard cap on the number of stages
  int min_val_points = 10;  // cells with fewer validation points stop immediately
  double clip_bound = 0.0;  // M; <= 0 means use max |y| over the training set
  int max_rejects = 10;
};

/// One committed stage: the bandwidth/rate/iteration choice, the boosted fit
/// on that stage's residuals, and the region bookkeeping. A cell is stopped
/// at this stage either because its best validated bandwidth reached the
/// stage bandwidth (stopped) or because it lacked validation points
/// (starved_coarse before refinement, starved_fine after).
struct StageRecord {
  int stage = 1;
  double chosen_bin_width = 0.0;
  int chosen_iters = 0;
  double chosen_rate = 0.0;
  BHTModel boosted;
  RegionPartition entry;           // working region X_l at its entry width
  RegionPartition stopped;         // converged cells, at chosen_bin_width
  RegionPartition starved_coarse;  // entry-width cells below min_val_points
  RegionPartition starved_fine;    // chosen-width cells below min_val_points
  std::unordered_map<CellIndex, double, BinKeyHash> per_cell_choice;  // refined cell -> best h

  bool stops(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return stopped.contains(x) || starved_coarse.contains(x) || starved_fine.contains(x);
  }
};

struct ABHTModel {
  std::vector<StageRecord> stages;
  double clip_bound = 0.0;
  int dim = 1;
  bool used_training_fallback = false;  // validation set was empty somewhere

  /// First stage whose stopped region contains x; points never stopped belong
  /// to the last stage. Overlaps between stage regions (possible when widths
  /// do not divide) resolve to the earliest stage.
  int stage_assignment(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// The RNG substream used for candidate `candidate` of stage `stage` (1-based
/// stage). Exposed so a single-candidate run can be reproduced with a direct
/// boosted fit on the same stream.
RngStream abht_candidate_stream(const RngStream& base, int stage, int candidate);

ABHTModel fit_abht(const LabeledDataset& train, const LabeledDataset& val, const AbhtGrids& grids,
                   const AbhtConfig& config, RngStream rng);

double predict_abht(const ABHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Prediction of the model truncated to its first `max_stage` stages; used by
/// stage traces.
double predict_abht_partial(const ABHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                            int max_stage);

// Binary-histogram flavor for higher-dimensional data: regions are unions of
// leaf cells of a fixed reference partition of depth max(depth_grid), and the
// per-stage bandwidth choice becomes a depth choice (smaller depth = coarser =
// smoother).

struct BinaryStageRecord {
  int stage = 1;
  int chosen_depth = 0;
  int chosen_iters = 0;
  double chosen_rate = 0.0;
  BinaryBHTModel boosted;
  std::vector<char> stopped_leaves;  // over reference leaves, stopped at this stage
};

struct ABHTBinaryModel {
  BinaryPartition reference;  // fixed partition whose leaves make up the regions
  std::vector<BinaryStageRecord> stages;
  double clip_bound = 0.0;
  int dim = 1;
  bool used_training_fallback = false;

  int stage_assignment(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

ABHTBinaryModel fit_abht_binary(const LabeledDataset& train, const LabeledDataset& val,
                                const std::vector<int>& depth_grid,
                                const std::vector<double>& rates, const std::vector<int>& iters,
                                const AbhtConfig& config, RngStream rng);

double predict_abht_binary(const ABHTBinaryModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace hte
