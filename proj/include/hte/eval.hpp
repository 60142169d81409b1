#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hte/adaptive.hpp"
#include "hte/boosting.hpp"
#include "hte/data.hpp"
#include "hte/parallel.hpp"
#include "hte/rng.hpp"

namespace hte {

double mse(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

struct RegionScore {
  double mse = 0.0;
  Eigen::Index count = 0;
};

/// Overall MSE plus MSE restricted to each ground-truth region; the overall
/// value is the count-weighted mean of the per-region values.
struct RegionMSEReport {
  double overall_mse = 0.0;
  Eigen::Index count = 0;
  std::map<int, RegionScore> per_region;  // empty when no labels were supplied
};

RegionMSEReport region_mse(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                           const std::vector<int>& labels);

// Validation-MSE grid search. Ties break toward the largest bin width (or the
// smallest depth), then the smallest ensemble size / iteration count, then the
// smallest rate. Each bin width (and rate, where applicable) gets its own RNG
// substream, and the committed model is the exact prefix of the scored run.

struct PehtSearchResult {
  PEHTModel model;
  double bin_width = 0.0;
  int num_members = 0;
  double val_mse = 0.0;
};

PehtSearchResult grid_search_peht(const LabeledDataset& train, const LabeledDataset& val,
                                  const std::vector<double>& h_grid, const std::vector<int>& t_grid,
                                  double clip_bound, RngStream rng);

struct BinaryPehtSearchResult {
  BinaryPEHTModel model;
  int depth = 0;
  int num_members = 0;
  double val_mse = 0.0;
};

BinaryPehtSearchResult grid_search_peht_binary(const LabeledDataset& train,
                                               const LabeledDataset& val,
                                               const std::vector<int>& depth_grid,
                                               const std::vector<int>& t_grid, double clip_bound,
                                               RngStream rng);

struct BhtSearchResult {
  BHTModel model;
  double bin_width = 0.0;
  double rate = 0.0;
  int iters = 0;
  double val_mse = 0.0;
};

BhtSearchResult grid_search_bht(const LabeledDataset& train, const LabeledDataset& val,
                                const std::vector<double>& h_grid,
                                const std::vector<double>& rates, const std::vector<int>& t_grid,
                                double clip_bound, int max_rejects, RngStream rng);

struct BinaryBhtSearchResult {
  BinaryBHTModel model;
  int depth = 0;
  double rate = 0.0;
  int iters = 0;
  double val_mse = 0.0;
};

BinaryBhtSearchResult grid_search_bht_binary(const LabeledDataset& train, const LabeledDataset& val,
                                             const std::vector<int>& depth_grid,
                                             const std::vector<double>& rates,
                                             const std::vector<int>& t_grid, double clip_bound,
                                             int max_rejects, RngStream rng);

enum class Method { peht, bht, abht };

struct ExperimentConfig {
  Method method = Method::abht;
  std::string dataset = "case_a";  // "case_a", "case_b", or a CSV path
  std::string target_column = "y";
  int n_train = 1000;
  int n_val = 1000;
  int n_test = 10000;
  double noise_sd = 0.01;
  int repetitions = 30;
  std::uint64_t seed = 0;
  std::vector<double> bin_widths;
  std::vector<int> depths;  // nonempty selects the binary-histogram variant
  std::vector<double> rates;
  std::vector<int> iters;
  double h0 = 0.2;
  int max_stages = 8;
  int min_val_points = 10;
  double clip_bound = 0.0;  // <= 0: max |y| over each repetition's training set
};

struct RepetitionOutcome {
  int repetition = 0;
  bool ok = false;
  std::string error;  // nonempty when the repetition aborted
  RegionMSEReport report;
};

struct AggregateEntry {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single repetition
  int repetitions = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RepetitionOutcome> reps;
  AggregateEntry overall;
  std::map<int, AggregateEntry> per_region;
};

/// Runs `repetitions` independent repetitions: repetition r draws fresh
/// synthetic data (or reshuffles a file's split) on substream r of the config
/// seed, grid-searches on train/validation, and scores the selected model on
/// the test split. Failed repetitions are recorded, not dropped.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Aggregate report as CSV, one row per region plus an "overall" row;
/// byte-deterministic for a given result.
void write_report_csv(const ExperimentResult& result, const std::string& path);

/// Raw per-repetition values, one row per (repetition, region).
void write_raw_csv(const ExperimentResult& result, const std::string& path);

}  // namespace hte
