#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hte/base_learners.hpp"
#include "hte/data.hpp"
#include "hte/rng.hpp"

namespace hte {

/// Arithmetic mean of T independently randomized histogram regressors, each
/// fit on the full training set (no bootstrap).
struct PEHTModel {
  std::vector<HTRegressor> members;
};

struct BinaryPEHTModel {
  std::vector<BinaryHistRegressor> members;
};

PEHTModel fit_peht(const LabeledDataset& train, double bin_width, int num_members,
                   double clip_bound, RngStream rng);

/// Multi-width ensemble: bin_widths[k] gets counts[k] members; the counts must
/// sum to the ensemble size.
PEHTModel fit_peht(const LabeledDataset& train, const std::vector<double>& bin_widths,
                   const std::vector<int>& counts, double clip_bound, RngStream rng);

BinaryPEHTModel fit_peht_binary(const LabeledDataset& train, int depth, int num_members,
                                double clip_bound, RngStream rng);

double predict_peht(const PEHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_peht(const BinaryPEHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace hte
