#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "hte/rng.hpp"

namespace hte {

struct LabeledDataset {
  Eigen::MatrixXd xs;              // n x d, features in [0,1]^d after scaling
  Eigen::VectorXd ys;              // n targets
  std::vector<int> region_labels;  // optional ground-truth smoothness region per point

  Eigen::Index n() const { return xs.rows(); }
  int d() const { return static_cast<int>(xs.cols()); }
  bool has_labels() const { return !region_labels.empty(); }
};

/// Noiseless one-dimensional target: a high-frequency square wave on
/// [0, 1/8], a cube-root branch on (1/8, 1/2], and a linear branch on
/// (1/2, 1], glued continuously.
double case_a_target(double x);
int case_a_region(double x);  // 0, 1, 2 for the three branches

/// Noiseless two-dimensional target: rough oscillation plus linear term on
/// the [0,1/3]^2 block, cube-root means on the mixed blocks, linear on the
/// smooth block.
double case_b_target(double x1, double x2);
int case_b_region(double x1, double x2);  // 0..3 for the four blocks

LabeledDataset gen_case_a(int n, double noise_sd, RngStream& rng);
LabeledDataset gen_case_b(int n, double noise_sd, RngStream& rng);

/// CSV ingestion: UTF-8, comma-separated, header row, numeric cells. The
/// column named `target_column` becomes y; a column named "region", if
/// present, becomes the region labels; all other columns become features in
/// header order.
LabeledDataset load_csv(const std::string& path, const std::string& target_column = "y");

/// Writer emits 17 significant digits so a round-trip is bit-exact.
void save_csv(const LabeledDataset& ds, const std::string& path);

struct ScaleParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

/// Per-feature min-max parameters; fit these on the training portion only.
ScaleParams fit_feature_scaling(const LabeledDataset& train);

/// Maps features into [0,1]; out-of-range values (validation or test points
/// beyond the training extent) are clamped, constant features map to 0.5.
LabeledDataset apply_feature_scaling(const LabeledDataset& ds, const ScaleParams& params);

struct TargetScale {
  double mean = 0.0;
  double sd = 1.0;
};

/// z-score parameters for the target, fit on the training portion.
TargetScale fit_target_scaling(const LabeledDataset& train);
LabeledDataset apply_target_scaling(const LabeledDataset& ds, const TargetScale& scale);

struct SplitSpec {
  double train_fraction = 0.4;
  double val_fraction = 0.4;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Disjoint (train, val, test) by seeded shuffle; sizes within 1 of
/// n * fraction.
std::tuple<LabeledDataset, LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                                 const SplitSpec& spec);

}  // namespace hte
