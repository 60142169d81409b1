#include "hte/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hte/errors.hpp"

namespace hte {

namespace {

double square_wave_a(double x) {
  // 0.05 * (-1)^(floor(x / 0.01) + 1) + 0.05
  const auto k = static_cast<std::int64_t>(std::floor(x / 0.01));
  return 0.05 * ((k + 1) % 2 == 0 ? 1.0 : -1.0) + 0.05;
}

double cbrt3(double x) { return 3.0 * std::cbrt(x); }

}  // namespace

double case_a_target(double x) {
  if (x <= 0.125) {
    return square_wave_a(x);
  }
  if (x <= 0.5) {
    return cbrt3(x) + square_wave_a(0.125) - cbrt3(0.125);
  }
  return -x + cbrt3(0.5) - cbrt3(0.125) + 0.5;
}

int case_a_region(double x) {
  if (x <= 0.125) return 0;
  if (x <= 0.5) return 1;
  return 2;
}

double case_b_target(double x1, double x2) {
  if (x1 <= 1.0 / 3.0 && x2 <= 1.0 / 3.0) {
    const auto k = static_cast<std::int64_t>(std::floor((x1 + x2) / 0.1));
    const double h = 0.05 * ((k + 1) % 2 == 0 ? 1.0 : -1.0) + 0.45;
    return h + (x1 + x2) / 3.0;
  }
  if (x1 <= 1.0 / 3.0 || x2 <= 1.0 / 3.0) {
    return (std::cbrt(x1) + std::cbrt(x2)) / 2.0;
  }
  return (x1 + x2) / 6.0 + 3.0 / 5.0;
}

int case_b_region(double x1, double x2) {
  const bool a = x1 <= 1.0 / 3.0;
  const bool b = x2 <= 1.0 / 3.0;
  if (a && b) return 0;
  if (a) return 1;
  if (b) return 2;
  return 3;
}

LabeledDataset gen_case_a(int n, double noise_sd, RngStream& rng) {
  if (n < 1 || noise_sd < 0.0) {
    throw InvalidInputError("gen_case_a: need n >= 1 and noise_sd >= 0");
  }
  LabeledDataset ds;
  ds.xs.resize(n, 1);
  ds.ys.resize(n);
  ds.region_labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_uniform();
    const double eps = noise_sd > 0.0 ? noise_sd * rng.next_gaussian() : 0.0;
    ds.xs(i, 0) = x;
    ds.ys(i) = case_a_target(x) + eps;
    ds.region_labels[static_cast<std::size_t>(i)] = case_a_region(x);
  }
  return ds;
}

LabeledDataset gen_case_b(int n, double noise_sd, RngStream& rng) {
  if (n < 1 || noise_sd < 0.0) {
    throw InvalidInputError("gen_case_b: need n >= 1 and noise_sd >= 0");
  }
  LabeledDataset ds;
  ds.xs.resize(n, 2);
  ds.ys.resize(n);
  ds.region_labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x1 = rng.next_uniform();
    const double x2 = rng.next_uniform();
    const double eps = noise_sd > 0.0 ? noise_sd * rng.next_gaussian() : 0.0;
    ds.xs(i, 0) = x1;
    ds.xs(i, 1) = x2;
    ds.ys(i) = case_b_target(x1, x2) + eps;
    ds.region_labels[static_cast<std::size_t>(i)] = case_b_region(x1, x2);
  }
  return ds;
}

LabeledDataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("load_csv: empty file " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int target_idx = -1;
  int region_idx = -1;
  std::vector<int> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target_column) {
      target_idx = static_cast<int>(c);
    } else if (header[c] == "region") {
      region_idx = static_cast<int>(c);
    } else {
      feature_idx.push_back(static_cast<int>(c));
    }
  }
  if (target_idx < 0) {
    throw DataError("load_csv: target column '" + target_column + "' not found in " + path);
  }
  if (feature_idx.empty()) {
    throw DataError("load_csv: no feature columns in " + path);
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<int> regions;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw DataError("load_csv: non-numeric cell at line " + std::to_string(lineno));
      }
      if (pos != cell.size()) {
        throw DataError("load_csv: non-numeric cell at line " + std::to_string(lineno));
      }
      cells.push_back(v);
    }
    if (cells.size() != header.size()) {
      throw DataError("load_csv: ragged row at line " + std::to_string(lineno));
    }
    std::vector<double> feats;
    feats.reserve(feature_idx.size());
    for (int c : feature_idx) feats.push_back(cells[static_cast<std::size_t>(c)]);
    rows.push_back(std::move(feats));
    targets.push_back(cells[static_cast<std::size_t>(target_idx)]);
    if (region_idx >= 0) {
      regions.push_back(static_cast<int>(cells[static_cast<std::size_t>(region_idx)]));
    }
  }
  if (rows.empty()) {
    throw DataError("load_csv: no data rows in " + path);
  }

  LabeledDataset ds;
  ds.xs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_idx.size()));
  ds.ys.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < feature_idx.size(); ++j) {
      ds.xs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    ds.ys(static_cast<Eigen::Index>(i)) = targets[i];
  }
  ds.region_labels = std::move(regions);
  return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("save_csv: cannot open " + path);
  }
  for (int j = 0; j < ds.d(); ++j) {
    out << 'x' << (j + 1) << ',';
  }
  out << 'y';
  if (ds.has_labels()) out << ",region";
  out << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.d(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.xs(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ds.ys(i));
    out << buf;
    if (ds.has_labels()) out << ',' << ds.region_labels[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

ScaleParams fit_feature_scaling(const LabeledDataset& train) {
  if (train.n() == 0) {
    throw InvalidInputError("fit_feature_scaling: empty dataset");
  }
  return {train.xs.colwise().minCoeff(), train.xs.colwise().maxCoeff()};
}

LabeledDataset apply_feature_scaling(const LabeledDataset& ds, const ScaleParams& params) {
  LabeledDataset out = ds;
  for (int j = 0; j < ds.d(); ++j) {
    const double lo = params.min(j);
    const double span = params.max(j) - lo;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      double v = span > 0.0 ? (ds.xs(i, j) - lo) / span : 0.5;
      out.xs(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

TargetScale fit_target_scaling(const LabeledDataset& train) {
  if (train.n() < 1) {
    throw InvalidInputError("fit_target_scaling: empty dataset");
  }
  TargetScale s;
  s.mean = train.ys.mean();
  const double var =
      (train.ys.array() - s.mean).square().sum() / std::max<double>(1.0, train.n() - 1.0);
  s.sd = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

LabeledDataset apply_target_scaling(const LabeledDataset& ds, const TargetScale& scale) {
  LabeledDataset out = ds;
  out.ys = (ds.ys.array() - scale.mean) / scale.sd;
  return out;
}

std::tuple<LabeledDataset, LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                                 const SplitSpec& spec) {
  const double total = spec.train_fraction + spec.val_fraction + spec.test_fraction;
  if (!(spec.train_fraction > 0.0) || !(spec.val_fraction > 0.0) || !(spec.test_fraction > 0.0) ||
      std::abs(total - 1.0) > 1e-9) {
    throw InvalidInputError("split: fractions must be positive and sum to 1");
  }
  const auto n = ds.n();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  RngStream rng(spec.seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  auto n_train = static_cast<Eigen::Index>(std::llround(spec.train_fraction * static_cast<double>(n)));
  auto n_val = static_cast<Eigen::Index>(std::llround(spec.val_fraction * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  auto take = [&](Eigen::Index begin, Eigen::Index count) {
    LabeledDataset part;
    part.xs.resize(count, ds.xs.cols());
    part.ys.resize(count);
    if (ds.has_labels()) part.region_labels.resize(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
      const Eigen::Index src = order[static_cast<std::size_t>(begin + i)];
      part.xs.row(i) = ds.xs.row(src);
      part.ys(i) = ds.ys(src);
      if (ds.has_labels()) {
        part.region_labels[static_cast<std::size_t>(i)] =
            ds.region_labels[static_cast<std::size_t>(src)];
      }
    }
    return part;
  };
  return {take(0, n_train), take(n_train, n_val), take(n_train + n_val, n - n_train - n_val)};
}

}  // namespace hte
