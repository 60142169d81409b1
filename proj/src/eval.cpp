#include "hte/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "hte/errors.hpp"

namespace hte {

double mse(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
  if (preds.size() != targets.size() || preds.size() == 0) {
    throw InvalidInputError("mse: size mismatch or empty input");
  }
  return (preds - targets).squaredNorm() / static_cast<double>(preds.size());
}

RegionMSEReport region_mse(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                           const std::vector<int>& labels) {
  if (preds.size() != targets.size() || preds.size() == 0) {
    throw InvalidInputError("region_mse: size mismatch or empty input");
  }
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != preds.size()) {
    throw InvalidInputError("region_mse: label count mismatch");
  }
  RegionMSEReport report;
  report.count = preds.size();
  report.overall_mse = mse(preds, targets);
  if (!labels.empty()) {
    std::map<int, double> sums;
    std::map<int, Eigen::Index> counts;
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
      const double diff = preds(i) - targets(i);
      sums[labels[static_cast<std::size_t>(i)]] += diff * diff;
      counts[labels[static_cast<std::size_t>(i)]] += 1;
    }
    for (const auto& [region, sum] : sums) {
      report.per_region[region] = {sum / static_cast<double>(counts[region]), counts[region]};
    }
  }
  return report;
}

namespace {

std::vector<double> desc_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

template <class T>
std::vector<T> asc_sorted(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Validation MSE of every ensemble-size prefix: members are scored once and
// their predictions accumulated, so the t-grid costs one full fit per width.
template <class Model, class Predict>
std::vector<double> prefix_mses(const Model& model, const LabeledDataset& val,
                                const std::vector<int>& t_grid, Predict&& predict) {
  std::vector<double> out;
  out.reserve(t_grid.size());
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(val.n());
  std::size_t next = 0;
  for (int t = 1; t <= static_cast<int>(model.members.size()); ++t) {
    const auto& member = model.members[static_cast<std::size_t>(t - 1)];
    for (Eigen::Index i = 0; i < val.n(); ++i) {
      sums(i) += predict(member, val.xs.row(i).transpose());
    }
    while (next < t_grid.size() && t_grid[next] == t) {
      out.push_back(mse(sums / static_cast<double>(t), val.ys));
      ++next;
    }
  }
  return out;
}

}  // namespace

PehtSearchResult grid_search_peht(const LabeledDataset& train, const LabeledDataset& val,
                                  const std::vector<double>& h_grid, const std::vector<int>& t_grid,
                                  double clip_bound, RngStream rng) {
  if (h_grid.empty() || t_grid.empty()) {
    throw InvalidInputError("grid_search_peht: empty grid");
  }
  const std::vector<double> hs = desc_sorted(h_grid);
  const std::vector<int> ts = asc_sorted(t_grid);
  PehtSearchResult best;
  best.val_mse = std::numeric_limits<double>::infinity();
  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    PEHTModel full = fit_peht(train, hs[hi], ts.back(), clip_bound,
                              rng.substream(static_cast<std::uint64_t>(hi)));
    const std::vector<double> scores = prefix_mses(
        full, val, ts, [](const HTRegressor& r, const auto& x) { return predict_ht(r, x); });
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      if (scores[ti] < best.val_mse) {
        best.bin_width = hs[hi];
        best.num_members = ts[ti];
        best.val_mse = scores[ti];
        best.model.members.assign(full.members.begin(),
                                  full.members.begin() + ts[ti]);
      }
    }
  }
  return best;
}

BinaryPehtSearchResult grid_search_peht_binary(const LabeledDataset& train,
                                               const LabeledDataset& val,
                                               const std::vector<int>& depth_grid,
                                               const std::vector<int>& t_grid, double clip_bound,
                                               RngStream rng) {
  if (depth_grid.empty() || t_grid.empty()) {
    throw InvalidInputError("grid_search_peht_binary: empty grid");
  }
  const std::vector<int> ps = asc_sorted(depth_grid);  // smallest depth first on ties
  const std::vector<int> ts = asc_sorted(t_grid);
  BinaryPehtSearchResult best;
  best.val_mse = std::numeric_limits<double>::infinity();
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    BinaryPEHTModel full = fit_peht_binary(train, ps[pi], ts.back(), clip_bound,
                                           rng.substream(static_cast<std::uint64_t>(pi)));
    const std::vector<double> scores =
        prefix_mses(full, val, ts,
                    [](const BinaryHistRegressor& r, const auto& x) { return predict_binary(r, x); });
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      if (scores[ti] < best.val_mse) {
        best.depth = ps[pi];
        best.num_members = ts[ti];
        best.val_mse = scores[ti];
        best.model.members.assign(full.members.begin(),
                                  full.members.begin() + ts[ti]);
      }
    }
  }
  return best;
}

namespace {

std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return rows;
}

}  // namespace

BhtSearchResult grid_search_bht(const LabeledDataset& train, const LabeledDataset& val,
                                const std::vector<double>& h_grid,
                                const std::vector<double>& rates, const std::vector<int>& t_grid,
                                double clip_bound, int max_rejects, RngStream rng) {
  if (h_grid.empty() || rates.empty() || t_grid.empty()) {
    throw InvalidInputError("grid_search_bht: empty grid");
  }
  const std::vector<double> hs = desc_sorted(h_grid);
  const std::vector<double> rs = asc_sorted(rates);
  const std::vector<int> ts = asc_sorted(t_grid);
  const std::vector<int> rows = all_rows(train.n());
  const std::vector<int> val_rows = all_rows(val.n());

  // scores[(hi * |rs| + ri) * |ts| + ti]; the candidate models are discarded
  // and the winner refit on its own substream, which reproduces the scored
  // run exactly.
  std::vector<double> scores(hs.size() * rs.size() * ts.size());
  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    for (std::size_t ri = 0; ri < rs.size(); ++ri) {
      auto snaps = fit_bht_snapshots(train.xs, train.ys, rows, val.xs, val_rows, hs[hi], rs[ri],
                                     ts, clip_bound, max_rejects,
                                     rng.substream(hi * rs.size() + ri));
      for (std::size_t ti = 0; ti < ts.size(); ++ti) {
        scores[(hi * rs.size() + ri) * ts.size() + ti] = mse(snaps.heldout_preds[ti], val.ys);
      }
    }
  }
  BhtSearchResult best;
  best.val_mse = std::numeric_limits<double>::infinity();
  std::size_t best_hi = 0;
  std::size_t best_ri = 0;
  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      for (std::size_t ri = 0; ri < rs.size(); ++ri) {
        const double s = scores[(hi * rs.size() + ri) * ts.size() + ti];
        if (s < best.val_mse) {
          best.val_mse = s;
          best.bin_width = hs[hi];
          best.rate = rs[ri];
          best.iters = ts[ti];
          best_hi = hi;
          best_ri = ri;
        }
      }
    }
  }
  BoostConfig cfg;
  cfg.learning_rate = best.rate;
  cfg.max_iters = best.iters;
  cfg.clip_bound = clip_bound;
  cfg.max_rejects = max_rejects;
  best.model = fit_bht(train.xs, train.ys, best.bin_width, cfg,
                       rng.substream(best_hi * rs.size() + best_ri))
                   .first;
  return best;
}

BinaryBhtSearchResult grid_search_bht_binary(const LabeledDataset& train, const LabeledDataset& val,
                                             const std::vector<int>& depth_grid,
                                             const std::vector<double>& rates,
                                             const std::vector<int>& t_grid, double clip_bound,
                                             int max_rejects, RngStream rng) {
  if (depth_grid.empty() || rates.empty() || t_grid.empty()) {
    throw InvalidInputError("grid_search_bht_binary: empty grid");
  }
  const std::vector<int> ps = asc_sorted(depth_grid);
  const std::vector<double> rs = asc_sorted(rates);
  const std::vector<int> ts = asc_sorted(t_grid);
  const std::vector<int> rows = all_rows(train.n());
  const std::vector<int> val_rows = all_rows(val.n());

  std::vector<double> scores(ps.size() * rs.size() * ts.size());
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    for (std::size_t ri = 0; ri < rs.size(); ++ri) {
      auto snaps = fit_bht_binary_snapshots(train.xs, train.ys, rows, val.xs, val_rows, ps[pi],
                                            rs[ri], ts, clip_bound, max_rejects,
                                            rng.substream(pi * rs.size() + ri));
      for (std::size_t ti = 0; ti < ts.size(); ++ti) {
        scores[(pi * rs.size() + ri) * ts.size() + ti] = mse(snaps.heldout_preds[ti], val.ys);
      }
    }
  }
  BinaryBhtSearchResult best;
  best.val_mse = std::numeric_limits<double>::infinity();
  std::size_t best_pi = 0;
  std::size_t best_ri = 0;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      for (std::size_t ri = 0; ri < rs.size(); ++ri) {
        const double s = scores[(pi * rs.size() + ri) * ts.size() + ti];
        if (s < best.val_mse) {
          best.val_mse = s;
          best.depth = ps[pi];
          best.rate = rs[ri];
          best.iters = ts[ti];
          best_pi = pi;
          best_ri = ri;
        }
      }
    }
  }
  BoostConfig cfg;
  cfg.learning_rate = best.rate;
  cfg.max_iters = best.iters;
  cfg.clip_bound = clip_bound;
  cfg.max_rejects = max_rejects;
  best.model = fit_bht_binary(train.xs, train.ys, best.depth, cfg,
                              rng.substream(best_pi * rs.size() + best_ri))
                   .first;
  return best;
}

namespace {

struct RepData {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

RepData make_rep_data(const ExperimentConfig& config, const LabeledDataset* file_data,
                      RngStream& rep_stream) {
  RepData out;
  if (config.dataset == "case_a" || config.dataset == "case_b") {
    auto gen = config.dataset == "case_a" ? gen_case_a : gen_case_b;
    RngStream s_train = rep_stream.substream(0);
    RngStream s_val = rep_stream.substream(1);
    RngStream s_test = rep_stream.substream(2);
    out.train = gen(config.n_train, config.noise_sd, s_train);
    out.val = gen(config.n_val, config.noise_sd, s_val);
    out.test = gen(config.n_test, config.noise_sd, s_test);
    return out;
  }
  SplitSpec spec;
  RngStream seed_stream = rep_stream.substream(0);
  spec.seed = seed_stream.next_u64();
  auto [train, val, test] = split(*file_data, spec);
  const ScaleParams fs = fit_feature_scaling(train);
  const TargetScale tscale = fit_target_scaling(train);
  out.train = apply_target_scaling(apply_feature_scaling(train, fs), tscale);
  out.val = apply_target_scaling(apply_feature_scaling(val, fs), tscale);
  out.test = apply_target_scaling(apply_feature_scaling(test, fs), tscale);
  return out;
}

template <class Predict>
Eigen::VectorXd predict_all(const LabeledDataset& ds, Predict&& predict) {
  Eigen::VectorXd preds(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    preds(i) = predict(ds.xs.row(i).transpose());
  }
  return preds;
}

RegionMSEReport fit_and_score(const ExperimentConfig& config, const RepData& data,
                              RngStream fit_stream) {
  const bool binary = !config.depths.empty();
  const double clip =
      config.clip_bound > 0.0 ? config.clip_bound : data.train.ys.cwiseAbs().maxCoeff();
  Eigen::VectorXd preds;
  switch (config.method) {
    case Method::peht: {
      if (binary) {
        auto r = grid_search_peht_binary(data.train, data.val, config.depths, config.iters, clip,
                                         fit_stream);
        preds = predict_all(data.test, [&](const auto& x) { return predict_peht(r.model, x); });
      } else {
        auto r =
            grid_search_peht(data.train, data.val, config.bin_widths, config.iters, clip,
                             fit_stream);
        preds = predict_all(data.test, [&](const auto& x) { return predict_peht(r.model, x); });
      }
      break;
    }
    case Method::bht: {
      if (binary) {
        auto r = grid_search_bht_binary(data.train, data.val, config.depths, config.rates,
                                        config.iters, clip, 10, fit_stream);
        preds = predict_all(data.test, [&](const auto& x) { return predict_boosted(r.model, x); });
      } else {
        auto r = grid_search_bht(data.train, data.val, config.bin_widths, config.rates,
                                 config.iters, clip, 10, fit_stream);
        preds = predict_all(data.test, [&](const auto& x) { return predict_boosted(r.model, x); });
      }
      break;
    }
    case Method::abht: {
      AbhtConfig acfg;
      acfg.h0 = config.h0;
      acfg.max_stages = config.max_stages;
      acfg.min_val_points = config.min_val_points;
      acfg.clip_bound = clip;
      if (binary) {
        auto m = fit_abht_binary(data.train, data.val, config.depths, config.rates, config.iters,
                                 acfg, fit_stream);
        preds = predict_all(data.test, [&](const auto& x) { return predict_abht_binary(m, x); });
      } else {
        AbhtGrids grids{config.bin_widths, config.rates, config.iters};
        auto m = fit_abht(data.train, data.val, grids, acfg, fit_stream);
        preds = predict_all(data.test, [&](const auto& x) { return predict_abht(m, x); });
      }
      break;
    }
  }
  return region_mse(preds, data.test.ys, data.test.region_labels);
}

AggregateEntry aggregate(const std::vector<double>& values) {
  AggregateEntry entry;
  entry.repetitions = static_cast<int>(values.size());
  if (values.empty()) return entry;
  double sum = 0.0;
  for (double v : values) sum += v;
  entry.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - entry.mean) * (v - entry.mean);
    entry.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return entry;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.repetitions < 1) {
    throw InvalidInputError("run_experiment: repetitions must be >= 1");
  }
  const bool binary = !config.depths.empty();
  if (binary ? !config.bin_widths.empty() : config.bin_widths.empty()) {
    throw InvalidInputError("run_experiment: exactly one of bin_widths/depths must be set");
  }
  const bool synthetic = config.dataset == "case_a" || config.dataset == "case_b";
  LabeledDataset file_data;
  if (!synthetic) {
    file_data = load_csv(config.dataset, config.target_column);
  }

  ExperimentResult result;
  result.config = config;
  RngStream base(config.seed);
  for (int rep = 0; rep < config.repetitions; ++rep) {
    RepetitionOutcome outcome;
    outcome.repetition = rep;
    RngStream rep_stream = base.substream(static_cast<std::uint64_t>(rep));
    try {
      const RepData data = make_rep_data(config, synthetic ? nullptr : &file_data, rep_stream);
      outcome.report = fit_and_score(config, data, rep_stream.substream(3));
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
    result.reps.push_back(std::move(outcome));
  }

  std::vector<double> overall;
  std::map<int, std::vector<double>> regional;
  for (const RepetitionOutcome& rep : result.reps) {
    if (!rep.ok) continue;
    overall.push_back(rep.report.overall_mse);
    for (const auto& [region, score] : rep.report.per_region) {
      regional[region].push_back(score.mse);
    }
  }
  result.overall = aggregate(overall);
  for (const auto& [region, values] : regional) {
    result.per_region[region] = aggregate(values);
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

}  // namespace

void write_report_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("write_report_csv: cannot open " + path);
  }
  out << "region,mean_mse,sd_mse,repetitions\n";
  out << "overall," << fmt(result.overall.mean) << ',' << fmt(result.overall.sd) << ','
      << result.overall.repetitions << '\n';
  for (const auto& [region, entry] : result.per_region) {
    out << region << ',' << fmt(entry.mean) << ',' << fmt(entry.sd) << ',' << entry.repetitions
        << '\n';
  }
}

void write_raw_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("write_raw_csv: cannot open " + path);
  }
  out << "repetition,region,mse,count,error\n";
  for (const RepetitionOutcome& rep : result.reps) {
    if (!rep.ok) {
      std::string msg = rep.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << rep.repetition << ",,,," << msg << '\n';
      continue;
    }
    out << rep.repetition << ",overall," << fmt(rep.report.overall_mse) << ',' << rep.report.count
        << ",\n";
    for (const auto& [region, score] : rep.report.per_region) {
      out << rep.repetition << ',' << region << ',' << fmt(score.mse) << ',' << score.count
          << ",\n";
    }
  }
}

}  // namespace hte
