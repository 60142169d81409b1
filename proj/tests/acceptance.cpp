// Acceptance harness: one criterion per invocation (argv[1] in 1..6), one
// PASS/FAIL line per criterion on stdout, nonzero exit on failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hte/adaptive.hpp"
#include "hte/base_learners.hpp"
#include "hte/data.hpp"
#include "hte/eval.hpp"
#include "hte/parallel.hpp"
#include "hte/regions.hpp"
#include "hte/rotation.hpp"

using namespace hte;

namespace {

struct Checker {
  bool ok = true;
  std::ostringstream detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      detail << "  failed: " << what << "\n";
    }
  }
};

// The 1-D experiment settings used throughout: a seven-value bandwidth grid,
// five rates, four iteration budgets.
const std::vector<double> kWidths1d{1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1};
const std::vector<double> kWidths2d{2e-2, 5e-2, 1e-1};
const std::vector<double> kRates{0.01, 0.02, 0.05, 0.1, 0.2};
const std::vector<int> kIters{20, 50, 100, 200};

ExperimentConfig base_config(Method method, const std::string& dataset) {
  ExperimentConfig cfg;
  cfg.method = method;
  cfg.dataset = dataset;
  cfg.bin_widths = dataset == "case_b" ? kWidths2d : kWidths1d;
  cfg.rates = kRates;
  cfg.iters = kIters;
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4e", v);
  return buf;
}

bool criterion_1() {
  Checker c;
  ExperimentConfig peht = base_config(Method::peht, "case_a");
  ExperimentConfig bht = base_config(Method::bht, "case_a");
  ExperimentConfig abht = base_config(Method::abht, "case_a");
  for (ExperimentConfig* cfg : {&peht, &bht, &abht}) {
    cfg->n_train = 1000;
    cfg->n_val = 1000;
    cfg->n_test = 10000;
    cfg->repetitions = 30;
    cfg->seed = 20210;
  }
  const ExperimentResult rp = run_experiment(peht);
  const ExperimentResult rb = run_experiment(bht);
  const ExperimentResult ra = run_experiment(abht);
  c.require(ra.overall.repetitions == 30 && rb.overall.repetitions == 30 &&
                rp.overall.repetitions == 30,
            "all repetitions completed");
  c.detail << "  overall MSE: adaptive " << fmt(ra.overall.mean) << ", boosted "
           << fmt(rb.overall.mean) << ", parallel " << fmt(rp.overall.mean) << "\n";
  c.require(ra.overall.mean < rb.overall.mean, "adaptive < boosted overall");
  c.require(ra.overall.mean < rp.overall.mean, "adaptive < parallel overall");
  const double rough_p = rp.per_region.at(0).mean;
  const double rough_a = ra.per_region.at(0).mean;
  c.detail << "  rough-region MSE: parallel " << fmt(rough_p) << ", adaptive " << fmt(rough_a)
           << " (ratio " << fmt(rough_p / rough_a) << ")\n";
  c.require(rough_p >= 2.0 * rough_a, "parallel rough-region MSE at least twice adaptive");
  c.require(ra.overall.mean >= 1.500e-4 / 2.0 && ra.overall.mean <= 1.500e-4 * 2.0,
            "adaptive overall within a factor of 2 of 1.500e-4");
  c.require(rb.overall.mean >= 1.687e-4 / 2.0 && rb.overall.mean <= 1.687e-4 * 2.0,
            "boosted overall within a factor of 2 of 1.687e-4");
  c.require(rp.overall.mean >= 2.589e-4 / 2.0 && rp.overall.mean <= 2.589e-4 * 2.0,
            "parallel overall within a factor of 2 of 2.589e-4");
  std::cout << c.detail.str();
  return c.ok;
}

bool criterion_2() {
  Checker c;
  ExperimentConfig peht = base_config(Method::peht, "case_b");
  ExperimentConfig abht = base_config(Method::abht, "case_b");
  for (ExperimentConfig* cfg : {&peht, &abht}) {
    cfg->n_train = 5000;
    cfg->n_val = 5000;
    cfg->n_test = 20000;
    cfg->repetitions = 10;
    cfg->seed = 20220;
  }
  const ExperimentResult rp = run_experiment(peht);
  const ExperimentResult ra = run_experiment(abht);
  c.require(ra.overall.repetitions == 10 && rp.overall.repetitions == 10,
            "all repetitions completed");
  c.detail << "  overall MSE: adaptive " << fmt(ra.overall.mean) << ", parallel "
           << fmt(rp.overall.mean) << "\n";
  c.require(ra.overall.mean < rp.overall.mean, "adaptive < parallel overall");
  const double rough_p = rp.per_region.at(0).mean;
  const double rough_a = ra.per_region.at(0).mean;
  c.detail << "  rough-block MSE: parallel " << fmt(rough_p) << ", adaptive " << fmt(rough_a)
           << " (ratio " << fmt(rough_p / rough_a) << ")\n";
  c.require(rough_p / rough_a >= 1.3, "rough-block ratio at least 1.3");
  std::cout << c.detail.str();
  return c.ok;
}

bool criterion_3() {
  Checker c;
  std::vector<double> peht_means, abht_means;
  for (int n : {1000, 3000, 10000}) {
    ExperimentConfig peht = base_config(Method::peht, "case_a");
    ExperimentConfig abht = base_config(Method::abht, "case_a");
    for (ExperimentConfig* cfg : {&peht, &abht}) {
      cfg->n_train = n;
      cfg->n_val = 1000;
      cfg->n_test = 10000;
      cfg->repetitions = 5;
      cfg->seed = 20230;
    }
    peht_means.push_back(run_experiment(peht).overall.mean);
    abht_means.push_back(run_experiment(abht).overall.mean);
    c.detail << "  n=" << n << ": adaptive " << fmt(abht_means.back()) << ", parallel "
             << fmt(peht_means.back()) << "\n";
  }
  for (std::size_t i = 1; i < 3; ++i) {
    c.require(peht_means[i] <= peht_means[i - 1], "parallel MSE nonincreasing in n");
    c.require(abht_means[i] <= abht_means[i - 1], "adaptive MSE nonincreasing in n");
  }
  const double ratio_small = peht_means.front() / abht_means.front();
  const double ratio_large = peht_means.back() / abht_means.back();
  c.detail << "  parallel/adaptive ratio: " << fmt(ratio_small) << " at n=1000, "
           << fmt(ratio_large) << " at n=10000\n";
  c.require(ratio_large <= ratio_small, "gap narrows as n grows");
  std::cout << c.detail.str();
  return c.ok;
}

bool criterion_4() {
  Checker c;
  int smooth_ok = 0;
  bool rough_ok = true;
  const int num_seeds = 10;
  for (int seed = 0; seed < num_seeds; ++seed) {
    RngStream rep = RngStream(20240).substream(static_cast<std::uint64_t>(seed));
    RngStream s_train = rep.substream(0);
    RngStream s_val = rep.substream(1);
    const LabeledDataset train = gen_case_a(1000, 0.01, s_train);
    const LabeledDataset val = gen_case_a(1000, 0.01, s_val);
    AbhtGrids grids{kWidths1d, kRates, kIters};
    AbhtConfig cfg;
    const ABHTModel m = fit_abht(train, val, grids, cfg, rep.substream(3));

    bool smooth_stopped = true;
    for (int k = 1; k < 500; ++k) {
      Eigen::VectorXd x(1);
      x << 0.5 + 0.5 * static_cast<double>(k) / 500.0;
      bool stopped = false;
      for (const StageRecord& rec : m.stages) {
        if (rec.stage > 2) break;
        if (rec.stops(x)) {
          stopped = true;
          break;
        }
      }
      smooth_stopped = smooth_stopped && stopped;
    }
    if (smooth_stopped) ++smooth_ok;

    const StageRecord& first = m.stages.front();
    for (int k = 1; k < 500; ++k) {
      Eigen::VectorXd x(1);
      x << 0.125 * static_cast<double>(k) / 500.0;
      if (first.stopped.contains(x)) {
        rough_ok = false;
        c.detail << "  seed " << seed << ": rough point " << x(0)
                 << " converged at stage 1\n";
        break;
      }
    }
  }
  c.detail << "  smooth interval fully stopped within two stages in " << smooth_ok << "/"
           << num_seeds << " runs\n";
  c.require(smooth_ok >= 7, "smooth interval stopped early in at least 7 of 10 runs");
  c.require(rough_ok, "no rough-interval point converged at stage 1");
  std::cout << c.detail.str();
  return c.ok;
}

bool criterion_5() {
  Checker c;

  // sampled rotations stay orthogonal with unit determinant
  for (int d = 1; d <= 8; ++d) {
    RngStream rng(500 + static_cast<std::uint64_t>(d));
    double worst_orth = 0.0, worst_det = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::MatrixXd r = sample_rotation(d, rng);
      worst_orth = std::max(
          worst_orth,
          (r.transpose() * r - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff());
      worst_det = std::max(worst_det, std::abs(r.determinant() - 1.0));
    }
    c.require(worst_orth <= 1e-10, "orthogonality at dimension " + std::to_string(d));
    c.require(worst_det <= 1e-10, "determinant at dimension " + std::to_string(d));
  }
  {
    // planar rotation angle is uniform (KS at alpha = 0.01)
    RngStream rng(510);
    const int n = 10000;
    std::vector<double> u(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd r = sample_rotation(2, rng);
      double theta = std::atan2(r(1, 0), r(0, 0));
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      u[static_cast<std::size_t>(i)] = theta / (2.0 * std::numbers::pi);
    }
    std::sort(u.begin(), u.end());
    double dstat = 0.0;
    for (int i = 0; i < n; ++i) {
      dstat = std::max({dstat, u[static_cast<std::size_t>(i)] - static_cast<double>(i) / n,
                        static_cast<double>(i + 1) / n - u[static_cast<std::size_t>(i)]});
    }
    c.require(dstat < 1.628 / std::sqrt(static_cast<double>(n)), "angle uniformity (KS)");
  }
  {
    // grid and binary partitions assign each point to exactly one cell
    RngStream rng(520);
    const RegionPartition grid = initial_partition(2, 0.15);
    RngStream prng(521);
    const BinaryPartition tree = sample_binary_partition(2, 5, prng);
    bool cover = true;
    for (int rep = 0; rep < 10000; ++rep) {
      Eigen::VectorXd x(2);
      x << rng.next_uniform(), rng.next_uniform();
      cover = cover && grid.contains(x) && grid.active.count(grid.cell_of(x)) == 1;
      const int leaf = tree.leaf_id(x);
      cover = cover && leaf >= 0 && leaf < tree.num_leaves() && leaf == tree.leaf_id(x);
    }
    Eigen::VectorXd corner(2);
    corner << 1.0, 1.0;  // the top face belongs to the last cell
    cover = cover && grid.contains(corner);
    c.require(cover, "partition disjoint cover");
  }
  {
    // fitted cell values match a brute-force group-by-mean-clip oracle
    RngStream rng(530);
    bool match = true;
    for (int rep = 0; rep < 100 && match; ++rep) {
      const int d = 1 + static_cast<int>(rng.next_below(3));
      const int n = 5 + static_cast<int>(rng.next_below(196));
      Eigen::MatrixXd xs(n, d);
      Eigen::VectorXd ys(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) xs(i, j) = rng.next_uniform();
        ys(i) = 2.0 * rng.next_gaussian();
      }
      RngStream trng = rng.substream(static_cast<std::uint64_t>(rep));
      const HistogramTransform t = sample_transform(0.05 + 0.2 * rng.next_uniform(), d, trng);
      const double clip = 0.5 + rng.next_uniform();
      const HTRegressor m = fit_ht(xs, ys, t, clip);
      for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0;
        int count = 0;
        const BinKey key = bin_key(t, xs.row(i).transpose());
        for (Eigen::Index k = 0; k < n; ++k) {
          if (bin_key(t, xs.row(k).transpose()) == key) {
            sum += ys(k);
            ++count;
          }
        }
        const double mean = std::clamp(sum / count, -clip, clip);
        match = match && std::abs(m.values.at(key) - mean) <= 1e-12 * std::max(1.0, std::abs(mean));
      }
    }
    c.require(match, "cell means equal the brute-force oracle");
  }
  {
    // boosting traces never increase; constant targets decay geometrically
    RngStream rng(540);
    bool mono = true;
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::MatrixXd xs(60, 1);
      Eigen::VectorXd ys(60);
      for (int i = 0; i < 60; ++i) {
        xs(i, 0) = rng.next_uniform();
        ys(i) = std::sin(7.0 * xs(i, 0)) + 0.1 * rng.next_gaussian();
      }
      BoostConfig bc;
      bc.learning_rate = 0.2;
      bc.max_iters = 12;
      bc.clip_bound = 2.0;
      const auto [model, resid] = fit_bht(xs, ys, 0.07, bc, RngStream(541, rep));
      for (std::size_t t = 1; t < model.mse_trace.size(); ++t) {
        mono = mono && model.mse_trace[t] <= model.mse_trace[t - 1];
      }
    }
    c.require(mono, "training error trace nonincreasing");

    Eigen::MatrixXd xs(40, 1);
    for (int i = 0; i < 40; ++i) xs(i, 0) = rng.next_uniform();
    const double cval = 0.6;
    const Eigen::VectorXd ys = Eigen::VectorXd::Constant(40, cval);
    BoostConfig bc;
    bc.learning_rate = 0.2;
    bc.max_iters = 5;
    bc.clip_bound = 1.0;
    const auto [model, resid] = fit_bht(xs, ys, 0.1, bc, RngStream(542));
    bool decay = model.mse_trace.size() == 5;
    for (int t = 1; t <= 5 && decay; ++t) {
      const double expected = cval * cval * std::pow(0.8, 2 * t);
      decay = std::abs(model.mse_trace[static_cast<std::size_t>(t - 1)] - expected) < 1e-10;
    }
    c.require(decay, "constant-target geometric decay");
  }
  {
    // one-stage adaptive fits coincide with plain boosted fits
    bool agree = true;
    for (std::uint64_t seed = 0; seed < 20 && agree; ++seed) {
      RngStream s_train = RngStream(550 + seed).substream(0);
      RngStream s_val = RngStream(550 + seed).substream(1);
      const LabeledDataset train = gen_case_a(150, 0.01, s_train);
      const LabeledDataset val = gen_case_a(150, 0.01, s_val);
      AbhtGrids grids{{0.05}, {0.1}, {15}};
      AbhtConfig cfg;
      cfg.max_stages = 1;
      cfg.clip_bound = 2.0;
      const ABHTModel m = fit_abht(train, val, grids, cfg, RngStream(seed, 55));
      BoostConfig bc;
      bc.learning_rate = 0.1;
      bc.max_iters = 15;
      bc.clip_bound = 2.0;
      const auto [direct, resid] =
          fit_bht(train.xs, train.ys, 0.05, bc, abht_candidate_stream(RngStream(seed, 55), 1, 0));
      RngStream probe(seed);
      for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd x(1);
        x << probe.next_uniform();
        agree = agree && std::abs(predict_abht(m, x) - predict_boosted(direct, x)) < 1e-12;
      }
    }
    c.require(agree, "one-stage adaptive equals plain boosting");
  }
  {
    // ensemble output equals the mean of its members
    RngStream rng(560);
    bool identity = true;
    for (int rep = 0; rep < 50 && identity; ++rep) {
      LabeledDataset ds;
      ds.xs.resize(50, 1);
      ds.ys.resize(50);
      for (int i = 0; i < 50; ++i) {
        ds.xs(i, 0) = rng.next_uniform();
        ds.ys(i) = rng.next_gaussian();
      }
      const PEHTModel m = fit_peht(ds, 0.1, 6, 3.0, RngStream(561, rep));
      for (int q = 0; q < 20; ++q) {
        Eigen::VectorXd x(1);
        x << rng.next_uniform();
        double sum = 0.0;
        for (const HTRegressor& member : m.members) sum += predict_ht(member, x);
        identity = identity && std::abs(predict_peht(m, x) - sum / 6.0) < 1e-12;
      }
    }
    c.require(identity, "ensemble mean identity");
  }
  {
    // repeated experiment runs with one seed produce identical report bytes
    ExperimentConfig cfg = base_config(Method::bht, "case_a");
    cfg.bin_widths = {0.05, 0.1};
    cfg.rates = {0.1, 0.2};
    cfg.iters = {10, 20};
    cfg.n_train = 200;
    cfg.n_val = 200;
    cfg.n_test = 500;
    cfg.repetitions = 2;
    cfg.seed = 570;
    write_report_csv(run_experiment(cfg), "determinism_a.csv");
    write_report_csv(run_experiment(cfg), "determinism_b.csv");
    std::ifstream fa("determinism_a.csv"), fb("determinism_b.csv");
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    c.require(!sa.str().empty() && sa.str() == sb.str(), "experiment reports byte-identical");
    std::remove("determinism_a.csv");
    std::remove("determinism_b.csv");
  }
  std::cout << c.detail.str();
  return c.ok;
}

bool criterion_6() {
  Checker c;
  // 2000-row tabular dataset, eight features on assorted scales, mixed-
  // smoothness response; regenerated deterministically if absent.
  const std::string path = "tabular_synthetic.csv";
  {
    RngStream rng(20260);
    LabeledDataset ds;
    const int n = 2000;
    ds.xs.resize(n, 8);
    ds.ys.resize(n);
    const double lo[8] = {0, -5, 10, 0, 0, -1, 100, 0};
    const double span[8] = {1, 10, 90, 2, 1, 2, 50, 4};
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd u(8);
      for (int j = 0; j < 8; ++j) {
        u(j) = rng.next_uniform();
        ds.xs(i, j) = lo[j] + span[j] * u(j);
      }
      const double rough = 0.1 * ((static_cast<int>(std::floor(u(3) * 25.0)) % 2 == 0) ? 1 : -1);
      ds.ys(i) = u(0) * u(1) + std::sin(3.0 * u(2)) + std::cbrt(u(4)) +
                 (u(5) > 0.5 ? 0.5 : 0.0) + rough + 0.05 * rng.next_gaussian();
    }
    save_csv(ds, path);
  }

  ExperimentConfig peht;
  peht.method = Method::peht;
  ExperimentConfig abht;
  abht.method = Method::abht;
  for (ExperimentConfig* cfg : {&peht, &abht}) {
    cfg->dataset = path;
    cfg->depths = {4, 6, 8};
    cfg->rates = {0.05, 0.1, 0.2};
    cfg->iters = {20, 50, 100};
    cfg->repetitions = 3;
    cfg->seed = 20261;
    cfg->max_stages = 3;
  }
  const ExperimentResult rp = run_experiment(peht);
  const ExperimentResult ra = run_experiment(abht);
  for (const ExperimentResult* r : {&rp, &ra}) {
    for (const RepetitionOutcome& rep : r->reps) {
      c.require(rep.ok, "repetition completed (" + rep.error + ")");
    }
  }
  c.detail << "  test MSE: adaptive " << fmt(ra.overall.mean) << ", parallel "
           << fmt(rp.overall.mean) << "\n";
  c.require(ra.overall.mean <= 1.05 * rp.overall.mean,
            "adaptive within 5 percent of parallel on tabular data");
  std::cout << c.detail.str();
  std::remove(path.c_str());
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <criterion 1..6>\n";
    return 2;
  }
  const int crit = std::atoi(argv[1]);
  bool ok = false;
  switch (crit) {
    case 1: ok = criterion_1(); break;
    case 2: ok = criterion_2(); break;
    case 3: ok = criterion_3(); break;
    case 4: ok = criterion_4(); break;
    case 5: ok = criterion_5(); break;
    case 6: ok = criterion_6(); break;
    default:
      std::cerr << "unknown criterion " << crit << "\n";
      return 2;
  }
  std::cout << "criterion " << crit << ": " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}
