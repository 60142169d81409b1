// Command-line surface: data generation, model fitting/prediction, repeated
// experiments, and stage traces. Configuration is a flat JSON file whose keys
// mirror the experiment settings; flags override file values; unknown keys are
// a hard error.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hte/adaptive.hpp"
#include "hte/data.hpp"
#include "hte/errors.hpp"
#include "hte/eval.hpp"
#include "hte/serialize.hpp"

namespace {

using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string>& allowed_keys() {
  static const std::set<std::string> keys = {
      "method",      "methods",    "dataset",       "target_column", "n_train",
      "n_val",       "n_test",     "noise_sd",  "repetitions",   "seed",
      "bin_widths",  "depths",     "rates",     "iters",         "h0",
      "max_stages",  "min_val_points", "clip_bound", "out_dir",  "out",
  };
  return keys;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!cfg.is_object()) {
    throw ConfigError("config must be a flat JSON object");
  }
  for (const auto& [key, value] : cfg.items()) {
    if (allowed_keys().count(key) == 0) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    (void)value;
  }
  return cfg;
}

template <class T>
void take(const json& cfg, const std::string& key, T& into) {
  if (cfg.contains(key)) {
    try {
      into = cfg.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
}

hte::Method parse_method(const std::string& name) {
  if (name == "peht") return hte::Method::peht;
  if (name == "bht") return hte::Method::bht;
  if (name == "abht") return hte::Method::abht;
  throw ConfigError("unknown method '" + name + "' (expected peht, bht, or abht)");
}

std::string method_name(hte::Method m) {
  switch (m) {
    case hte::Method::peht: return "peht";
    case hte::Method::bht: return "bht";
    case hte::Method::abht: return "abht";
  }
  return "?";
}

// Flag values win over config-file values; CLI11 only records flags the user
// actually passed.
struct Overrides {
  CLI::App* cmd;
  json& cfg;

  void apply(const std::string& flag, const std::string& key, const json& value) const {
    if (cmd->count(flag) > 0) cfg[key] = value;
  }
};

hte::ExperimentConfig experiment_config(const json& cfg) {
  hte::ExperimentConfig out;
  std::string method = "abht";
  take(cfg, "method", method);
  out.method = parse_method(method);
  take(cfg, "dataset", out.dataset);
  take(cfg, "target_column", out.target_column);
  take(cfg, "n_train", out.n_train);
  take(cfg, "n_val", out.n_val);
  take(cfg, "n_test", out.n_test);
  take(cfg, "noise_sd", out.noise_sd);
  take(cfg, "repetitions", out.repetitions);
  take(cfg, "seed", out.seed);
  take(cfg, "bin_widths", out.bin_widths);
  take(cfg, "depths", out.depths);
  take(cfg, "rates", out.rates);
  take(cfg, "iters", out.iters);
  take(cfg, "h0", out.h0);
  take(cfg, "max_stages", out.max_stages);
  take(cfg, "min_val_points", out.min_val_points);
  take(cfg, "clip_bound", out.clip_bound);
  if (out.bin_widths.empty() && out.depths.empty()) {
    throw ConfigError("one of bin_widths/depths must be set");
  }
  if (out.iters.empty()) {
    throw ConfigError("iters must be set");
  }
  if (out.method != hte::Method::peht && out.rates.empty()) {
    throw ConfigError("rates must be set for bht/abht");
  }
  return out;
}

int cmd_gen(const json& cfg, const std::string& case_name, int n, const std::string& out_path) {
  if (case_name != "A" && case_name != "B") {
    throw ConfigError("case must be A or B");
  }
  std::uint64_t seed = 0;
  double noise_sd = 0.01;
  take(cfg, "seed", seed);
  take(cfg, "noise_sd", noise_sd);
  hte::RngStream rng(seed);
  const hte::LabeledDataset ds =
      case_name == "A" ? hte::gen_case_a(n, noise_sd, rng) : hte::gen_case_b(n, noise_sd, rng);
  hte::save_csv(ds, out_path);
  std::cout << "wrote " << ds.n() << " rows to " << out_path << "\n";
  return 0;
}

int cmd_fit(const json& cfg, const std::string& train_path, const std::string& val_path,
            const std::string& out_path) {
  hte::ExperimentConfig ec = experiment_config(cfg);
  const hte::LabeledDataset train = hte::load_csv(train_path, ec.target_column);
  const hte::LabeledDataset val =
      val_path.empty() ? train : hte::load_csv(val_path, ec.target_column);
  const double clip = ec.clip_bound > 0.0 ? ec.clip_bound : train.ys.cwiseAbs().maxCoeff();
  const bool binary = !ec.depths.empty();
  hte::RngStream rng(ec.seed);

  hte::AnyModel model = [&]() -> hte::AnyModel {
    switch (ec.method) {
      case hte::Method::peht:
        if (binary) {
          return hte::grid_search_peht_binary(train, val, ec.depths, ec.iters, clip, rng).model;
        }
        return hte::grid_search_peht(train, val, ec.bin_widths, ec.iters, clip, rng).model;
      case hte::Method::bht:
        if (binary) {
          return hte::grid_search_bht_binary(train, val, ec.depths, ec.rates, ec.iters, clip, 10,
                                             rng)
              .model;
        }
        return hte::grid_search_bht(train, val, ec.bin_widths, ec.rates, ec.iters, clip, 10, rng)
            .model;
      case hte::Method::abht:
      default: {
        hte::AbhtConfig acfg;
        acfg.h0 = ec.h0;
        acfg.max_stages = ec.max_stages;
        acfg.min_val_points = ec.min_val_points;
        acfg.clip_bound = clip;
        if (binary) {
          return hte::fit_abht_binary(train, val, ec.depths, ec.rates, ec.iters, acfg, rng);
        }
        hte::AbhtGrids grids{ec.bin_widths, ec.rates, ec.iters};
        return hte::fit_abht(train, val, grids, acfg, rng);
      }
    }
  }();
  hte::save_model(model, out_path);
  std::cout << "wrote " << method_name(ec.method) << " model to " << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& target_column, const std::string& out_path) {
  const hte::AnyModel model = hte::load_model(model_path);
  const hte::LabeledDataset ds = hte::load_csv(data_path, target_column);
  if (hte::model_dim(model) != ds.d()) {
    throw hte::DataError("predict: model expects dimension " +
                         std::to_string(hte::model_dim(model)) + ", data has " +
                         std::to_string(ds.d()));
  }
  Eigen::VectorXd preds(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    preds(i) = hte::predict_any(model, ds.xs.row(i).transpose());
  }
  std::ofstream out(out_path);
  if (!out) {
    throw hte::DataError("predict: cannot open " + out_path);
  }
  out << "prediction\n";
  char buf[40];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", preds(i));
    out << buf << '\n';
  }
  std::cout << "mse " << hte::mse(preds, ds.ys) << ", wrote " << out_path << "\n";
  return 0;
}

int cmd_experiment(const json& cfg, const std::string& out_dir, bool dry_run) {
  std::vector<std::string> methods;
  if (cfg.contains("methods")) {
    take(cfg, "methods", methods);
  } else {
    std::string method = "abht";
    take(cfg, "method", method);
    methods.push_back(method);
  }
  if (methods.empty()) {
    throw ConfigError("methods must be nonempty");
  }
  std::filesystem::create_directories(out_dir);
  for (const std::string& name : methods) {
    json one = cfg;
    one.erase("methods");
    one["method"] = name;
    const hte::ExperimentConfig ec = experiment_config(one);
    if (dry_run) {
      std::cout << "would run " << name << " on " << ec.dataset << ": " << ec.repetitions
                << " repetitions, n=" << ec.n_train << "/" << ec.n_val << "/" << ec.n_test
                << ", seed " << ec.seed << "\n";
      continue;
    }
    const hte::ExperimentResult result = hte::run_experiment(ec);
    const std::string report = out_dir + "/" + name + ".csv";
    const std::string raw = out_dir + "/" + name + "_raw.csv";
    hte::write_report_csv(result, report);
    hte::write_raw_csv(result, raw);
    std::cout << name << ": mean MSE " << result.overall.mean << " over "
              << result.overall.repetitions << " repetitions -> " << report << "\n";
    for (const hte::RepetitionOutcome& rep : result.reps) {
      if (!rep.ok) {
        std::cerr << name << " repetition " << rep.repetition << " failed: " << rep.error << "\n";
      }
    }
  }
  return 0;
}

json interval_list(const hte::RegionPartition& r) {
  std::vector<hte::CellIndex> cells(r.active.begin(), r.active.end());
  std::sort(cells.begin(), cells.end());
  json out = json::array();
  for (const hte::CellIndex& cell : cells) {
    json box = json::array();
    for (std::int64_t i : cell) {
      box.push_back({static_cast<double>(i) * r.cell_width,
                     static_cast<double>(i + 1) * r.cell_width});
    }
    // 1-D traces read as a flat [lo, hi) list.
    out.push_back(cell.size() == 1 ? box.at(0) : box);
  }
  return out;
}

int cmd_trace(const json& cfg, const std::string& out_path) {
  json one = cfg;
  one["method"] = "abht";
  const hte::ExperimentConfig ec = experiment_config(one);
  if (!ec.depths.empty()) {
    throw ConfigError("trace supports the grid flavor only (bin_widths)");
  }
  if (ec.dataset != "case_a" && ec.dataset != "case_b") {
    throw ConfigError("trace expects a synthetic dataset (case_a or case_b)");
  }
  hte::RngStream base(ec.seed);
  hte::RngStream rep = base.substream(0);
  hte::RngStream s_train = rep.substream(0);
  hte::RngStream s_val = rep.substream(1);
  hte::RngStream s_test = rep.substream(2);
  auto gen = ec.dataset == "case_a" ? hte::gen_case_a : hte::gen_case_b;
  const hte::LabeledDataset train = gen(ec.n_train, ec.noise_sd, s_train);
  const hte::LabeledDataset val = gen(ec.n_val, ec.noise_sd, s_val);
  const hte::LabeledDataset test = gen(ec.n_test, ec.noise_sd, s_test);

  hte::AbhtConfig acfg;
  acfg.h0 = ec.h0;
  acfg.max_stages = ec.max_stages;
  acfg.min_val_points = ec.min_val_points;
  acfg.clip_bound = ec.clip_bound > 0.0 ? ec.clip_bound : train.ys.cwiseAbs().maxCoeff();
  hte::AbhtGrids grids{ec.bin_widths, ec.rates, ec.iters};
  const hte::ABHTModel model = hte::fit_abht(train, val, grids, acfg, rep.substream(3));

  std::ofstream out(out_path);
  if (!out) {
    throw hte::DataError("trace: cannot open " + out_path);
  }
  for (const hte::StageRecord& rec : model.stages) {
    Eigen::VectorXd preds(test.n());
    for (Eigen::Index i = 0; i < test.n(); ++i) {
      preds(i) = hte::predict_abht_partial(model, test.xs.row(i).transpose(), rec.stage);
    }
    const hte::RegionMSEReport report = hte::region_mse(preds, test.ys, test.region_labels);
    json per_region = json::object();
    for (const auto& [region, score] : report.per_region) {
      per_region[std::to_string(region)] = score.mse;
    }
    json line = {{"stage", rec.stage},
                 {"bin_width", rec.chosen_bin_width},
                 {"rate", rec.chosen_rate},
                 {"iters", rec.chosen_iters},
                 {"stopped", interval_list(rec.stopped)},
                 {"starved", interval_list(rec.starved_coarse)},
                 {"starved_fine", interval_list(rec.starved_fine)},
                 {"cumulative_mse", report.overall_mse},
                 {"cumulative_region_mse", std::move(per_region)}};
    out << line.dump() << '\n';
  }
  std::cout << "wrote " << model.stages.size() << " stage records to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histogram-transform ensemble regression toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_flag = 0;
  int threads = 1;
  app.add_option("--config", config_path, "flat JSON config file");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed_flag, "seed override");
  app.add_option("--threads", threads, "worker cap (currently single-threaded)");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset CSV");
  std::string gen_case = "A";
  int gen_n = 1000;
  std::string gen_out = "data.csv";
  double gen_noise = 0.01;
  gen->add_option("--case", gen_case, "A or B");
  gen->add_option("--n", gen_n, "number of rows");
  gen->add_option("--noise-sd", gen_noise, "noise standard deviation");
  gen->add_option("--out", gen_out, "output CSV path");

  auto* fit = app.add_subcommand("fit", "fit a model and serialize it");
  std::string fit_method;
  std::string fit_train;
  std::string fit_val;
  std::string fit_out = "model.json";
  fit->add_option("--method", fit_method, "peht, bht, or abht");
  fit->add_option("--train", fit_train, "training CSV")->required();
  fit->add_option("--val", fit_val, "validation CSV (defaults to training data)");
  fit->add_option("--out", fit_out, "model output path");

  auto* predict = app.add_subcommand("predict", "predict with a serialized model");
  std::string pred_model;
  std::string pred_data;
  std::string pred_target = "y";
  std::string pred_out = "predictions.csv";
  predict->add_option("--model", pred_model, "model file")->required();
  predict->add_option("--data", pred_data, "input CSV")->required();
  predict->add_option("--target-column", pred_target, "target column name");
  predict->add_option("--out", pred_out, "predictions CSV path");

  auto* experiment = app.add_subcommand("experiment", "run a repeated experiment");
  bool dry_run = false;
  experiment->add_flag("--dry-run", dry_run, "print planned runs without fitting");

  auto* trace = app.add_subcommand("trace", "emit a per-stage trace of one seeded run");
  std::string trace_out = "trace.jsonl";
  trace->add_option("--out", trace_out, "JSON-lines output path");

  for (CLI::App* sub : {gen, fit, predict, experiment, trace}) {
    sub->fallthrough();  // global flags may follow the subcommand
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    json cfg = load_config(config_path);
    if (app.count("--seed") > 0) cfg["seed"] = seed_flag;
    if (gen->parsed()) {
      if (gen->count("--noise-sd") > 0) cfg["noise_sd"] = gen_noise;
      return cmd_gen(cfg, gen_case, gen_n, gen_out);
    }
    if (fit->parsed()) {
      if (fit->count("--method") > 0) cfg["method"] = fit_method;
      return cmd_fit(cfg, fit_train, fit_val, fit_out);
    }
    if (predict->parsed()) {
      return cmd_predict(pred_model, pred_data, pred_target, pred_out);
    }
    if (experiment->parsed()) {
      return cmd_experiment(cfg, out_dir, dry_run);
    }
    if (trace->parsed()) {
      return cmd_trace(cfg, trace_out);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hte::InvalidInputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hte::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const hte::SerializationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
