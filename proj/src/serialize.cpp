#include "hte/serialize.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hte/errors.hpp"

namespace hte {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.size();
  if (rows == 0) return {};
  const auto cols = j.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j.at(i).at(c).get<double>();
    }
  }
  return m;
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

json to_json(const HistogramTransform& t) {
  return {{"rotation", to_json(t.rotation)},
          {"translation", to_json(t.translation)},
          {"bin_width", t.bin_width}};
}

HistogramTransform transform_from(const json& j) {
  HistogramTransform t;
  t.rotation = matrix_from(j.at("rotation"));
  t.translation = vector_from(j.at("translation"));
  t.bin_width = j.at("bin_width").get<double>();
  return t;
}

json to_json(const HTRegressor& r) {
  json keys = json::array();
  json vals = json::array();
  // Stable order so the serialized form (and its checksum) is deterministic.
  std::vector<const BinKey*> sorted;
  sorted.reserve(r.values.size());
  for (const auto& kv : r.values) sorted.push_back(&kv.first);
  std::sort(sorted.begin(), sorted.end(),
            [](const BinKey* a, const BinKey* b) { return *a < *b; });
  for (const BinKey* k : sorted) {
    keys.push_back(*k);
    vals.push_back(r.values.at(*k));
  }
  return {{"transform", to_json(r.transform)},
          {"keys", std::move(keys)},
          {"vals", std::move(vals)},
          {"clip_bound", r.clip_bound},
          {"default_value", r.default_value}};
}

HTRegressor ht_from(const json& j) {
  HTRegressor r;
  r.transform = transform_from(j.at("transform"));
  r.clip_bound = j.at("clip_bound").get<double>();
  r.default_value = j.at("default_value").get<double>();
  const json& keys = j.at("keys");
  const json& vals = j.at("vals");
  if (keys.size() != vals.size()) {
    throw SerializationError("model file: keys/vals length mismatch");
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    r.values.emplace(keys.at(i).get<BinKey>(), vals.at(i).get<double>());
  }
  return r;
}

json to_json(const BinaryPartition& p) {
  json nodes = json::array();
  for (const BinarySplit& s : p.nodes) {
    nodes.push_back({{"coord", s.coord}, {"threshold", s.threshold}});
  }
  return {{"dim", p.dim}, {"depth", p.depth}, {"nodes", std::move(nodes)}};
}

BinaryPartition partition_from(const json& j) {
  BinaryPartition p;
  p.dim = j.at("dim").get<int>();
  p.depth = j.at("depth").get<int>();
  for (const json& n : j.at("nodes")) {
    p.nodes.push_back({n.at("coord").get<int>(), n.at("threshold").get<double>()});
  }
  if (static_cast<int>(p.nodes.size()) != (1 << p.depth) - 1) {
    throw SerializationError("model file: binary partition node count mismatch");
  }
  return p;
}

json to_json(const BinaryHistRegressor& r) {
  return {{"partition", to_json(r.partition)},
          {"values", r.values},
          {"occupied", r.occupied},
          {"clip_bound", r.clip_bound},
          {"default_value", r.default_value}};
}

BinaryHistRegressor binary_from(const json& j) {
  BinaryHistRegressor r;
  r.partition = partition_from(j.at("partition"));
  r.values = j.at("values").get<std::vector<double>>();
  r.occupied = j.at("occupied").get<std::vector<char>>();
  r.clip_bound = j.at("clip_bound").get<double>();
  r.default_value = j.at("default_value").get<double>();
  return r;
}

template <class Learner>
json boosted_to_json(const BoostedModel<Learner>& m) {
  json learners = json::array();
  for (const Learner& l : m.learners) learners.push_back(to_json(l));
  return {{"learners", std::move(learners)},
          {"learning_rate", m.learning_rate},
          {"clip_bound", m.clip_bound},
          {"mse_trace", m.mse_trace},
          {"truncated", m.truncated}};
}

template <class Learner, class FromJson>
BoostedModel<Learner> boosted_from(const json& j, FromJson&& from) {
  BoostedModel<Learner> m;
  for (const json& l : j.at("learners")) m.learners.push_back(from(l));
  m.learning_rate = j.at("learning_rate").get<double>();
  m.clip_bound = j.at("clip_bound").get<double>();
  m.mse_trace = j.at("mse_trace").get<std::vector<double>>();
  m.truncated = j.at("truncated").get<bool>();
  return m;
}

json to_json(const RegionPartition& r) {
  std::vector<CellIndex> cells(r.active.begin(), r.active.end());
  std::sort(cells.begin(), cells.end());
  return {{"cell_width", r.cell_width}, {"dim", r.dim}, {"cells", cells}};
}

RegionPartition region_from(const json& j) {
  RegionPartition r;
  r.cell_width = j.at("cell_width").get<double>();
  r.dim = j.at("dim").get<int>();
  for (const json& c : j.at("cells")) r.active.insert(c.get<CellIndex>());
  return r;
}

json to_json(const StageRecord& rec) {
  json keys = json::array();
  json vals = json::array();
  std::vector<const CellIndex*> sorted;
  sorted.reserve(rec.per_cell_choice.size());
  for (const auto& kv : rec.per_cell_choice) sorted.push_back(&kv.first);
  std::sort(sorted.begin(), sorted.end(),
            [](const CellIndex* a, const CellIndex* b) { return *a < *b; });
  for (const CellIndex* k : sorted) {
    keys.push_back(*k);
    vals.push_back(rec.per_cell_choice.at(*k));
  }
  return {{"stage", rec.stage},
          {"chosen_bin_width", rec.chosen_bin_width},
          {"chosen_iters", rec.chosen_iters},
          {"chosen_rate", rec.chosen_rate},
          {"boosted", boosted_to_json(rec.boosted)},
          {"entry", to_json(rec.entry)},
          {"stopped", to_json(rec.stopped)},
          {"starved_coarse", to_json(rec.starved_coarse)},
          {"starved_fine", to_json(rec.starved_fine)},
          {"choice_keys", std::move(keys)},
          {"choice_vals", std::move(vals)}};
}

StageRecord stage_from(const json& j) {
  StageRecord rec;
  rec.stage = j.at("stage").get<int>();
  rec.chosen_bin_width = j.at("chosen_bin_width").get<double>();
  rec.chosen_iters = j.at("chosen_iters").get<int>();
  rec.chosen_rate = j.at("chosen_rate").get<double>();
  rec.boosted = boosted_from<HTRegressor>(j.at("boosted"), ht_from);
  rec.entry = region_from(j.at("entry"));
  rec.stopped = region_from(j.at("stopped"));
  rec.starved_coarse = region_from(j.at("starved_coarse"));
  rec.starved_fine = region_from(j.at("starved_fine"));
  const json& keys = j.at("choice_keys");
  const json& vals = j.at("choice_vals");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    rec.per_cell_choice.emplace(keys.at(i).get<CellIndex>(), vals.at(i).get<double>());
  }
  return rec;
}

json payload_of(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BHTModel>) {
          return {{"kind", "bht"}, {"model", boosted_to_json(m)}};
        } else if constexpr (std::is_same_v<T, BinaryBHTModel>) {
          return {{"kind", "bht_binary"}, {"model", boosted_to_json(m)}};
        } else if constexpr (std::is_same_v<T, PEHTModel>) {
          json members = json::array();
          for (const HTRegressor& r : m.members) members.push_back(to_json(r));
          return {{"kind", "peht"}, {"model", {{"members", std::move(members)}}}};
        } else if constexpr (std::is_same_v<T, BinaryPEHTModel>) {
          json members = json::array();
          for (const BinaryHistRegressor& r : m.members) members.push_back(to_json(r));
          return {{"kind", "peht_binary"}, {"model", {{"members", std::move(members)}}}};
        } else if constexpr (std::is_same_v<T, ABHTModel>) {
          json stages = json::array();
          for (const StageRecord& rec : m.stages) stages.push_back(to_json(rec));
          return {{"kind", "abht"},
                  {"model",
                   {{"stages", std::move(stages)},
                    {"clip_bound", m.clip_bound},
                    {"dim", m.dim},
                    {"used_training_fallback", m.used_training_fallback}}}};
        } else {
          static_assert(std::is_same_v<T, ABHTBinaryModel>);
          json stages = json::array();
          for (const BinaryStageRecord& rec : m.stages) {
            stages.push_back({{"stage", rec.stage},
                              {"chosen_depth", rec.chosen_depth},
                              {"chosen_iters", rec.chosen_iters},
                              {"chosen_rate", rec.chosen_rate},
                              {"boosted", boosted_to_json(rec.boosted)},
                              {"stopped_leaves", rec.stopped_leaves}});
          }
          return {{"kind", "abht_binary"},
                  {"model",
                   {{"reference", to_json(m.reference)},
                    {"stages", std::move(stages)},
                    {"clip_bound", m.clip_bound},
                    {"dim", m.dim},
                    {"used_training_fallback", m.used_training_fallback}}}};
        }
      },
      model);
}

AnyModel model_of(const json& payload) {
  const std::string kind = payload.at("kind").get<std::string>();
  const json& j = payload.at("model");
  if (kind == "bht") {
    return boosted_from<HTRegressor>(j, ht_from);
  }
  if (kind == "bht_binary") {
    return boosted_from<BinaryHistRegressor>(j, binary_from);
  }
  if (kind == "peht") {
    PEHTModel m;
    for (const json& r : j.at("members")) m.members.push_back(ht_from(r));
    return m;
  }
  if (kind == "peht_binary") {
    BinaryPEHTModel m;
    for (const json& r : j.at("members")) m.members.push_back(binary_from(r));
    return m;
  }
  if (kind == "abht") {
    ABHTModel m;
    for (const json& rec : j.at("stages")) m.stages.push_back(stage_from(rec));
    m.clip_bound = j.at("clip_bound").get<double>();
    m.dim = j.at("dim").get<int>();
    m.used_training_fallback = j.at("used_training_fallback").get<bool>();
    return m;
  }
  if (kind == "abht_binary") {
    ABHTBinaryModel m;
    m.reference = partition_from(j.at("reference"));
    for (const json& rec : j.at("stages")) {
      BinaryStageRecord r;
      r.stage = rec.at("stage").get<int>();
      r.chosen_depth = rec.at("chosen_depth").get<int>();
      r.chosen_iters = rec.at("chosen_iters").get<int>();
      r.chosen_rate = rec.at("chosen_rate").get<double>();
      r.boosted = boosted_from<BinaryHistRegressor>(rec.at("boosted"), binary_from);
      r.stopped_leaves = rec.at("stopped_leaves").get<std::vector<char>>();
      m.stages.push_back(std::move(r));
    }
    m.clip_bound = j.at("clip_bound").get<double>();
    m.dim = j.at("dim").get<int>();
    m.used_training_fallback = j.at("used_training_fallback").get<bool>();
    return m;
  }
  throw SerializationError("model file: unknown kind '" + kind + "'");
}

}  // namespace

void save_model(const AnyModel& model, const std::string& path) {
  json payload = payload_of(model);
  const std::string body = payload.dump();
  json doc = {{"format_version", kFormatVersion},
              {"checksum", fnv1a(body)},
              {"payload", std::move(payload)}};
  std::ofstream out(path);
  if (!out) {
    throw SerializationError("save_model: cannot open " + path);
  }
  out << doc.dump(1) << '\n';
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SerializationError("load_model: cannot open " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SerializationError(std::string("load_model: malformed JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw SerializationError("load_model: unsupported format version " +
                               std::to_string(version));
    }
    const std::uint64_t stored = doc.at("checksum").get<std::uint64_t>();
    const std::uint64_t actual = fnv1a(doc.at("payload").dump());
    if (stored != actual) {
      throw SerializationError("load_model: checksum mismatch (corrupt file)");
    }
    return model_of(doc.at("payload"));
  } catch (const json::exception& e) {
    throw SerializationError(std::string("load_model: malformed model file: ") + e.what());
  }
}

double predict_any(const AnyModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BHTModel> || std::is_same_v<T, BinaryBHTModel>) {
          return predict_boosted(m, x);
        } else if constexpr (std::is_same_v<T, PEHTModel> || std::is_same_v<T, BinaryPEHTModel>) {
          return predict_peht(m, x);
        } else if constexpr (std::is_same_v<T, ABHTModel>) {
          return predict_abht(m, x);
        } else {
          return predict_abht_binary(m, x);
        }
      },
      model);
}

int model_dim(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BHTModel>) {
          return m.learners.empty() ? 0 : m.learners.front().transform.dim();
        } else if constexpr (std::is_same_v<T, BinaryBHTModel>) {
          return m.learners.empty() ? 0 : m.learners.front().partition.dim;
        } else if constexpr (std::is_same_v<T, PEHTModel>) {
          return m.members.empty() ? 0 : m.members.front().transform.dim();
        } else if constexpr (std::is_same_v<T, BinaryPEHTModel>) {
          return m.members.empty() ? 0 : m.members.front().partition.dim;
        } else if constexpr (std::is_same_v<T, ABHTModel>) {
          return m.dim;
        } else {
          return m.dim;
        }
      },
      model);
}

}  // namespace hte
