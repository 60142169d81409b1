#include "hte/parallel.hpp"

#include <numeric>

#include "hte/errors.hpp"
#include "hte/transform.hpp"

namespace hte {

PEHTModel fit_peht(const LabeledDataset& train, double bin_width, int num_members,
                   double clip_bound, RngStream rng) {
  return fit_peht(train, std::vector<double>{bin_width}, std::vector<int>{num_members}, clip_bound,
                  rng);
}

PEHTModel fit_peht(const LabeledDataset& train, const std::vector<double>& bin_widths,
                   const std::vector<int>& counts, double clip_bound, RngStream rng) {
  if (train.n() == 0) {
    throw InvalidInputError("fit_peht: empty training set");
  }
  if (bin_widths.empty() || bin_widths.size() != counts.size()) {
    throw InvalidInputError("fit_peht: bin_widths and counts must match and be nonempty");
  }
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  if (total < 1) {
    throw InvalidInputError("fit_peht: ensemble size must be >= 1");
  }
  PEHTModel model;
  model.members.reserve(static_cast<std::size_t>(total));
  int member = 0;
  for (std::size_t k = 0; k < bin_widths.size(); ++k) {
    if (counts[k] < 0) {
      throw InvalidInputError("fit_peht: negative member count");
    }
    for (int t = 0; t < counts[k]; ++t, ++member) {
      RngStream stream = rng.substream(member);
      const HistogramTransform transform = sample_transform(bin_widths[k], train.d(), stream);
      model.members.push_back(fit_ht(train.xs, train.ys, transform, clip_bound));
    }
  }
  return model;
}

BinaryPEHTModel fit_peht_binary(const LabeledDataset& train, int depth, int num_members,
                                double clip_bound, RngStream rng) {
  if (train.n() == 0) {
    throw InvalidInputError("fit_peht_binary: empty training set");
  }
  if (num_members < 1) {
    throw InvalidInputError("fit_peht_binary: ensemble size must be >= 1");
  }
  BinaryPEHTModel model;
  model.members.reserve(static_cast<std::size_t>(num_members));
  for (int t = 0; t < num_members; ++t) {
    RngStream stream = rng.substream(t);
    const BinaryPartition partition = sample_binary_partition(train.d(), depth, stream);
    model.members.push_back(fit_binary(train.xs, train.ys, partition, clip_bound));
  }
  return model;
}

namespace {

template <class Model, class Predict>
double mean_prediction(const Model& m, Predict&& predict) {
  // Compensated sum: ensembles can be large and member outputs similar.
  double sum = 0.0;
  double comp = 0.0;
  for (const auto& member : m.members) {
    const double term = predict(member) - comp;
    const double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return sum / static_cast<double>(m.members.size());
}

}  // namespace

double predict_peht(const PEHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (m.members.empty()) {
    throw InvalidInputError("predict_peht: empty ensemble");
  }
  return mean_prediction(m, [&](const HTRegressor& r) { return predict_ht(r, x); });
}

double predict_peht(const BinaryPEHTModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (m.members.empty()) {
    throw InvalidInputError("predict_peht: empty ensemble");
  }
  return mean_prediction(m, [&](const BinaryHistRegressor& r) { return predict_binary(r, x); });
}

}  // namespace hte
