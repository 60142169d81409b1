#include "hte/transform.hpp"

#include <cmath>

#include "hte/errors.hpp"
#include "hte/rotation.hpp"

namespace hte {

HistogramTransform sample_transform(double bin_width, int d, RngStream& rng) {
  if (!(bin_width > 0.0)) {
    throw InvalidInputError("sample_transform: bin_width must be positive");
  }
  HistogramTransform t;
  t.rotation = sample_rotation(d, rng);
  t.bin_width = bin_width;
  t.translation.resize(d);
  for (int i = 0; i < d; ++i) {
    t.translation(i) = rng.next_uniform();
  }
  return t;
}

Eigen::VectorXd apply(const HistogramTransform& t, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != t.rotation.cols()) {
    throw InvalidInputError("apply: dimension mismatch");
  }
  if (!x.allFinite()) {
    throw InvalidInputError("apply: non-finite input");
  }
  return t.stretch() * (t.rotation * x) + t.translation;
}

BinKey bin_key(const HistogramTransform& t, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::VectorXd h = apply(t, x);
  BinKey key(static_cast<std::size_t>(h.size()));
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    key[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(h(i)));
  }
  return key;
}

}  // namespace hte
