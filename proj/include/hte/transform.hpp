#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hte/rng.hpp"

namespace hte {

/// The affine map H(x) = s R x + b with s = 1 / bin_width. Immutable after
/// construction; apply/bin_key are pure.
struct HistogramTransform {
  Eigen::MatrixXd rotation;     // R, orthogonal with det +1
  Eigen::VectorXd translation;  // b, componentwise in [0, 1)
  double bin_width = 1.0;       // h; stretch is derived as 1 / h

  double stretch() const { return 1.0 / bin_width; }
  int dim() const { return static_cast<int>(rotation.rows()); }
};

/// Integer bin indices floor(H(x)); equal keys identify the same input cell.
using BinKey = std::vector<std::int64_t>;

struct BinKeyHash {
  std::size_t operator()(const BinKey& k) const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::int64_t v : k) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001B3ULL;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

HistogramTransform sample_transform(double bin_width, int d, RngStream& rng);

Eigen::VectorXd apply(const HistogramTransform& t, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Componentwise floor of apply(t, x). Points with H(x) exactly integral go
/// to the upper cell (floor semantics).
BinKey bin_key(const HistogramTransform& t, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace hte
