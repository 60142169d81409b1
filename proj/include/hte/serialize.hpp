#pragma once

#include <string>
#include <variant>

#include <Eigen/Dense>

#include "hte/adaptive.hpp"
#include "hte/boosting.hpp"
#include "hte/parallel.hpp"

namespace hte {

/// Every model kind the CLI can fit, save, and load.
using AnyModel = std::variant<BHTModel, PEHTModel, ABHTModel, BinaryBHTModel, BinaryPEHTModel,
                              ABHTBinaryModel>;

/// Versioned JSON with a payload checksum; loading verifies both and a
/// round-trip reproduces predictions exactly (doubles are serialized
/// shortest-round-trip).
void save_model(const AnyModel& model, const std::string& path);

AnyModel load_model(const std::string& path);

double predict_any(const AnyModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Input dimension the model expects.
int model_dim(const AnyModel& model);

}  // namespace hte
