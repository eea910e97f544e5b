#pragma once

#include <string>

#include "limekit/blackbox.hpp"

namespace limekit {

/// Serializes a built-in model (logistic, stump forest, MLP) to a JSON
/// document: architecture tag plus flat parameter arrays. Custom black boxes
/// carry no parameters and cannot be saved.
std::string model_to_json(const BlackBox& model);
void save_model_json(const std::string& path, const BlackBox& model);

/// Reconstructs a black box from its JSON document. Gold features and
/// smoothness are recomputed from the parameters, so a round-trip yields an
/// identical predictor.
BlackBox load_model_json(const std::string& path);
BlackBox model_from_json(const std::string& text);

}  // namespace limekit
