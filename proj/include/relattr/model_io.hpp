#pragma once

#include <filesystem>

#include "relattr/model.hpp"

namespace relattr {

/// Reads and validates a model file (versioned JSON with a layer list and
/// nested weight arrays). Throws ParseError / ValidationError naming the
/// offending layer index.
Model load_model(const std::filesystem::path& path);

/// Writes the model in the same format. Doubles are serialized
/// shortest-round-trip, so save -> load reproduces values exactly.
void save_model(const Model& model, const std::filesystem::path& path);

}  // namespace relattr
