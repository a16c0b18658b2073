#pragma once

#include <string>

#include "sharplab/network.hpp"

namespace sharplab {

inline constexpr int kModelFormatVersion = 1;

/// JSON model document: {version, class_count, layers: [{rows, cols,
/// weights (row-major), bias?, activation}]}. Doubles round-trip bit-exactly
/// via shortest decimal encoding.
std::string model_to_json(const MlpNetwork& net);
MlpNetwork model_from_json(const std::string& json_text);

void save_model(const MlpNetwork& net, const std::string& path);
MlpNetwork load_model(const std::string& path);

}  // namespace sharplab
