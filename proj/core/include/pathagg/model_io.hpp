#pragma once

#include <iosfwd>
#include <string>

#include "pathagg/training.hpp"

namespace pathagg {

inline constexpr const char* kModelFormat = "pathagg-model";
inline constexpr int kModelVersion = 1;

// JSON document with the alphabet, topology, probability rows, caps,
// regression, metadata, and training trace. Doubles are written in their
// shortest round-trip form, so save then load is bit-exact.
std::string model_to_json(const TrainedModel& model);

// Throws ParseError for malformed or truncated text, IncompatibleVersion for
// another format version, and InvalidConfiguration when the stored model
// violates an invariant.
TrainedModel model_from_json(const std::string& text);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace pathagg
