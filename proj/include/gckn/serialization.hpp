#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gckn/model.hpp"
#include "gckn/svm.hpp"

namespace gckn {

inline constexpr int kModelSchemaVersion = 1;

/// Versioned JSON; matrices are base64 little-endian binary64.
std::string model_to_json(const GcknModel& model, const LinearClassifier* classifier = nullptr);
GcknModel model_from_json(const std::string& text);
std::optional<LinearClassifier> classifier_from_json(const std::string& text);

void save_model(const GcknModel& model, const std::filesystem::path& file, const LinearClassifier* classifier = nullptr);
GcknModel load_model(const std::filesystem::path& file);
std::optional<LinearClassifier> load_classifier(const std::filesystem::path& file);

}  // namespace gckn
