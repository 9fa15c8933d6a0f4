#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lengthlogd/ensemble.hpp"

namespace lengthlogd {

/// JSON document holding everything needed to predict: format version,
/// schema, thresholds, scalers, all base models, meta and fixed weights,
/// adaptive alpha and training metadata. Numbers are written in shortest
/// round-trip form, so save -> load reproduces predictions bit for bit.
std::string save_model(const LengthLogDModel& model);

/// Throws DataError on malformed documents or an unsupported version.
LengthLogDModel load_model(std::string_view text);

void save_model_file(const LengthLogDModel& model, const std::filesystem::path& path);
LengthLogDModel load_model_file(const std::filesystem::path& path);

}  // namespace lengthlogd
