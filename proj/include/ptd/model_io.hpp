#pragma once

#include <filesystem>

#include "ptd/model.hpp"

namespace ptd {

// JSON file holding the model section of the configuration and every
// parameter by name. Loading rebuilds the model from the stored configuration
// and checks that names and shapes match.
void save_model(const PtdModel& model, const std::filesystem::path& path);
PtdModel load_model(const std::filesystem::path& path);

}  // namespace ptd
