#pragma once

#include <filesystem>

#include "caada/model.hpp"

namespace caada {

// Versioned text container of named parameter matrices with shapes, plus the
// architecture header needed to rebuild the network. Floats are written in
// shortest round-trip form so save -> load -> save is byte-identical.
void save_checkpoint(CaadaModel& model, const std::filesystem::path& path);

CaadaModel load_checkpoint(const std::filesystem::path& path);

}  // namespace caada
