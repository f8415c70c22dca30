#pragma once

#include <filesystem>

#include "sapp/model.hpp"

namespace sapp {

// Checkpoint directory layout (version 1):
//
//   manifest.tsv   first line "sapp-checkpoint<TAB>1", then one row per
//                  parameter or buffer: name<TAB>dims<TAB>layer<TAB>file
//                  where dims is comma-separated and layer is the hook
//                  layer preceding the parameter (0-4)
//   pNNNN.sapp     values as a float32 SAPP tensor of shape
//                  (dims[0], dims[1], product of remaining dims)
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(ModelGraph& model, const std::filesystem::path& dir);

/// Loads values into a model built from the same config. Throws FormatError
/// on a missing parameter or shape mismatch.
void load_checkpoint(ModelGraph& model, const std::filesystem::path& dir);

}  // namespace sapp
