#pragma once

#include <stdexcept>
#include <string>

#include "cotpot/model.hpp"

namespace cotpot::model {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Portable binary checkpoint: magic + version + ModelConfig header, then every
// tensor in declared order as little-endian 64-bit floats behind a
// (rows, cols) shape prefix. Loading rejects any config or shape mismatch.
void save_checkpoint(const Parameters& params, const std::string& path);
Parameters load_checkpoint(const std::string& path);

}  // namespace cotpot::model
