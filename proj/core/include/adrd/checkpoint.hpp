#pragma once

#include <optional>
#include <string>

#include "adrd/network.hpp"
#include "adrd/optimizer.hpp"

namespace adrd {

// Versioned container: "ADRD1" magic, the network config as key/value text,
// then one record per trainable parameter (name, shape, little-endian IEEE-754
// single-precision payload), optionally followed by Adam moments for exact
// training resumption. Round-trips are byte-exact.
void save_checkpoint(const std::string& path, const AdrdNetwork<float>& net,
                     const AdamOptimizer<float>* optimizer = nullptr);

struct LoadedCheckpoint {
  AdrdNetwork<float> net;
  std::optional<AdamSnapshot<float>> adam;
  std::int64_t global_step = 0;
};

// Throws DataError on a bad magic, unknown parameter names, shape mismatches,
// or truncation.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace adrd
