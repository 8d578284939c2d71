#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

/// Self-describing text checkpoint: versioned header, the canonical config
/// echo, scalar training state, then named arrays as
/// `array <name> <rank> <extents...>` followed by one line of values in
/// round-trip decimal form. save -> load -> save is byte-identical.
struct Checkpoint {
  int version = 1;
  std::string config_echo;
  std::size_t epoch = 0;
  std::uint64_t rng_state = 0;
  std::size_t adam_step = 0;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor* find(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace snn
