#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "tapfm/optim.hpp"
#include "tapfm/tensor.hpp"

namespace tapfm {

// Container: magic "TAPFM01", little-endian uint64 header length, JSON
// header {version, config, manifest[{name, shape, offset}]}, then the
// parameters as little-endian float32 in manifest order. Values are
// quantized to float32, so save -> load -> save is byte-identical.

struct Checkpoint {
  nlohmann::json config;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& config);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into matching parameters; every checkpoint
// tensor must exist in the store with the same shape.
void restore_params(ParamStore& store, const Checkpoint& ckpt);

}  // namespace tapfm
