#pragma once

#include <string>
#include <utility>
#include <vector>

#include "slotvid/core/tensor.hpp"

namespace slotvid {

// Self-describing binary snapshot: named scalar metadata plus named f64
// tensors, all little-endian. Covers model parameters, optimizer moments,
// and whatever bookkeeping the trainer wants to stash.
struct Checkpoint {
  std::vector<std::pair<std::string, Real>> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  Real meta_value(const std::string& name) const;
  bool has_meta(const std::string& name) const;
  const Tensor* tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace slotvid
