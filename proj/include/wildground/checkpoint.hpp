// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "wildground/tensor.hpp"

namespace wg {

// Checkpoint: flat list of named records, magic "WGCKPT1". Besides model
// parameters it stores optimizer moments ("opt.m.<param>", "opt.v.<param>"),
// counters and RNG state as plain records, so a resumed run continues the
// exact trajectory.
struct CheckpointRecord {
  Shape shape;
  std::vector<double> values;
};

using Checkpoint = std::map<std::string, CheckpointRecord>;

void save_checkpoint(const std::string& path, const Checkpoint& records);
Checkpoint load_checkpoint(const std::string& path);

// Pack/unpack a u64 (e.g. RNG state) into a double record losslessly.
double pack_u64(std::uint64_t v);
std::uint64_t unpack_u64(double d);

}  // namespace wg
