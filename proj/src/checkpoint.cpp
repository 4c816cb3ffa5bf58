// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "wildground/io.hpp"

namespace wg {

namespace {
constexpr char kMagic[] = "WGCKPT1";
constexpr std::size_t kMagicLen = 7;
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& records) {
  io::Writer w;
  w.bytes(kMagic, kMagicLen);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, rec] : records) {
    if (shape_numel(rec.shape) != static_cast<std::int64_t>(rec.values.size()))
      throw ShapeError("checkpoint record '" + name + "': " + std::to_string(rec.values.size()) +
                       " values for shape " + shape_str(rec.shape));
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.str(name);
    w.u32(static_cast<std::uint32_t>(rec.shape.size()));
    for (auto d : rec.shape) w.u64(static_cast<std::uint64_t>(d));
    for (double v : rec.values) w.f64(v);
  }
  io::write_file(path, w.buffer());
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = io::read_file(path);
  io::Reader r(bytes.data(), bytes.size(), path);
  const std::string magic = r.str(kMagicLen);
  if (magic != kMagic)
    throw FormatError(path + ": bad checkpoint magic '" + magic + "'");
  const std::uint32_t count = r.u32();
  Checkpoint out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t ndim = r.u32();
    CheckpointRecord rec;
    rec.shape.resize(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) rec.shape[d] = static_cast<std::int64_t>(r.u64());
    const auto n = static_cast<std::size_t>(shape_numel(rec.shape));
    rec.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) rec.values[j] = r.f64();
    out.emplace(std::move(name), std::move(rec));
  }
  return out;
}

double pack_u64(std::uint64_t v) { return std::bit_cast<double>(v); }
std::uint64_t unpack_u64(double d) { return std::bit_cast<std::uint64_t>(d); }

}  // namespace wg
