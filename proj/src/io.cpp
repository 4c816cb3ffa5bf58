// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/io.hpp"

#include <array>
#include <fstream>

namespace wg::io {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
  static const auto table = make_crc_table();
  return table;
}

}  // namespace

void Crc32::update(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  const auto& table = crc_table();
  for (std::size_t i = 0; i < n; ++i) state_ = table[(state_ ^ p[i]) & 0xffu] ^ (state_ >> 8);
}

std::uint32_t crc32(const void* data, std::size_t n) {
  Crc32 c;
  c.update(data, n);
  return c.value();
}

void Writer::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void Reader::bytes(void* out, std::size_t n) {
  if (pos_ + n > size_)
    throw TruncatedError(origin_ + ": truncated at byte " + std::to_string(pos_) + " (want " +
                         std::to_string(n) + " more of " + std::to_string(size_) + ")");
  std::memcpy(out, data_ + pos_, n);
  pos_ += n;
}

std::uint8_t Reader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}
std::uint16_t Reader::u16() {
  std::uint16_t v;
  bytes(&v, 2);
  return v;
}
std::uint32_t Reader::u32() {
  std::uint32_t v;
  bytes(&v, 4);
  return v;
}
std::uint64_t Reader::u64() {
  std::uint64_t v;
  bytes(&v, 8);
  return v;
}
float Reader::f32() {
  float v;
  bytes(&v, 4);
  return v;
}
double Reader::f64() {
  double v;
  bytes(&v, 8);
  return v;
}
std::string Reader::str(std::size_t n) {
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  f.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> buf(n);
  if (n > 0) f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (!f) throw IoError("failed reading '" + path + "'");
  return buf;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  if (!bytes.empty())
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace wg::io
