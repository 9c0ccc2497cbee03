/**
 * Copyright 2026 The burstnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Binary tensor format, little-endian:
//   "BTSR" | u8 version=1 | u8 dtype=0 (f32) | u8 ndim | u8 reserved=0
//   ndim x u32 dimensions
//   u8 role count, then count x u8 role codes (count 0 for raw tensors)
//   row-major f32 payload
//
// A bundle ("BTSB") holds named tensors, used for model parameters:
//   "BTSB" | u8 version=1 | u32 entry count
//   per entry: u16 name length, name bytes, u64 record length, BTSR record

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

inline constexpr char kTensorMagic[4] = {'B', 'T', 'S', 'R'};
inline constexpr char kBundleMagic[4] = {'B', 'T', 'S', 'B'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::size_t offset = 0) : data_(data), pos_(offset) {}
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return data_[pos_++];
  }
  std::uint64_t le(int n, const char* what) {
    need(n, what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline void encode_tensor(const Tensor& t, detail::ByteWriter& w) {
  if (t.dims.empty() || t.dims.size() > 255) throw DimensionError("tensor rank must be in [1,255]");
  if (t.data.size() != t.element_count()) throw DimensionError("tensor payload does not match dimensions");
  if (t.roles.size() > 255) throw ContractError("role block longer than 255");
  w.bytes(kTensorMagic, 4);
  w.u8(kTensorVersion);
  w.u8(kDtypeF32);
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  w.u8(0);
  for (auto d : t.dims) w.u32(d);
  w.u8(static_cast<std::uint8_t>(t.roles.size()));
  for (auto r : t.roles) w.u8(static_cast<std::uint8_t>(r));
  for (float v : t.data) w.f32(v);
}

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  detail::ByteWriter w;
  encode_tensor(t, w);
  return std::move(w.buffer());
}

inline Tensor decode_tensor(detail::ByteReader& r) {
  const std::size_t start = r.pos();
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kTensorMagic, 4) != 0) throw FormatError("bad magic", start);
  if (auto v = r.u8("version"); v != kTensorVersion)
    throw FormatError("unsupported version " + std::to_string(v), r.pos() - 1);
  if (auto d = r.u8("dtype"); d != kDtypeF32) throw FormatError("unsupported dtype " + std::to_string(d), r.pos() - 1);
  const std::uint8_t ndim = r.u8("ndim");
  if (ndim == 0) throw FormatError("zero rank", r.pos() - 1);
  if (r.u8("reserved") != 0) throw FormatError("reserved byte not zero", r.pos() - 1);
  Tensor t;
  for (int i = 0; i < ndim; ++i) t.dims.push_back(r.u32("dimensions"));
  const std::uint8_t nroles = r.u8("role count");
  for (int i = 0; i < nroles; ++i) {
    const auto code = r.u8("role block");
    if (!is_valid_role_code(code)) throw FormatError("unknown role code " + std::to_string(code), r.pos() - 1);
    t.roles.push_back(static_cast<ChannelRole>(code));
  }
  const std::size_t n = t.element_count();
  r.need(n * 4, "payload");
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(r.u32("payload"));
  return t;
}

inline Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  Tensor t = decode_tensor(r);
  if (r.remaining() != 0) throw FormatError("trailing bytes after payload", r.pos());
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  detail::write_file_bytes(path, encode_tensor(t));
}

inline Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(detail::read_file_bytes(path)); }

inline void write_stack(const std::filesystem::path& path, const ChannelStack& s) { write_tensor(path, s.to_tensor()); }

inline ChannelStack read_stack(const std::filesystem::path& path) { return ChannelStack::from_tensor(read_tensor(path)); }

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void write_bundle(const std::filesystem::path& path, const NamedTensors& entries) {
  detail::ByteWriter w;
  w.bytes(kBundleMagic, 4);
  w.u8(kTensorVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    const auto rec = encode_tensor(t);
    w.u64(rec.size());
    w.bytes(rec.data(), rec.size());
  }
  detail::write_file_bytes(path, w.buffer());
}

inline NamedTensors read_bundle(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes);
  auto magic = r.take(4, "bundle magic");
  if (std::memcmp(magic.data(), kBundleMagic, 4) != 0) throw FormatError("bad bundle magic", 0);
  if (auto v = r.u8("bundle version"); v != kTensorVersion) throw FormatError("unsupported bundle version", 4);
  const auto count = r.u32("entry count");
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u16("name length");
    auto name = r.take(len, "name");
    const auto rec_len = r.u64("record length");
    const std::size_t rec_start = r.pos();
    auto rec = r.take(rec_len, "record");
    detail::ByteReader sub(bytes, rec_start);
    Tensor t = decode_tensor(sub);
    if (sub.pos() != rec_start + rec.size()) throw FormatError("record length mismatch", rec_start);
    out.emplace_back(std::string(name.begin(), name.end()), std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after bundle", r.pos());
  return out;
}

}  // namespace burstnet
