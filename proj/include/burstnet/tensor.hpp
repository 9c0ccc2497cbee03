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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "burstnet/error.hpp"

namespace burstnet {

/// Role of one channel in a stacked input. Values are the on-disk role codes.
enum class ChannelRole : std::uint8_t {
  kRaw = 0,
  kImage1 = 1,
  kImage2 = 2,
  kImage3 = 3,
  kFlow12 = 4,
  kFlow23 = 5,
  kFlowAveraged = 6,
  kMog2 = 7,
};

inline bool is_rgb_image(ChannelRole r) {
  return r == ChannelRole::kImage1 || r == ChannelRole::kImage2 || r == ChannelRole::kImage3;
}
inline bool is_flow_image(ChannelRole r) {
  return r == ChannelRole::kFlow12 || r == ChannelRole::kFlow23 || r == ChannelRole::kFlowAveraged;
}
inline bool is_valid_role_code(std::uint8_t code) { return code <= 7; }

inline std::string_view role_name(ChannelRole r) {
  switch (r) {
    case ChannelRole::kRaw: return "raw";
    case ChannelRole::kImage1: return "image1";
    case ChannelRole::kImage2: return "image2";
    case ChannelRole::kImage3: return "image3";
    case ChannelRole::kFlow12: return "flow12";
    case ChannelRole::kFlow23: return "flow23";
    case ChannelRole::kFlowAveraged: return "flow_avg";
    case ChannelRole::kMog2: return "mog2";
  }
  return "?";
}

/// Bilinear resize of an interleaved H x W x C plane, half-pixel-center
/// alignment, edge clamped. Works for float and double.
template <class T>
std::vector<T> resize_interleaved(std::span<const T> src, int height, int width, int channels,
                                  int out_h, int out_w) {
  if (height < 1 || width < 1 || channels < 1) throw DimensionError("resize of empty image");
  if (out_h < 1 || out_w < 1) throw DimensionError("resize target must be at least 1x1");
  if (src.size() != static_cast<std::size_t>(height) * width * channels)
    throw DimensionError("resize source length mismatch");
  if (out_h == height && out_w == width) return std::vector<T>(src.begin(), src.end());

  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double s = (o + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto ty = taps(height, out_h);
  const auto tx = taps(width, out_w);
  std::vector<T> out(static_cast<std::size_t>(out_h) * out_w * channels);
  for (int y = 0; y < out_h; ++y) {
    const T* r0 = src.data() + static_cast<std::size_t>(ty[y].i0) * width * channels;
    const T* r1 = src.data() + static_cast<std::size_t>(ty[y].i1) * width * channels;
    const double fy = ty[y].f;
    for (int x = 0; x < out_w; ++x) {
      const int a = tx[x].i0 * channels, b = tx[x].i1 * channels;
      const double fx = tx[x].f;
      for (int c = 0; c < channels; ++c) {
        const double top = (1.0 - fx) * r0[a + c] + fx * r0[b + c];
        const double bot = (1.0 - fx) * r1[a + c] + fx * r1[b + c];
        out[(static_cast<std::size_t>(y) * out_w + x) * channels + c] = static_cast<T>((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

/// H x W image with 1 or 3 interleaved channels, values in [0,1].
class Frame {
 public:
  Frame() = default;
  Frame(int height, int width, int channels) : height_(height), width_(width), channels_(channels) {
    check_shape();
    data_.assign(size(), 0.0f);
  }
  Frame(int height, int width, int channels, std::vector<float> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_shape();
    if (data_.size() != size())
      throw DimensionError("frame data length " + std::to_string(data_.size()) + " != " + std::to_string(size()));
    for (float v : data_)
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) throw DataError("frame value outside [0,1]");
  }
  /// Single-channel frame filled with a constant.
  static Frame filled(int height, int width, int channels, float value) {
    Frame f(height, width, channels);
    std::fill(f.data_.begin(), f.data_.end(), value);
    return f;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return static_cast<std::size_t>(height_) * width_ * channels_; }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const& { return data_; }
  std::span<const float> data() const&& = delete;  // would dangle
  std::span<float> mutable_data() & { return data_; }

  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }

  bool operator==(const Frame&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  void check_shape() const {
    if (height_ < 1 || width_ < 1) throw DimensionError("frame must be at least 1x1");
    if (channels_ != 1 && channels_ != 3) throw ChannelError("frame must have 1 or 3 channels");
  }

  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<float> data_;
};

inline Frame resize_bilinear(const Frame& frame, int out_h, int out_w) {
  if (frame.empty()) throw DimensionError("resize of empty frame");
  auto out = resize_interleaved<float>(frame.data(), frame.height(), frame.width(), frame.channels(), out_h, out_w);
  for (float& v : out) v = std::clamp(v, 0.0f, 1.0f);
  return Frame(out_h, out_w, frame.channels(), std::move(out));
}

inline Frame rgb_to_gray(const Frame& frame) {
  if (frame.channels() != 3) throw ChannelError("rgb_to_gray expects 3 channels, got " + std::to_string(frame.channels()));
  Frame out(frame.height(), frame.width(), 1);
  const auto src = frame.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double g = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = std::clamp(static_cast<float>(g), 0.0f, 1.0f);
  }
  return out;
}

/// Gray frames pass through; colour frames are converted.
inline Frame to_gray(const Frame& frame) { return frame.channels() == 1 ? frame : rgb_to_gray(frame); }

/// Channel counts of the supported input layouts.
inline constexpr std::array<int, 7> kStackChannelCounts = {3, 4, 6, 7, 10, 13, 15};

/// Generic tensor as stored on disk: dimensions, optional role block, payload.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<ChannelRole> roles;  // empty for raw tensors
  std::vector<float> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  bool operator==(const Tensor&) const = default;
};

/// H x W x K interleaved stack with one role per channel.
class ChannelStack {
 public:
  ChannelStack() = default;
  ChannelStack(int height, int width, std::vector<ChannelRole> roles, std::vector<float> data)
      : height_(height), width_(width), roles_(std::move(roles)), data_(std::move(data)) {
    if (height_ < 1 || width_ < 1) throw DimensionError("stack must be at least 1x1");
    const int k = channels();
    if (std::find(kStackChannelCounts.begin(), kStackChannelCounts.end(), k) == kStackChannelCounts.end())
      throw ContractError("unsupported stack channel count " + std::to_string(k));
    for (auto r : roles_)
      if (r == ChannelRole::kRaw) throw ContractError("stack channel without role tag");
    if (data_.size() != static_cast<std::size_t>(height_) * width_ * k)
      throw DimensionError("stack data length mismatch");
  }

  struct Layer {
    const Frame& frame;
    ChannelRole role;
  };

  /// Concatenate frames across channels; each frame's channels share its role.
  static ChannelStack concat(std::initializer_list<Layer> layers) {
    return concat(std::span<const Layer>(layers.begin(), layers.size()));
  }
  static ChannelStack concat(std::span<const Layer> layers) {
    if (layers.size() == 0) throw ContractError("concat of zero frames");
    const int h = layers.begin()->frame.height(), w = layers.begin()->frame.width();
    std::vector<ChannelRole> roles;
    for (const auto& l : layers) {
      if (l.frame.height() != h || l.frame.width() != w) throw DimensionError("concat of frames with different sizes");
      roles.insert(roles.end(), l.frame.channels(), l.role);
    }
    const int k = static_cast<int>(roles.size());
    std::vector<float> data(static_cast<std::size_t>(h) * w * k);
    int offset = 0;
    for (const auto& l : layers) {
      const int c = l.frame.channels();
      const auto src = l.frame.data();
      for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p)
        for (int j = 0; j < c; ++j) data[p * k + offset + j] = src[p * c + j];
      offset += c;
    }
    return ChannelStack(h, w, std::move(roles), std::move(data));
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return static_cast<int>(roles_.size()); }
  const std::vector<ChannelRole>& roles() const { return roles_; }
  std::span<const float> data() const& { return data_; }
  std::span<const float> data() const&& = delete;  // would dangle
  std::span<float> mutable_data() & { return data_; }

  float at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * channels() + c]; }

  /// Channels [first, first+count) as a Frame (count 1 or 3).
  Frame slice(int first, int count) const {
    if (first < 0 || first + count > channels()) throw ChannelError("slice out of range");
    Frame f(height_, width_, count);
    auto dst = f.mutable_data();
    const int k = channels();
    for (std::size_t p = 0; p < static_cast<std::size_t>(height_) * width_; ++p)
      for (int j = 0; j < count; ++j) dst[p * count + j] = data_[p * k + first + j];
    return f;
  }

  Tensor to_tensor() const {
    return Tensor{{static_cast<std::uint32_t>(height_), static_cast<std::uint32_t>(width_),
                   static_cast<std::uint32_t>(channels())},
                  roles_, data_};
  }
  static ChannelStack from_tensor(const Tensor& t) {
    if (t.dims.size() != 3) throw DimensionError("channel stack tensor must have 3 dimensions");
    if (t.roles.size() != t.dims[2]) throw ContractError("role block length does not match channel count");
    return ChannelStack(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), t.roles, t.data);
  }

  bool operator==(const ChannelStack&) const = default;

 private:
  int height_ = 0, width_ = 0;
  std::vector<ChannelRole> roles_;
  std::vector<float> data_;
};

inline Tensor frame_to_tensor(const Frame& f, ChannelRole role) {
  return Tensor{{static_cast<std::uint32_t>(f.height()), static_cast<std::uint32_t>(f.width()),
                 static_cast<std::uint32_t>(f.channels())},
                std::vector<ChannelRole>(f.channels(), role),
                std::vector<float>(f.data().begin(), f.data().end())};
}

inline Frame frame_from_tensor(const Tensor& t) {
  if (t.dims.size() != 3) throw DimensionError("frame tensor must have 3 dimensions");
  return Frame(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]), t.data);
}

}  // namespace burstnet
