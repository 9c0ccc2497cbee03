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
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "burstnet/color.hpp"
#include "burstnet/error.hpp"
#include "burstnet/rng.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

struct AugmentConfig {
  using Range = std::pair<double, double>;

  double flip_prob = 0.5;
  /// Each of hue, saturation, brightness and contrast is applied independently.
  double color_prob = 0.5;
  double zoom_prob = 0.5;
  Range hue_delta{-0.08, 0.08};
  Range saturation{0.6, 1.6};
  Range brightness{-0.05, 0.05};
  Range contrast{0.7, 1.3};
  Range zoom_fraction{0.02, 0.10};
  std::uint64_t seed = 0;

  void validate() const {
    for (double p : {flip_prob, color_prob, zoom_prob})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0, 1]");
    for (const Range& r : {hue_delta, saturation, brightness, contrast, zoom_fraction})
      if (!(r.first <= r.second) || !std::isfinite(r.first) || !std::isfinite(r.second))
        throw ConfigError("augmentation range must satisfy lo <= hi");
    if (saturation.first < 0.0 || contrast.first < 0.0) throw ConfigError("augmentation factors must be non-negative");
    if (zoom_fraction.first < 0.0 || zoom_fraction.second >= 1.0) throw ConfigError("zoom fraction must lie in [0, 1)");
  }
};

/// Parameters of one color jitter; the defaults are the identity.
struct ColorJitter {
  double hue_delta = 0.0;
  double saturation = 1.0;
  double brightness = 0.0;
  double contrast = 1.0;

  bool identity() const { return hue_delta == 0.0 && saturation == 1.0 && brightness == 0.0 && contrast == 1.0; }
};

/// Everything drawn for one sample.
struct AugmentDraw {
  bool flip = false;
  ColorJitter color;
  bool zoom = false;
  int crop_height = 0, crop_width = 0, crop_top = 0, crop_left = 0;
};

namespace detail {

// Jitters channels [offset, offset+3) of an interleaved buffer in place.
inline void jitter_triplet(std::span<float> data, int channels, int offset, const ColorJitter& j) {
  if (j.identity()) return;
  const std::size_t n = data.size() / static_cast<std::size_t>(channels);
  std::vector<double> rgb(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) rgb[3 * i + c] = data[i * channels + offset + c];
  if (j.hue_delta != 0.0 || j.saturation != 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      auto hsv = rgb_to_hsv(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
      hsv[0] += j.hue_delta;
      hsv[0] -= std::floor(hsv[0]);
      hsv[1] = std::clamp(hsv[1] * j.saturation, 0.0, 1.0);
      const auto out = hsv_to_rgb(hsv[0], hsv[1], hsv[2]);
      for (int c = 0; c < 3; ++c) rgb[3 * i + c] = out[c];
    }
  }
  if (j.brightness != 0.0)
    for (double& v : rgb) v += j.brightness;
  if (j.contrast != 1.0) {
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += rgb[3 * i + c];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) rgb[3 * i + c] = (rgb[3 * i + c] - mean) * j.contrast + mean;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) data[i * channels + offset + c] = static_cast<float>(std::clamp(rgb[3 * i + c], 0.0, 1.0));
}

inline void flip_horizontal(std::span<float> data, int height, int width, int channels) {
  for (int y = 0; y < height; ++y) {
    float* row = data.data() + static_cast<std::size_t>(y) * width * channels;
    for (int x = 0; x < width / 2; ++x)
      std::swap_ranges(row + x * channels, row + (x + 1) * channels, row + (width - 1 - x) * channels);
  }
}

inline std::vector<float> crop_resize(std::span<const float> data, int height, int width, int channels, int top,
                                      int left, int ch, int cw) {
  std::vector<float> crop(static_cast<std::size_t>(ch) * cw * channels);
  for (int y = 0; y < ch; ++y)
    std::copy_n(data.data() + (static_cast<std::size_t>(top + y) * width + left) * channels,
                static_cast<std::size_t>(cw) * channels, crop.data() + static_cast<std::size_t>(y) * cw * channels);
  return resize_interleaved<float>(crop, ch, cw, channels, height, width);
}

}  // namespace detail

/// Color jitter of an RGB frame: hue shift modulo 1, saturation scaling
/// with clamp, additive brightness, contrast about each channel's mean,
/// then a final clamp to [0, 1].
inline Frame hsv_color_jitter(const Frame& rgb, double hue_delta, double sat_factor, double bright_delta,
                              double contrast_factor) {
  if (rgb.channels() != 3) throw ChannelError("color jitter needs a 3-channel frame");
  Frame out = rgb;
  detail::jitter_triplet(out.mutable_data(), 3, 0, {hue_delta, sat_factor, bright_delta, contrast_factor});
  return out;
}

/// Draws every random quantity for one sample from a stream keyed by
/// (seed, epoch, index). All values are drawn whether or not they apply, so
/// changing one probability does not shift the others.
inline AugmentDraw draw_augmentation(const AugmentConfig& cfg, int height, int width, std::uint64_t epoch,
                                     std::uint64_t index) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, {epoch, index});
  AugmentDraw d;
  d.flip = bernoulli(rng, cfg.flip_prob);
  auto pick = [&](const AugmentConfig::Range& r, double identity) {
    const bool on = bernoulli(rng, cfg.color_prob);
    const double v = uniform(rng, r.first, r.second);
    return on ? v : identity;
  };
  d.color.hue_delta = pick(cfg.hue_delta, 0.0);
  d.color.saturation = pick(cfg.saturation, 1.0);
  d.color.brightness = pick(cfg.brightness, 0.0);
  d.color.contrast = pick(cfg.contrast, 1.0);
  d.zoom = bernoulli(rng, cfg.zoom_prob);
  const double frac = uniform(rng, cfg.zoom_fraction.first, cfg.zoom_fraction.second);
  d.crop_height = std::max(1, static_cast<int>(std::lround(height * (1.0 - frac))));
  d.crop_width = std::max(1, static_cast<int>(std::lround(width * (1.0 - frac))));
  d.crop_top = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(height - d.crop_height + 1)));
  d.crop_left = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(width - d.crop_width + 1)));
  return d;
}

/// Applies a drawn augmentation: flip of all channels, color jitter of the
/// RGB triplets only, then crop-and-resize of all channels.
inline ChannelStack apply_augmentation(const ChannelStack& stack, const AugmentDraw& d) {
  const int h = stack.height(), w = stack.width(), k = stack.channels();
  const auto& roles = stack.roles();
  if (roles.empty()) throw ContractError("augmentation needs a stack with channel roles");
  std::vector<float> data(stack.data().begin(), stack.data().end());
  if (d.flip) detail::flip_horizontal(data, h, w, k);
  for (int c = 0; c < k;) {
    if (!is_rgb_image(roles[c])) {
      ++c;
      continue;
    }
    if (c + 3 > k || roles[c + 1] != roles[c] || roles[c + 2] != roles[c])
      throw ContractError("RGB channels must come in contiguous triplets");
    detail::jitter_triplet(data, k, c, d.color);
    c += 3;
  }
  if (d.zoom && (d.crop_height != h || d.crop_width != w))
    data = detail::crop_resize(data, h, w, k, d.crop_top, d.crop_left, d.crop_height, d.crop_width);
  return ChannelStack(h, w, roles, std::move(data));
}

inline ChannelStack augment_stack(const ChannelStack& stack, const AugmentConfig& cfg, std::uint64_t epoch,
                                  std::uint64_t index) {
  return apply_augmentation(stack, draw_augmentation(cfg, stack.height(), stack.width(), epoch, index));
}

}  // namespace burstnet
