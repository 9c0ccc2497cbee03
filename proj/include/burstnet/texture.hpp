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
#include <vector>

#include "burstnet/rng.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

/// Gaussian-smoothed white noise, rescaled to mean 0.5 and the given
/// standard deviation, clamped to [0,1]. Single channel.
inline std::vector<double> smooth_noise(int height, int width, double sigma, double stddev, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(height) * width);
  for (double& x : v) x = normal(rng);
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(2 * r + 1);
  double ks = 0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
  for (double& x : k) x /= ks;
  std::vector<double> tmp(v.size());
  // Wrap-around borders keep the statistics stationary.
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * v[static_cast<std::size_t>(y) * width + (x + i + width * 8) % width];
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[static_cast<std::size_t>((y + i + height * 8) % height) * width + x];
      v[static_cast<std::size_t>(y) * width + x] = acc;
    }
  double mean = 0, sq = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / v.size());
  for (double& x : v) x = std::clamp(0.5 + (x - mean) * (sd > 0 ? stddev / sd : 0.0), 0.0, 1.0);
  return v;
}

/// Gray frame cropped from a larger plane at (top, left).
inline Frame crop_plane(const std::vector<double>& plane, int plane_width, int top, int left, int height, int width) {
  Frame f(height, width, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      f.at(y, x) = static_cast<float>(plane[static_cast<std::size_t>(top + y) * plane_width + left + x]);
  return f;
}

}  // namespace burstnet
