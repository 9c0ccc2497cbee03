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
#include <limits>
#include <vector>

#include "burstnet/burst.hpp"
#include "burstnet/error.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

struct Mog2Params {
  int max_components = 5;
  double learning_rate = 0.3;
  double var_threshold = 16.0;  // squared Mahalanobis distance
  double background_ratio = 0.9;
  double var_init = 0.0225;
  double var_min = 0.0004;
  double var_max = 0.25;
  double complexity_prune = 0.05;

  void validate() const {
    if (max_components < 1) throw ConfigError("mog2 max_components must be >= 1");
    if (!(learning_rate > 0 && learning_rate <= 1)) throw ConfigError("mog2 learning_rate must be in (0,1]");
    if (!(var_threshold > 0)) throw ConfigError("mog2 var_threshold must be positive");
    if (!(background_ratio > 0 && background_ratio < 1)) throw ConfigError("mog2 background_ratio must be in (0,1)");
    if (!(var_min <= var_init && var_init <= var_max && var_min > 0))
      throw ConfigError("mog2 variances must satisfy 0 < var_min <= var_init <= var_max");
    if (complexity_prune < 0) throw ConfigError("mog2 complexity_prune must be >= 0");
  }
};

struct GaussianComponent {
  double weight = 0, mean = 0, variance = 0;
};

/// Mixture at one pixel, kept sorted by weight / sqrt(variance), descending.
struct PixelMixture {
  std::vector<GaussianComponent> components;

  /// One update step; returns true when the pixel is foreground.
  bool update(double value, const Mog2Params& p) {
    auto& comps = components;
    const double alpha = p.learning_rate;

    // Closest component inside the gate, measured on the model before update.
    int match = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(comps.size()); ++k) {
      const double d = value - comps[k].mean;
      const double d2 = d * d / comps[k].variance;
      if (d2 < p.var_threshold && d2 < best) {
        best = d2;
        match = k;
      }
    }

    // Background iff the match lies in the shortest ranked prefix whose
    // cumulative weight reaches background_ratio.
    bool background = false;
    if (match >= 0) {
      double cumulative = 0;
      for (int k = 0; k < static_cast<int>(comps.size()); ++k) {
        if (k == match) {
          background = true;
          break;
        }
        cumulative += comps[k].weight;
        if (cumulative >= p.background_ratio) break;
      }
    }

    if (match >= 0) {
      for (int k = 0; k < static_cast<int>(comps.size()); ++k) {
        auto& c = comps[k];
        c.weight = (1.0 - alpha) * c.weight + (k == match ? alpha : 0.0);
      }
      auto& m = comps[match];
      const double rho = alpha / m.weight;
      const double d = value - m.mean;
      m.mean = (1.0 - rho) * m.mean + rho * value;
      m.variance = std::clamp((1.0 - rho) * m.variance + rho * d * d, p.var_min, p.var_max);
    } else {
      for (auto& c : comps) c.weight *= (1.0 - alpha);
      const GaussianComponent fresh{alpha, value, p.var_init};
      if (static_cast<int>(comps.size()) < p.max_components)
        comps.push_back(fresh);
      else
        comps.back() = fresh;  // weakest in rank order
    }

    const double prune_below = alpha * p.complexity_prune;
    std::erase_if(comps, [&](const GaussianComponent& c) { return c.weight < prune_below; });
    double total = 0;
    for (const auto& c : comps) total += c.weight;
    for (auto& c : comps) c.weight /= total;
    std::stable_sort(comps.begin(), comps.end(), [](const GaussianComponent& a, const GaussianComponent& b) {
      return a.weight / std::sqrt(a.variance) > b.weight / std::sqrt(b.variance);
    });
    return !background;
  }
};

/// Binary foreground mask stored as a single-channel frame of 0/1.
using ForegroundMask = Frame;

/// Per-pixel mixture grid for one image sequence.
class Mog2Model {
 public:
  Mog2Model(const Frame& first, const Mog2Params& params) : params_(params) {
    params_.validate();
    if (first.channels() != 1) throw ChannelError("mog2 expects single-channel frames");
    height_ = first.height();
    width_ = first.width();
    pixels_.resize(first.size());
    for (std::size_t i = 0; i < pixels_.size(); ++i)
      pixels_[i].components = {GaussianComponent{1.0, first.data()[i], params_.var_init}};
  }

  ForegroundMask update(const Frame& frame) {
    if (frame.channels() != 1) throw ChannelError("mog2 expects single-channel frames");
    if (frame.height() != height_ || frame.width() != width_) throw DimensionError("mog2 frame size differs from model");
    ForegroundMask mask(height_, width_, 1);
    auto out = mask.mutable_data();
    for (std::size_t i = 0; i < pixels_.size(); ++i) out[i] = pixels_[i].update(frame.data()[i], params_) ? 1.0f : 0.0f;
    return mask;
  }

  const PixelMixture& pixel(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  int height() const { return height_; }
  int width() const { return width_; }

 private:
  Mog2Params params_;
  int height_ = 0, width_ = 0;
  std::vector<PixelMixture> pixels_;
};

/// Free-function form of one model update.
inline ForegroundMask mog2_update(Mog2Model& model, const Frame& frame) { return model.update(frame); }

/// Model initialised on frame 1, updated with frames 2 and 3; union of the
/// two masks.
inline ForegroundMask burst_foreground(const Burst& burst, const Mog2Params& params = {}) {
  Mog2Model model(to_gray(burst.frames[0]), params);
  const ForegroundMask m2 = model.update(to_gray(burst.frames[1]));
  ForegroundMask m3 = model.update(to_gray(burst.frames[2]));
  auto out = m3.mutable_data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], m2.data()[i]);
  return m3;
}

}  // namespace burstnet
