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

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/learner/models.hpp"
#include "burstnet/rng.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet::learner {

struct AdamParams {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  }
};

template <class T>
class Adam {
 public:
  Adam(std::size_t n, AdamParams p) : p_(p), m_(n, T(0)), v_(n, T(0)) { p_.validate(); }

  void step(std::span<T> theta, std::span<const T> grad) {
    if (theta.size() != m_.size() || grad.size() != m_.size()) throw ContractError("Adam parameter size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(p_.beta1), b2 = static_cast<T>(p_.beta2);
    const T lr = static_cast<T>(p_.learning_rate), eps = static_cast<T>(p_.epsilon);
    const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const T g = grad[i];
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g * g;
      theta[i] -= lr * (m_[i] * ic1) / (std::sqrt(v_[i] * ic2) + eps);
    }
  }

  long long steps() const { return t_; }

 private:
  AdamParams p_;
  std::vector<T> m_, v_;
  long long t_ = 0;
};

/// Initializes the first convolution of a K-channel model from a trained
/// 3-channel model: each RGB or flow-image triplet receives a copy of the
/// source kernels, each MOG2 channel is drawn from N(0, 0.01^2). Deeper
/// layers and the first-layer bias are copied unchanged.
template <class T>
void warm_start_input_layer(CnnModel<T>& target, const CnnModel<T>& source, std::span<const ChannelRole> roles,
                            Rng& rng) {
  const int k = target.in_channels();
  if (source.in_channels() != 3) throw ContractError("warm start source must have 3 input channels");
  if (static_cast<int>(roles.size()) != k) throw ContractError("warm start roles do not match target channels");
  auto& dst = target.params();
  const auto& src = source.params();
  for (const auto& spec : target.layout().specs()) {
    if (spec.name == "conv1.weight") continue;
    const auto& s = source.layout().find(spec.name);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s.offset), s.size,
                dst.begin() + static_cast<std::ptrdiff_t>(spec.offset));
  }
  const std::size_t tw = target.layout().find("conv1.weight").offset;
  const std::size_t sw = source.layout().find("conv1.weight").offset;
  auto tap = [&](std::size_t base, int o, int kin, int c) { return base + (static_cast<std::size_t>(o) * kin + c) * 9; };
  int c = 0;
  while (c < k) {
    const ChannelRole r = roles[c];
    if (is_rgb_image(r) || is_flow_image(r)) {
      if (c + 3 > k || roles[c + 1] != r || roles[c + 2] != r)
        throw ContractError("image channels must come in contiguous triplets");
      for (int o = 0; o < kConv1Filters; ++o)
        for (int j = 0; j < 3; ++j)
          std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(tap(sw, o, 3, j)), 9,
                      dst.begin() + static_cast<std::ptrdiff_t>(tap(tw, o, k, c + j)));
      c += 3;
    } else if (r == ChannelRole::kMog2) {
      for (int o = 0; o < kConv1Filters; ++o)
        for (int t = 0; t < 9; ++t) dst[tap(tw, o, k, c) + t] = static_cast<T>(normal(rng, 0.0, 0.01));
      ++c;
    } else {
      throw ContractError("cannot warm start channel role " + std::string(role_name(r)));
    }
  }
}

/// Copies the convolutional layers of a trained 3-channel model into the
/// shared trunk of a sequence model.
template <class T>
void warm_start_trunk(LstmModel<T>& target, const CnnModel<T>& source) {
  if (source.in_channels() != 3) throw ContractError("warm start source must have 3 input channels");
  for (const char* name : {"conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"}) {
    const auto& s = source.layout().find(name);
    const auto& d = target.layout().find(std::string("trunk.") + name);
    std::copy_n(source.params().begin() + static_cast<std::ptrdiff_t>(s.offset), s.size,
                target.params().begin() + static_cast<std::ptrdiff_t>(d.offset));
  }
}

/// 1-based batch indices within an epoch of `batches` batches after which a
/// validation checkpoint is taken: ceil(batches * j / per_epoch), deduplicated.
inline std::vector<long long> checkpoint_batches(long long batches, int per_epoch) {
  if (batches < 1 || per_epoch < 1) throw ContractError("checkpoint cadence needs positive counts");
  std::vector<long long> out;
  for (int j = 1; j <= per_epoch; ++j) {
    const long long b = (batches * j + per_epoch - 1) / per_epoch;
    if (out.empty() || out.back() != b) out.push_back(b);
  }
  return out;
}

/// Stops after `patience` consecutive checkpoints without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be at least 1");
  }

  /// Records one checkpoint score; returns true when training should stop.
  bool observe(double score) {
    ++count_;
    if (score > best_) {
      best_ = score;
      best_index_ = count_;
      since_ = 0;
    } else {
      ++since_;
    }
    return since_ >= patience_;
  }

  double best() const { return best_; }
  /// 1-based index of the best checkpoint, 0 before any observation.
  int best_index() const { return best_index_; }
  int count() const { return count_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_index_ = 0, count_ = 0, since_ = 0;
};

}  // namespace burstnet::learner
