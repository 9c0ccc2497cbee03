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

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "burstnet/learner/layers.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet::learner {

inline constexpr int kConv1Filters = 16;
inline constexpr int kConv2Filters = 32;
inline constexpr int kLstmHidden = 32;

template <class T>
Planes<T> to_planes(const ChannelStack& s) {
  Planes<T> p(s.channels(), s.height(), s.width());
  const auto& d = s.data();
  const std::size_t hw = p.plane_size();
  const auto k = static_cast<std::size_t>(s.channels());
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t c = 0; c < k; ++c) p.v[c * hw + i] = static_cast<T>(d[i * k + c]);
  return p;
}

/// Activations retained by the convolutional trunk for backprop.
template <class T>
struct TrunkCache {
  std::vector<T> col1, col2;
  Planes<T> z1, p1, z2, p2;
  std::vector<std::int32_t> arg1, arg2;
  std::vector<T> feat;
};

/// conv3x3(in->16) relu pool, conv3x3(16->32) relu pool, global average pool.
struct Trunk {
  Conv3x3 conv1, conv2;

  static Trunk add_to(ParamLayout& layout, const std::string& prefix, int in_channels) {
    Trunk t;
    t.conv1.in = in_channels;
    t.conv1.out = kConv1Filters;
    t.conv1.weight_offset = layout.add(prefix + "conv1.weight", {kConv1Filters, in_channels, 3, 3});
    t.conv1.bias_offset = layout.add(prefix + "conv1.bias", {kConv1Filters});
    t.conv2.in = kConv1Filters;
    t.conv2.out = kConv2Filters;
    t.conv2.weight_offset = layout.add(prefix + "conv2.weight", {kConv2Filters, kConv1Filters, 3, 3});
    t.conv2.bias_offset = layout.add(prefix + "conv2.bias", {kConv2Filters});
    return t;
  }

  template <class T>
  void init(std::vector<T>& theta, Rng& rng) const {
    he_uniform(std::span<T>(theta.data() + conv1.weight_offset, static_cast<std::size_t>(conv1.out) * conv1.in * 9),
               conv1.in * 9, rng);
    he_uniform(std::span<T>(theta.data() + conv2.weight_offset, static_cast<std::size_t>(conv2.out) * conv2.in * 9),
               conv2.in * 9, rng);
  }

  template <class T>
  void forward(const T* theta, const Planes<T>& x, TrunkCache<T>& c) const {
    conv1.forward(theta, x, c.col1, c.z1);
    relu_maxpool(c.z1, c.p1, c.arg1);
    conv2.forward(theta, c.p1, c.col2, c.z2);
    relu_maxpool(c.z2, c.p2, c.arg2);
    c.feat.assign(kConv2Filters, T(0));
    const std::size_t n = c.p2.plane_size();
    for (int k = 0; k < kConv2Filters; ++k) {
      T s(0);
      const T* p = c.p2.plane(k);
      for (std::size_t i = 0; i < n; ++i) s += p[i];
      c.feat[k] = s / static_cast<T>(n);
    }
  }

  template <class T>
  void backward(const T* theta, const TrunkCache<T>& c, std::span<const T> dfeat, T* grad) const {
    Planes<T> dp2(kConv2Filters, c.p2.height, c.p2.width);
    const std::size_t n = dp2.plane_size();
    for (int k = 0; k < kConv2Filters; ++k) std::fill_n(dp2.plane(k), n, dfeat[k] / static_cast<T>(n));
    Planes<T> dz2, dp1, dz1;
    relu_maxpool_backward(c.z2, dp2, c.arg2, dz2);
    conv2.backward(theta, c.col2, dz2, grad, &dp1);
    relu_maxpool_backward(c.z1, dp1, c.arg1, dz1);
    conv1.backward(theta, c.col1, dz1, grad, static_cast<Planes<T>*>(nullptr));
  }

  template <class T>
  T kink_margin(const TrunkCache<T>& c) const {
    return std::min(learner::kink_margin(c.z1), learner::kink_margin(c.z2));
  }
};

/// Single-image classifier over a K-channel stack.
template <class T>
class CnnModel {
 public:
  using Scalar = T;
  using Input = Planes<T>;

  explicit CnnModel(int in_channels) : in_channels_(in_channels) {
    if (in_channels < 1) throw ContractError("model needs at least one input channel");
    trunk_ = Trunk::add_to(layout_, "", in_channels);
    dense_w_ = layout_.add("dense.weight", {1, kConv2Filters});
    dense_b_ = layout_.add("dense.bias", {1});
    theta_.assign(layout_.total(), T(0));
  }

  /// He-uniform convolution kernels, Glorot-uniform dense layer, zero biases.
  void init(Rng& rng) {
    std::fill(theta_.begin(), theta_.end(), T(0));
    trunk_.init(theta_, rng);
    glorot_uniform(std::span<T>(theta_.data() + dense_w_, kConv2Filters), kConv2Filters, 1, rng);
  }

  int in_channels() const { return in_channels_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<T>& params() { return theta_; }
  const std::vector<T>& params() const { return theta_; }
  const Trunk& trunk() const { return trunk_; }

  T logit(const Input& x) const {
    thread_local TrunkCache<T> c;
    return forward(x, c);
  }
  T predict(const Input& x) const { return sigmoid(logit(x)); }

  /// Mean binary cross-entropy over the batch; `grad` receives its gradient.
  T loss_and_grad(std::span<const Input> xs, std::span<const T> ys, std::vector<T>& grad) const {
    check_batch(xs.size(), ys.size());
    grad.assign(theta_.size(), T(0));
    T loss(0);
    const T inv = T(1) / static_cast<T>(xs.size());
    TrunkCache<T> c;
    std::array<T, kConv2Filters> dfeat;
    for (std::size_t b = 0; b < xs.size(); ++b) {
      const T z = forward(xs[b], c);
      loss += bce_with_logit(z, ys[b]);
      const T dz = (sigmoid(z) - ys[b]) * inv;
      for (int k = 0; k < kConv2Filters; ++k) {
        grad[dense_w_ + k] += dz * c.feat[k];
        dfeat[k] = dz * theta_[dense_w_ + k];
      }
      grad[dense_b_] += dz;
      trunk_.backward(theta_.data(), c, std::span<const T>(dfeat), grad.data());
    }
    return loss * inv;
  }

  T loss(std::span<const Input> xs, std::span<const T> ys) const {
    check_batch(xs.size(), ys.size());
    T loss(0);
    TrunkCache<T> c;
    for (std::size_t b = 0; b < xs.size(); ++b) loss += bce_with_logit(forward(xs[b], c), ys[b]);
    return loss / static_cast<T>(xs.size());
  }

  T kink_margin(const Input& x) const {
    TrunkCache<T> c;
    forward(x, c);
    return trunk_.kink_margin(c);
  }

 private:
  T forward(const Input& x, TrunkCache<T>& c) const {
    trunk_.forward(theta_.data(), x, c);
    T z = theta_[dense_b_];
    for (int k = 0; k < kConv2Filters; ++k) z += theta_[dense_w_ + k] * c.feat[k];
    return z;
  }

  static void check_batch(std::size_t nx, std::size_t ny) {
    if (nx == 0 || nx != ny) throw ContractError("batch inputs and labels must be non-empty and equal in length");
  }

  int in_channels_;
  ParamLayout layout_;
  Trunk trunk_;
  std::size_t dense_w_ = 0, dense_b_ = 0;
  std::vector<T> theta_;
};

/// Per-frame convolutional trunk shared across three time steps, one LSTM
/// layer, and a dense head on the final hidden state.
template <class T>
class LstmModel {
 public:
  using Scalar = T;
  using Input = std::array<Planes<T>, 3>;
  static constexpr int kSteps = 3;
  static constexpr int kGates = 4 * kLstmHidden;

  LstmModel() {
    trunk_ = Trunk::add_to(layout_, "trunk.", 3);
    wx_ = layout_.add("lstm.wx", {kGates, kConv2Filters});
    wh_ = layout_.add("lstm.wh", {kGates, kLstmHidden});
    bias_ = layout_.add("lstm.bias", {kGates});
    dense_w_ = layout_.add("dense.weight", {1, kLstmHidden});
    dense_b_ = layout_.add("dense.bias", {1});
    theta_.assign(layout_.total(), T(0));
  }

  void init(Rng& rng) {
    std::fill(theta_.begin(), theta_.end(), T(0));
    trunk_.init(theta_, rng);
    glorot_uniform(std::span<T>(theta_.data() + wx_, static_cast<std::size_t>(kGates) * kConv2Filters), kConv2Filters,
                   kGates, rng);
    glorot_uniform(std::span<T>(theta_.data() + wh_, static_cast<std::size_t>(kGates) * kLstmHidden), kLstmHidden,
                   kGates, rng);
    glorot_uniform(std::span<T>(theta_.data() + dense_w_, kLstmHidden), kLstmHidden, 1, rng);
  }

  int in_channels() const { return 3; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<T>& params() { return theta_; }
  const std::vector<T>& params() const { return theta_; }
  const Trunk& trunk() const { return trunk_; }

  T logit(const Input& x) const {
    thread_local Cache c;
    return forward(x, trunk_params(), c);
  }
  T predict(const Input& x) const { return sigmoid(logit(x)); }

  T loss_and_grad(std::span<const Input> xs, std::span<const T> ys, std::vector<T>& grad) const {
    check_batch(xs.size(), ys.size());
    grad.assign(theta_.size(), T(0));
    T loss(0);
    const T inv = T(1) / static_cast<T>(xs.size());
    Cache c;
    for (std::size_t b = 0; b < xs.size(); ++b) {
      const T z = forward(xs[b], trunk_params(), c);
      loss += bce_with_logit(z, ys[b]);
      backward(c, (sigmoid(z) - ys[b]) * inv, grad, trunk_grads(grad));
    }
    return loss * inv;
  }

  T loss(std::span<const Input> xs, std::span<const T> ys) const {
    check_batch(xs.size(), ys.size());
    T loss(0);
    Cache c;
    for (std::size_t b = 0; b < xs.size(); ++b) loss += bce_with_logit(forward(xs[b], trunk_params(), c), ys[b]);
    return loss / static_cast<T>(xs.size());
  }

  /// Loss and gradient with a separate trunk parameter vector for each time
  /// step. `step_theta[t]` has the full parameter layout; only its trunk
  /// entries are read. The trunk entries of `step_grad[t]` receive the
  /// gradient of step t alone, the rest of the gradient goes to `grad`.
  T untied_loss_and_grad(const Input& x, T y, const std::array<std::vector<T>, kSteps>& step_theta,
                         std::vector<T>& grad, std::array<std::vector<T>, kSteps>& step_grad) const {
    grad.assign(theta_.size(), T(0));
    std::array<const T*, kSteps> tp;
    std::array<T*, kSteps> tg;
    for (int t = 0; t < kSteps; ++t) {
      step_grad[t].assign(theta_.size(), T(0));
      tp[t] = step_theta[t].data();
      tg[t] = step_grad[t].data();
    }
    Cache c;
    const T z = forward(x, tp, c);
    backward(c, sigmoid(z) - y, grad, tg);
    return bce_with_logit(z, y);
  }

  T kink_margin(const Input& x) const {
    Cache c;
    forward(x, trunk_params(), c);
    T m = std::numeric_limits<T>::infinity();
    for (const auto& tc : c.trunk) m = std::min(m, trunk_.kink_margin(tc));
    return m;
  }

 private:
  struct Cache {
    std::array<TrunkCache<T>, kSteps> trunk;
    std::array<std::array<T, kGates>, kSteps> gates;  // post-nonlinearity i, f, g, o
    std::array<std::array<T, kLstmHidden>, kSteps + 1> h{}, c{};
    std::array<const T*, kSteps> trunk_theta{};
  };

  std::array<const T*, kSteps> trunk_params() const { return {theta_.data(), theta_.data(), theta_.data()}; }
  static std::array<T*, kSteps> trunk_grads(std::vector<T>& g) { return {g.data(), g.data(), g.data()}; }

  T forward(const Input& x, const std::array<const T*, kSteps>& tp, Cache& c) const {
    const T* th = theta_.data();
    c.h[0].fill(T(0));
    c.c[0].fill(T(0));
    c.trunk_theta = tp;
    for (int t = 0; t < kSteps; ++t) {
      trunk_.forward(tp[t], x[t], c.trunk[t]);
      const auto& xt = c.trunk[t].feat;
      auto& a = c.gates[t];
      for (int r = 0; r < kGates; ++r) {
        T s = th[bias_ + r];
        const T* wxr = th + wx_ + static_cast<std::size_t>(r) * kConv2Filters;
        const T* whr = th + wh_ + static_cast<std::size_t>(r) * kLstmHidden;
        for (int j = 0; j < kConv2Filters; ++j) s += wxr[j] * xt[j];
        for (int j = 0; j < kLstmHidden; ++j) s += whr[j] * c.h[t][j];
        a[r] = s;
      }
      for (int j = 0; j < kLstmHidden; ++j) {
        const T i = sigmoid(a[j]);
        const T f = sigmoid(a[kLstmHidden + j]);
        const T g = std::tanh(a[2 * kLstmHidden + j]);
        const T o = sigmoid(a[3 * kLstmHidden + j]);
        a[j] = i;
        a[kLstmHidden + j] = f;
        a[2 * kLstmHidden + j] = g;
        a[3 * kLstmHidden + j] = o;
        c.c[t + 1][j] = f * c.c[t][j] + i * g;
        c.h[t + 1][j] = o * std::tanh(c.c[t + 1][j]);
      }
    }
    T z = th[dense_b_];
    for (int j = 0; j < kLstmHidden; ++j) z += th[dense_w_ + j] * c.h[kSteps][j];
    return z;
  }

  void backward(const Cache& c, T dz, std::vector<T>& grad, const std::array<T*, kSteps>& trunk_grad) const {
    const T* th = theta_.data();
    std::array<T, kLstmHidden> dh, dc;
    for (int j = 0; j < kLstmHidden; ++j) {
      grad[dense_w_ + j] += dz * c.h[kSteps][j];
      dh[j] = dz * th[dense_w_ + j];
    }
    grad[dense_b_] += dz;
    dc.fill(T(0));
    std::array<T, kGates> da;
    std::array<T, kConv2Filters> dx;
    for (int t = kSteps - 1; t >= 0; --t) {
      const auto& a = c.gates[t];
      for (int j = 0; j < kLstmHidden; ++j) {
        const T i = a[j], f = a[kLstmHidden + j], g = a[2 * kLstmHidden + j], o = a[3 * kLstmHidden + j];
        const T tc = std::tanh(c.c[t + 1][j]);
        const T d_o = dh[j] * tc;
        const T dct = dc[j] + dh[j] * o * (T(1) - tc * tc);
        da[j] = dct * g * i * (T(1) - i);
        da[kLstmHidden + j] = dct * c.c[t][j] * f * (T(1) - f);
        da[2 * kLstmHidden + j] = dct * i * (T(1) - g * g);
        da[3 * kLstmHidden + j] = d_o * o * (T(1) - o);
        dc[j] = dct * f;
      }
      const auto& xt = c.trunk[t].feat;
      dx.fill(T(0));
      dh.fill(T(0));
      for (int r = 0; r < kGates; ++r) {
        const T d = da[r];
        grad[bias_ + r] += d;
        T* gwx = grad.data() + wx_ + static_cast<std::size_t>(r) * kConv2Filters;
        T* gwh = grad.data() + wh_ + static_cast<std::size_t>(r) * kLstmHidden;
        const T* wxr = th + wx_ + static_cast<std::size_t>(r) * kConv2Filters;
        const T* whr = th + wh_ + static_cast<std::size_t>(r) * kLstmHidden;
        for (int j = 0; j < kConv2Filters; ++j) {
          gwx[j] += d * xt[j];
          dx[j] += d * wxr[j];
        }
        for (int j = 0; j < kLstmHidden; ++j) {
          gwh[j] += d * c.h[t][j];
          dh[j] += d * whr[j];
        }
      }
      trunk_.backward(c.trunk_theta[t], c.trunk[t], std::span<const T>(dx), trunk_grad[t]);
    }
  }

  static void check_batch(std::size_t nx, std::size_t ny) {
    if (nx == 0 || nx != ny) throw ContractError("batch inputs and labels must be non-empty and equal in length");
  }

  ParamLayout layout_;
  Trunk trunk_;
  std::size_t wx_ = 0, wh_ = 0, bias_ = 0, dense_w_ = 0, dense_b_ = 0;
  std::vector<T> theta_;
};

}  // namespace burstnet::learner
