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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/rng.hpp"

namespace burstnet::learner {

/// Named slices of one flat parameter vector.
struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class ParamLayout {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    specs_.push_back({std::move(name), std::move(shape), total_, n});
    total_ += n;
    return specs_.back().offset;
  }
  const ParamSpec& find(const std::string& name) const {
    for (const auto& s : specs_)
      if (s.name == name) return s;
    throw ContractError("no parameter named " + name);
  }
  const std::vector<ParamSpec>& specs() const { return specs_; }
  std::size_t total() const { return total_; }

 private:
  std::vector<ParamSpec> specs_;
  std::size_t total_ = 0;
};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

/// Planar C x H x W activation.
template <class T>
struct Planes {
  int channels = 0, height = 0, width = 0;
  std::vector<T> v;

  Planes() = default;
  Planes(int c, int h, int w) : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, T(0)) {}
  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  T* plane(int c) { return v.data() + c * plane_size(); }
  const T* plane(int c) const { return v.data() + c * plane_size(); }
};

template <class T>
inline T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

/// log(1 + exp(z)) without overflow.
template <class T>
inline T softplus(T z) {
  return z > T(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// Binary cross-entropy of sigmoid(z) against y.
template <class T>
inline T bce_with_logit(T z, T y) {
  return softplus(z) - y * z;
}

/// 3x3 convolution, stride 1, zero padding 1.
struct Conv3x3 {
  int in = 0, out = 0;
  std::size_t weight_offset = 0, bias_offset = 0;

  template <class T>
  static void im2col(const Planes<T>& x, std::vector<T>& col) {
    const int h = x.height, w = x.width;
    const std::size_t hw = x.plane_size();
    col.assign(static_cast<std::size_t>(x.channels) * 9 * hw, T(0));
    for (int c = 0; c < x.channels; ++c) {
      const T* src = x.plane(c);
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          T* dst = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
            const T* row = src + static_cast<std::size_t>(sy) * w + (kx - 1);
            T* out_row = dst + static_cast<std::size_t>(y) * w;
            for (int xx = x0; xx < x1; ++xx) out_row[xx] = row[xx];
          }
        }
    }
  }

  template <class T>
  static void col2im(const std::vector<T>& col, Planes<T>& dx) {
    const int h = dx.height, w = dx.width;
    const std::size_t hw = dx.plane_size();
    for (int c = 0; c < dx.channels; ++c) {
      T* dst = dx.plane(c);
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
            T* row = dst + static_cast<std::size_t>(sy) * w + (kx - 1);
            const T* in_row = src + static_cast<std::size_t>(y) * w;
            for (int xx = x0; xx < x1; ++xx) row[xx] += in_row[xx];
          }
        }
    }
  }

  /// z = W * im2col(x) + b; `col` is kept for the backward pass.
  template <class T>
  void forward(const T* theta, const Planes<T>& x, std::vector<T>& col, Planes<T>& z) const {
    if (x.channels != in) throw ContractError("conv expects " + std::to_string(in) + " channels, got " + std::to_string(x.channels));
    im2col(x, col);
    const auto hw = static_cast<Eigen::Index>(x.plane_size());
    z = Planes<T>(out, x.height, x.width);
    ConstMapMat<T> wm(theta + weight_offset, out, in * 9);
    ConstMapMat<T> cm(col.data(), in * 9, hw);
    MapMat<T> zm(z.v.data(), out, hw);
    zm.noalias() = wm * cm;
    for (int o = 0; o < out; ++o) zm.row(o).array() += theta[bias_offset + o];
  }

  /// Accumulates parameter gradients; writes the input gradient when `dx` is non-null.
  template <class T>
  void backward(const T* theta, const std::vector<T>& col, const Planes<T>& dz, T* grad, Planes<T>* dx) const {
    const auto hw = static_cast<Eigen::Index>(dz.plane_size());
    ConstMapMat<T> dzm(dz.v.data(), out, hw);
    ConstMapMat<T> cm(col.data(), in * 9, hw);
    MapMat<T> dwm(grad + weight_offset, out, in * 9);
    dwm.noalias() += dzm * cm.transpose();
    // Ordered sum: Eigen's vectorized reductions depend on buffer alignment,
    // which would make gradients differ between otherwise identical runs.
    for (int o = 0; o < out; ++o) {
      const T* row = dz.plane(o);
      T s(0);
      for (Eigen::Index i = 0; i < hw; ++i) s += row[i];
      grad[bias_offset + o] += s;
    }
    if (dx) {
      std::vector<T> dcol(static_cast<std::size_t>(in) * 9 * hw);
      ConstMapMat<T> wm(theta + weight_offset, out, in * 9);
      MapMat<T> dcm(dcol.data(), in * 9, hw);
      dcm.noalias() = wm.transpose() * dzm;
      *dx = Planes<T>(in, dz.height, dz.width);
      col2im(dcol, *dx);
    }
  }
};

/// ReLU followed by 2x2 max pooling (stride 2, floor). `argmax` holds the
/// in-plane source offset of each pooled value.
template <class T>
void relu_maxpool(const Planes<T>& z, Planes<T>& pooled, std::vector<std::int32_t>& argmax) {
  const int oh = z.height / 2, ow = z.width / 2;
  if (oh < 1 || ow < 1) throw DimensionError("activation too small to pool");
  pooled = Planes<T>(z.channels, oh, ow);
  argmax.assign(pooled.v.size(), 0);
  for (int c = 0; c < z.channels; ++c) {
    const T* src = z.plane(c);
    T* dst = pooled.plane(c);
    std::int32_t* arg = argmax.data() + c * pooled.plane_size();
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        std::int32_t best = (2 * y) * z.width + 2 * x;
        T bv = std::max(src[best], T(0));
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::int32_t i = (2 * y + dy) * z.width + 2 * x + dx;
            const T v = std::max(src[i], T(0));
            if (v > bv) {
              bv = v;
              best = i;
            }
          }
        dst[y * ow + x] = bv;
        arg[y * ow + x] = best;
      }
  }
}

/// Gradient of relu_maxpool: routes each pooled gradient to its argmax and
/// applies the ReLU mask of the pre-activation.
template <class T>
void relu_maxpool_backward(const Planes<T>& z, const Planes<T>& dpooled, const std::vector<std::int32_t>& argmax,
                           Planes<T>& dz) {
  dz = Planes<T>(z.channels, z.height, z.width);
  for (int c = 0; c < z.channels; ++c) {
    const T* zp = z.plane(c);
    T* dst = dz.plane(c);
    const T* g = dpooled.plane(c);
    const std::int32_t* arg = argmax.data() + c * dpooled.plane_size();
    for (std::size_t i = 0; i < dpooled.plane_size(); ++i)
      if (zp[arg[i]] > T(0)) dst[arg[i]] += g[i];
  }
}

/// Smallest distance of any ReLU input from zero, and of any pooling
/// winner from its runner-up. Finite differences are only valid when both
/// exceed the perturbation size.
template <class T>
T kink_margin(const Planes<T>& z) {
  T margin = std::numeric_limits<T>::infinity();
  for (T v : z.v) margin = std::min(margin, std::abs(v));
  for (int c = 0; c < z.channels; ++c) {
    const T* src = z.plane(c);
    for (int y = 0; y + 1 < z.height; y += 2)
      for (int x = 0; x + 1 < z.width; x += 2) {
        T a[4] = {src[y * z.width + x], src[y * z.width + x + 1], src[(y + 1) * z.width + x], src[(y + 1) * z.width + x + 1]};
        std::sort(a, a + 4);
        if (a[3] > T(0)) margin = std::min(margin, a[3] - a[2]);
      }
  }
  return margin;
}

template <class T>
void he_uniform(std::span<T> w, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  for (T& v : w) v = static_cast<T>(uniform(rng, -limit, limit));
}

template <class T>
void glorot_uniform(std::span<T> w, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (T& v : w) v = static_cast<T>(uniform(rng, -limit, limit));
}

}  // namespace burstnet::learner
