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
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "burstnet/burst.hpp"
#include "burstnet/color.hpp"
#include "burstnet/error.hpp"
#include "burstnet/poly_expansion.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

struct FlowParams {
  double pyramid_scale = 0.5;
  int levels = 3;  // pyramid levels including full resolution
  int window = 15;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.2;

  void validate() const {
    if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) throw ConfigError("flow pyramid_scale must be in (0,1)");
    if (levels < 1) throw ConfigError("flow levels must be >= 1");
    if (window < 3 || window % 2 == 0) throw ConfigError("flow window must be odd and >= 3");
    if (iterations < 1) throw ConfigError("flow iterations must be >= 1");
    if (poly_n < 3 || poly_n % 2 == 0) throw ConfigError("flow poly_n must be odd and >= 3");
    if (poly_sigma <= 0) throw ConfigError("flow poly_sigma must be positive");
  }
};

/// Per-pixel displacement from the earlier frame to the later one, stored
/// interleaved (dx, dy).
struct FlowField {
  int height = 0, width = 0;
  std::vector<float> data;

  float dx(int y, int x) const { return data[2 * (static_cast<std::size_t>(y) * width + x)]; }
  float dy(int y, int x) const { return data[2 * (static_cast<std::size_t>(y) * width + x) + 1]; }

  Tensor to_tensor() const {
    return Tensor{{static_cast<std::uint32_t>(height), static_cast<std::uint32_t>(width), 2u}, {}, data};
  }
  static FlowField from_tensor(const Tensor& t) {
    if (t.dims.size() != 3 || t.dims[2] != 2) throw DimensionError("flow tensor must be H x W x 2");
    return FlowField{static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), t.data};
  }
};

namespace detail {

// Smallest pyramid level side; coarser levels are skipped.
inline constexpr int kMinPyramidSide = 16;
// Matrices near the image border are down-weighted over this many pixels.
inline constexpr int kFlowBorder = 5;
inline constexpr double kFlowBorderWeights[kFlowBorder] = {0.14, 0.14, 0.4472, 0.8630, 0.9838};

struct Plane {
  int height = 0, width = 0;
  std::vector<double> v;
  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

inline Plane gaussian_blur(const Plane& src, double sigma) {
  if (sigma <= 0.0) return src;
  int ksize = static_cast<int>(std::lround(sigma * 5)) | 1;
  ksize = std::max(ksize, 3);
  const int r = ksize / 2;
  std::vector<double> k(ksize);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
  for (double& v : k) v /= sum;
  Plane tmp = src, out = src;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src.at(y, std::clamp(x + i, 0, src.width - 1));
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(std::clamp(y + i, 0, src.height - 1), x);
      out.at(y, x) = acc;
    }
  return out;
}

inline Plane resize_plane(const Plane& src, int out_h, int out_w) {
  return Plane{out_h, out_w, resize_interleaved<double>(src.v, src.height, src.width, 1, out_h, out_w)};
}

/// Mean over a window x window box truncated at the border, for each of
/// the `n` interleaved channels.
inline std::vector<double> box_mean(const std::vector<double>& src, int height, int width, int n, int window) {
  const int r = window / 2;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int lo = std::max(0, x - r), hi = std::min(width - 1, x + r);
      for (int c = 0; c < n; ++c) {
        double acc = 0;
        for (int i = lo; i <= hi; ++i) acc += src[(static_cast<std::size_t>(y) * width + i) * n + c];
        tmp[(static_cast<std::size_t>(y) * width + x) * n + c] = acc / (hi - lo + 1);
      }
    }
  for (int y = 0; y < height; ++y) {
    const int lo = std::max(0, y - r), hi = std::min(height - 1, y + r);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < n; ++c) {
        double acc = 0;
        for (int i = lo; i <= hi; ++i) acc += tmp[(static_cast<std::size_t>(i) * width + x) * n + c];
        out[(static_cast<std::size_t>(y) * width + x) * n + c] = acc / (hi - lo + 1);
      }
  }
  return out;
}

/// Per-pixel normal equations (G11, G12, G22, h1, h2) for the displacement
/// given the current flow estimate.
inline std::vector<double> flow_matrices(const PolyExpansion& r0, const PolyExpansion& r1,
                                         const std::vector<double>& flow) {
  const int h = r0.height, w = r0.width;
  std::vector<double> m(static_cast<std::size_t>(h) * w * 5, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double dx = flow[2 * i], dy = flow[2 * i + 1];
      const double fx = x + dx, fy = y + dy;
      const int x1 = static_cast<int>(std::floor(fx)), y1 = static_cast<int>(std::floor(fy));
      if (x1 < 0 || y1 < 0 || x1 >= w - 1 || y1 >= h - 1) continue;  // target outside the next frame
      const double ax = fx - x1, ay = fy - y1;
      const double w00 = (1 - ax) * (1 - ay), w01 = ax * (1 - ay), w10 = (1 - ax) * ay, w11 = ax * ay;
      const auto& p00 = r1.at(y1, x1);
      const auto& p01 = r1.at(y1, x1 + 1);
      const auto& p10 = r1.at(y1 + 1, x1);
      const auto& p11 = r1.at(y1 + 1, x1 + 1);
      auto lerp = [&](double PolyCoeffs::*f) {
        return w00 * p00.*f + w01 * p01.*f + w10 * p10.*f + w11 * p11.*f;
      };
      const auto& q = r0.at(y, x);
      const double axx = 0.5 * (q.axx + lerp(&PolyCoeffs::axx));
      const double ayy = 0.5 * (q.ayy + lerp(&PolyCoeffs::ayy));
      const double axy = 0.5 * (q.axy + lerp(&PolyCoeffs::axy));
      double bx = 0.5 * (q.bx - lerp(&PolyCoeffs::bx)) + axx * dx + axy * dy;
      double by = 0.5 * (q.by - lerp(&PolyCoeffs::by)) + axy * dx + ayy * dy;
      double s = 1.0;
      if (x < kFlowBorder) s *= kFlowBorderWeights[x];
      if (x >= w - kFlowBorder) s *= kFlowBorderWeights[w - 1 - x];
      if (y < kFlowBorder) s *= kFlowBorderWeights[y];
      if (y >= h - kFlowBorder) s *= kFlowBorderWeights[h - 1 - y];
      const double sxx = axx * s, syy = ayy * s, sxy = axy * s;
      bx *= s;
      by *= s;
      double* out = &m[5 * i];
      out[0] = sxx * sxx + sxy * sxy;
      out[1] = sxy * (sxx + syy);
      out[2] = syy * syy + sxy * sxy;
      out[3] = sxx * bx + sxy * by;
      out[4] = sxy * bx + syy * by;
    }
  return m;
}

inline std::vector<double> solve_flow(const std::vector<double>& m, std::size_t pixels) {
  std::vector<double> flow(2 * pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    const double g11 = m[5 * i], g12 = m[5 * i + 1], g22 = m[5 * i + 2], h1 = m[5 * i + 3], h2 = m[5 * i + 4];
    const double idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3);
    flow[2 * i] = (g22 * h1 - g12 * h2) * idet;
    flow[2 * i + 1] = (g11 * h2 - g12 * h1) * idet;
  }
  return flow;
}

}  // namespace detail

/// Dense coarse-to-fine polynomial-expansion flow from `prev` to `next`.
inline FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params = {}) {
  params.validate();
  if (prev.channels() != 1 || next.channels() != 1) throw ChannelError("estimate_flow expects single-channel frames");
  if (prev.height() != next.height() || prev.width() != next.width())
    throw DimensionError("estimate_flow frames differ in size");
  const int h = prev.height(), w = prev.width();
  if (h < params.poly_n || w < params.poly_n) throw DimensionError("frames smaller than poly_n");

  // Coefficients are kept in 8-bit intensity units so the solver's
  // regularizer has its customary scale.
  auto to_plane = [&](const Frame& f) {
    detail::Plane p{h, w, std::vector<double>(f.size())};
    for (std::size_t i = 0; i < f.size(); ++i) p.v[i] = 255.0 * f.data()[i];
    return p;
  };
  const detail::Plane img0 = to_plane(prev), img1 = to_plane(next);

  int levels = 1;
  for (double scale = params.pyramid_scale; levels < params.levels; scale *= params.pyramid_scale) {
    if (std::lround(w * scale) < detail::kMinPyramidSide || std::lround(h * scale) < detail::kMinPyramidSide) break;
    ++levels;
  }

  std::vector<double> flow;
  int fh = 0, fw = 0;
  for (int k = levels - 1; k >= 0; --k) {
    const double scale = std::pow(params.pyramid_scale, k);
    const int lh = k == 0 ? h : static_cast<int>(std::lround(h * scale));
    const int lw = k == 0 ? w : static_cast<int>(std::lround(w * scale));
    const std::size_t pixels = static_cast<std::size_t>(lh) * lw;
    if (flow.empty()) {
      flow.assign(2 * pixels, 0.0);
    } else {
      auto up = resize_interleaved<double>(flow, fh, fw, 2, lh, lw);
      const double sx = static_cast<double>(lw) / fw, sy = static_cast<double>(lh) / fh;
      for (std::size_t i = 0; i < pixels; ++i) {
        up[2 * i] *= sx;
        up[2 * i + 1] *= sy;
      }
      flow = std::move(up);
    }
    fh = lh;
    fw = lw;

    auto level_image = [&](const detail::Plane& src) {
      if (k == 0) return src;
      const double sigma = (1.0 / scale - 1.0) * 0.5;
      return detail::resize_plane(detail::gaussian_blur(src, sigma), lh, lw);
    };
    const auto l0 = level_image(img0), l1 = level_image(img1);
    const auto r0 = poly_expand_plane(l0.v, lh, lw, params.poly_n, params.poly_sigma);
    const auto r1 = poly_expand_plane(l1.v, lh, lw, params.poly_n, params.poly_sigma);

    auto m = detail::flow_matrices(r0, r1, flow);
    for (int it = 0; it < params.iterations; ++it) {
      flow = detail::solve_flow(detail::box_mean(m, lh, lw, 5, params.window), pixels);
      if (it + 1 < params.iterations) m = detail::flow_matrices(r0, r1, flow);
    }
  }

  FlowField out{h, w, std::vector<float>(flow.size())};
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!std::isfinite(flow[i])) throw NumericError("non-finite flow estimate");
    out.data[i] = static_cast<float>(flow[i]);
  }
  return out;
}

inline constexpr double kDefaultMagnitudeCap = 8.0;

/// Hue = direction, value = magnitude / cap (saturated), saturation 1.
inline Frame flow_to_rgb(const FlowField& flow, double magnitude_cap = kDefaultMagnitudeCap) {
  if (!(magnitude_cap > 0)) throw ContractError("magnitude_cap must be positive");
  Frame out(flow.height, flow.width, 3);
  auto dst = out.mutable_data();
  const std::size_t pixels = static_cast<std::size_t>(flow.height) * flow.width;
  for (std::size_t i = 0; i < pixels; ++i) {
    const double dx = flow.data[2 * i], dy = flow.data[2 * i + 1];
    if (!std::isfinite(dx) || !std::isfinite(dy)) throw NumericError("non-finite flow value");
    const double mag = std::hypot(dx, dy);
    if (mag == 0.0) continue;
    double hue = std::atan2(dy, dx) / (2.0 * std::numbers::pi);
    if (hue < 0) hue += 1.0;
    const auto rgb = hsv_to_rgb(hue, 1.0, std::min(mag / magnitude_cap, 1.0));
    for (int c = 0; c < 3; ++c) dst[3 * i + c] = std::clamp(static_cast<float>(rgb[c]), 0.0f, 1.0f);
  }
  return out;
}

inline Frame average_flow_images(const Frame& a, const Frame& b) {
  if (a.channels() != 3 || b.channels() != 3) throw ChannelError("flow images must have 3 channels");
  if (a.height() != b.height() || a.width() != b.width()) throw DimensionError("flow images differ in size");
  Frame out(a.height(), a.width(), 3);
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (a.data()[i] + b.data()[i]) * 0.5f;
  return out;
}

struct BurstFlow {
  FlowField field12, field23;
  Frame flow12, flow23, averaged;
};

inline BurstFlow burst_flow_images(const Burst& burst, const FlowParams& params = {},
                                   double magnitude_cap = kDefaultMagnitudeCap) {
  const Frame g1 = to_gray(burst.frames[0]), g2 = to_gray(burst.frames[1]), g3 = to_gray(burst.frames[2]);
  BurstFlow out;
  out.field12 = estimate_flow(g1, g2, params);
  out.field23 = estimate_flow(g2, g3, params);
  out.flow12 = flow_to_rgb(out.field12, magnitude_cap);
  out.flow23 = flow_to_rgb(out.field23, magnitude_cap);
  out.averaged = average_flow_images(out.flow12, out.flow23);
  return out;
}

}  // namespace burstnet
