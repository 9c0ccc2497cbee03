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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

/// Local quadratic model f(p) ~ p'Ap + b'p + c around one pixel, with
/// p = (dx, dy) in pixels. axy is the off-diagonal entry of A.
struct PolyCoeffs {
  double c = 0, bx = 0, by = 0, axx = 0, ayy = 0, axy = 0;
};

struct PolyExpansion {
  int height = 0, width = 0;
  std::vector<PolyCoeffs> coeffs;  // row-major

  const PolyCoeffs& at(int y, int x) const { return coeffs[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline std::vector<double> gaussian_applicability(int poly_n, double poly_sigma) {
  const int r = poly_n / 2;
  std::vector<double> g(poly_n);
  double sum = 0;
  for (int k = -r; k <= r; ++k) sum += g[k + r] = std::exp(-k * k / (2.0 * poly_sigma * poly_sigma));
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace detail

/// Weighted least-squares quadratic fit at every pixel of a single-channel
/// plane. Windows are truncated at the border and the fit is solved on the
/// remaining support, so every pixel gets an exact local solution.
inline PolyExpansion poly_expand_plane(std::span<const double> img, int height, int width, int poly_n,
                                       double poly_sigma) {
  if (poly_n < 3 || poly_n % 2 == 0) throw ConfigError("poly_n must be odd and >= 3");
  if (poly_sigma <= 0) throw ConfigError("poly_sigma must be positive");
  if (height < poly_n || width < poly_n)
    throw DimensionError("image " + std::to_string(height) + "x" + std::to_string(width) +
                         " smaller than poly_n " + std::to_string(poly_n));
  const int r = poly_n / 2;
  const auto g = detail::gaussian_applicability(poly_n, poly_sigma);

  // Vertical pass: v[q] = sum_dy g(dy) dy^q f(x, y+dy), q = 0..2.
  std::vector<std::array<double, 3>> vert(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const int lo = std::max(-r, -y), hi = std::min(r, height - 1 - y);
    for (int x = 0; x < width; ++x) {
      std::array<double, 3> acc{};
      for (int dy = lo; dy <= hi; ++dy) {
        const double wf = g[dy + r] * img[static_cast<std::size_t>(y + dy) * width + x];
        acc[0] += wf;
        acc[1] += wf * dy;
        acc[2] += wf * dy * dy;
      }
      vert[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }

  // 1-D applicability moments sum g(d) d^k, k = 0..4, over the valid support.
  auto moments = [&](int lo, int hi) {
    std::array<double, 5> m{};
    for (int d = lo; d <= hi; ++d) {
      double p = g[d + r];
      for (int k = 0; k < 5; ++k, p *= d) m[k] += p;
    }
    return m;
  };

  // Basis 1, dx, dy, dx^2, dy^2, dx*dy as (x power, y power).
  static constexpr int kPx[6] = {0, 1, 0, 2, 0, 1};
  static constexpr int kPy[6] = {0, 0, 1, 0, 2, 1};
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  std::map<std::array<int, 4>, Mat6> inverse_cache;
  auto inverse_for = [&](int xlo, int xhi, int ylo, int yhi) -> const Mat6& {
    const std::array<int, 4> key{xlo, xhi, ylo, yhi};
    auto it = inverse_cache.find(key);
    if (it != inverse_cache.end()) return it->second;
    const auto mx = moments(xlo, xhi), my = moments(ylo, yhi);
    Mat6 gram;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) gram(i, j) = mx[kPx[i] + kPx[j]] * my[kPy[i] + kPy[j]];
    return inverse_cache.emplace(key, gram.inverse()).first->second;
  };

  PolyExpansion out;
  out.height = height;
  out.width = width;
  out.coeffs.resize(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const int ylo = std::max(-r, -y), yhi = std::min(r, height - 1 - y);
    for (int x = 0; x < width; ++x) {
      const int xlo = std::max(-r, -x), xhi = std::min(r, width - 1 - x);
      Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
      for (int dx = xlo; dx <= xhi; ++dx) {
        const auto& v = vert[static_cast<std::size_t>(y) * width + x + dx];
        const double w = g[dx + r];
        rhs[0] += w * v[0];
        rhs[1] += w * dx * v[0];
        rhs[2] += w * v[1];
        rhs[3] += w * dx * dx * v[0];
        rhs[4] += w * v[2];
        rhs[5] += w * dx * v[1];
      }
      const Eigen::Matrix<double, 6, 1> sol = inverse_for(xlo, xhi, ylo, yhi) * rhs;
      out.coeffs[static_cast<std::size_t>(y) * width + x] = {sol[0], sol[1], sol[2], sol[3], sol[4], sol[5] * 0.5};
    }
  }
  return out;
}

inline PolyExpansion poly_expand(const Frame& gray, int poly_n, double poly_sigma) {
  if (gray.channels() != 1) throw ChannelError("poly_expand expects a single-channel frame");
  std::vector<double> img(gray.data().begin(), gray.data().end());
  return poly_expand_plane(img, gray.height(), gray.width(), poly_n, poly_sigma);
}

}  // namespace burstnet
