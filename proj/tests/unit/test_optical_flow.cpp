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
#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "burstnet/color.hpp"
#include "burstnet/optical_flow.hpp"
#include "burstnet/rng.hpp"
#include "burstnet/texture.hpp"

namespace burstnet {
namespace {

// Dense weighted least squares on one window: builds the full design
// matrix and solves it with QR.
PolyCoeffs dense_fit(const std::vector<double>& img, int h, int w, int y, int x, int n, double sigma) {
  const int r = n / 2;
  std::vector<std::array<double, 7>> rows;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int yy = y + dy, xx = x + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
      const double s = std::sqrt(std::exp(-(dx * dx) / (2 * sigma * sigma)) * std::exp(-(dy * dy) / (2 * sigma * sigma)));
      rows.push_back({s, s * dx, s * dy, s * dx * dx, s * dy * dy, s * dx * dy, s * img[yy * w + xx]});
    }
  Eigen::MatrixXd a(rows.size(), 6);
  Eigen::VectorXd rhs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < 6; ++j) a(i, j) = rows[i][j];
    rhs[i] = rows[i][6];
  }
  const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
  return {sol[0], sol[1], sol[2], sol[3], sol[4], sol[5] / 2};
}

std::vector<double> quadratic_image(int h, int w, double axx, double ayy, double axy, double bx, double by, double c) {
  std::vector<double> img(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = x - w / 2.0, v = y - h / 2.0;
      img[y * w + x] = axx * u * u + ayy * v * v + 2 * axy * u * v + bx * u + by * v + c;
    }
  return img;
}

TEST(PolyExpand, ConstantImage) {
  const auto e = poly_expand(Frame::filled(12, 12, 1, 0.7f), 5, 1.2);
  for (int y = 2; y < 10; ++y)
    for (int x = 2; x < 10; ++x) {
      const auto& p = e.at(y, x);
      EXPECT_NEAR(p.c, 0.7, 1e-6);
      for (double v : {p.bx, p.by, p.axx, p.ayy, p.axy}) EXPECT_NEAR(v, 0.0, 1e-6);
    }
}

TEST(PolyExpand, RampMatchesDenseOracle) {
  const int h = 12, w = 16;
  std::vector<double> img(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img[y * w + x] = 0.01 * x;
  const auto e = poly_expand_plane(img, h, w, 5, 1.2);
  for (int y = 2; y < h - 2; ++y)
    for (int x = 2; x < w - 2; ++x) {
      const auto& p = e.at(y, x);
      const auto o = dense_fit(img, h, w, y, x, 5, 1.2);
      EXPECT_NEAR(p.bx, 0.01, 1e-9);
      EXPECT_NEAR(p.bx, o.bx, 1e-9);
      EXPECT_NEAR(p.by, 0.0, 1e-9);
      EXPECT_NEAR(p.axx, 0.0, 1e-9);
    }
}

TEST(PolyExpand, QuadraticRecoversCoefficients) {
  const int h = 14, w = 14;
  const double a = 0.003;
  std::vector<double> img(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img[y * w + x] = a * x * x;
  const auto e = poly_expand_plane(img, h, w, 5, 1.2);
  for (int y = 2; y < h - 2; ++y)
    for (int x = 2; x < w - 2; ++x) {
      EXPECT_NEAR(e.at(y, x).axx, a, 1e-6);
      EXPECT_NEAR(e.at(y, x).axy, 0.0, 1e-6);
      EXPECT_NEAR(e.at(y, x).ayy, 0.0, 1e-6);
    }
}

TEST(PolyExpand, RandomQuadraticsMatchOracleEverywhere) {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = trial % 2 ? 7 : 5;
    const double sigma = n == 5 ? 1.1 : 1.5;
    const int h = 11 + trial, w = 13;
    const auto img = quadratic_image(h, w, uniform(rng, -1e-3, 1e-3), uniform(rng, -1e-3, 1e-3),
                                     uniform(rng, -1e-3, 1e-3), uniform(rng, -0.02, 0.02),
                                     uniform(rng, -0.02, 0.02), uniform(rng, 0.3, 0.7));
    const auto e = poly_expand_plane(img, h, w, n, sigma);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto o = dense_fit(img, h, w, y, x, n, sigma);
        const auto& p = e.at(y, x);
        EXPECT_NEAR(p.c, o.c, 1e-6);
        EXPECT_NEAR(p.bx, o.bx, 1e-6);
        EXPECT_NEAR(p.by, o.by, 1e-6);
        EXPECT_NEAR(p.axx, o.axx, 1e-6);
        EXPECT_NEAR(p.ayy, o.ayy, 1e-6);
        EXPECT_NEAR(p.axy, o.axy, 1e-6);
      }
  }
}

TEST(PolyExpand, FrameSmallerThanWindow) {
  EXPECT_THROW(poly_expand(Frame::filled(4, 8, 1, 0.f), 5, 1.2), DimensionError);
  EXPECT_THROW(poly_expand(Frame::filled(8, 8, 3, 0.f), 5, 1.2), ChannelError);
}

struct ShiftedPair {
  Frame prev, next;
};

// next(p + d) = prev(p) for a smooth random texture.
ShiftedPair shifted_texture(int size, int dx, int dy, std::uint64_t seed) {
  const int pad = 8;
  Rng rng = make_rng(seed);
  const int big = size + 2 * pad;
  const auto tex = smooth_noise(big, big, 2.0, 0.15, rng);
  return {crop_plane(tex, big, pad, pad, size, size), crop_plane(tex, big, pad - dy, pad - dx, size, size)};
}

struct FlowStats {
  double median_dx, median_dy, mean_epe;
};

FlowStats flow_stats(const FlowField& f, double gx, double gy) {
  std::vector<double> xs, ys;
  double epe = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      xs.push_back(f.dx(y, x));
      ys.push_back(f.dy(y, x));
      epe += std::hypot(f.dx(y, x) - gx, f.dy(y, x) - gy);
    }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  return {median(xs), median(ys), epe / xs.size()};
}

TEST(EstimateFlow, IdenticalFramesGiveZeroFlow) {
  const auto pair = shifted_texture(64, 0, 0, 1);
  const auto f = estimate_flow(pair.prev, pair.prev);
  for (float v : f.data) EXPECT_LE(std::abs(v), 1e-3);
}

TEST(EstimateFlow, RecoversKnownTranslations) {
  const int shifts[][2] = {{3, 0}, {-2, 1}, {0, -4}, {2, 2}};
  std::uint64_t seed = 100;
  for (const auto& s : shifts) {
    const auto pair = shifted_texture(96, s[0], s[1], seed++);
    const auto st = flow_stats(estimate_flow(pair.prev, pair.next), s[0], s[1]);
    EXPECT_NEAR(st.median_dx, s[0], 0.3) << s[0] << "," << s[1];
    EXPECT_NEAR(st.median_dy, s[1], 0.3) << s[0] << "," << s[1];
    EXPECT_LE(st.mean_epe, 0.5) << s[0] << "," << s[1];
  }
}

TEST(EstimateFlow, ApproximatelyAntisymmetric) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto pair = shifted_texture(80, 2, -1, seed);
    const auto fwd = estimate_flow(pair.prev, pair.next);
    const auto bwd = estimate_flow(pair.next, pair.prev);
    std::vector<double> dev;
    for (std::size_t i = 0; i < fwd.data.size(); ++i) dev.push_back(std::abs(fwd.data[i] + bwd.data[i]));
    std::nth_element(dev.begin(), dev.begin() + dev.size() / 2, dev.end());
    EXPECT_LE(dev[dev.size() / 2], 0.5);
  }
}

TEST(EstimateFlow, MismatchedSizes) {
  EXPECT_THROW(estimate_flow(Frame::filled(16, 16, 1, 0.f), Frame::filled(16, 18, 1, 0.f)), DimensionError);
}

TEST(FlowToRgb, ZeroFlowIsBlack) {
  const FlowField f{4, 4, std::vector<float>(32, 0.0f)};
  const Frame img = flow_to_rgb(f);
  for (float v : img.data()) EXPECT_EQ(v, 0.0f);
}

TEST(FlowToRgb, CapMagnitudeAlongXIsRed) {
  FlowField f{2, 3, {}};
  for (int i = 0; i < 6; ++i) f.data.insert(f.data.end(), {8.0f, 0.0f});
  const Frame img = flow_to_rgb(f, 8.0);
  // Hue 0, saturation 1, value 1 -> (1, 0, 0).
  const auto expect = hsv_to_rgb(0.0, 1.0, 1.0);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(img.at(y, x, c), static_cast<float>(expect[c]));
  EXPECT_FLOAT_EQ(img.at(0, 0, 0), 1.0f);
}

TEST(FlowToRgb, OppositeDirectionsDifferByHalfTurn) {
  const FlowField f{1, 2, {3.0f, 0.0f, -3.0f, 0.0f}};
  const Frame img = flow_to_rgb(f, 8.0);
  const auto h0 = rgb_to_hsv(img.at(0, 0, 0), img.at(0, 0, 1), img.at(0, 0, 2));
  const auto h1 = rgb_to_hsv(img.at(0, 1, 0), img.at(0, 1, 1), img.at(0, 1, 2));
  EXPECT_NEAR(std::fmod(h1[0] - h0[0] + 1.0, 1.0), 0.5, 1e-6);
}

TEST(FlowToRgb, OutputInUnitRangeAndRejectsNonFinite) {
  Rng rng = make_rng(3);
  FlowField f{8, 8, std::vector<float>(128)};
  for (float& v : f.data) v = static_cast<float>(normal(rng, 0, 20));
  const Frame img = flow_to_rgb(f);
  for (float v : img.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  f.data[5] = std::nanf("");
  EXPECT_THROW(flow_to_rgb(f), NumericError);
  EXPECT_THROW(flow_to_rgb(f, 0.0), ContractError);
}

TEST(AverageFlowImages, Arithmetic) {
  const Frame a = Frame::filled(2, 2, 3, 0.4f), z = Frame::filled(2, 2, 3, 0.0f);
  EXPECT_EQ(average_flow_images(a, a), a);
  const Frame half = average_flow_images(a, z);
  for (float v : half.data()) EXPECT_FLOAT_EQ(v, 0.2f);
  const Frame p(1, 1, 3, {0.2f, 0.8f, 0.0f}), q(1, 1, 3, {0.6f, 0.0f, 1.0f});
  const Frame m = average_flow_images(p, q);
  EXPECT_FLOAT_EQ(m.at(0, 0, 0), 0.4f);
  EXPECT_FLOAT_EQ(m.at(0, 0, 1), 0.4f);
  EXPECT_FLOAT_EQ(m.at(0, 0, 2), 0.5f);
  EXPECT_EQ(average_flow_images(p, q), average_flow_images(q, p));
  EXPECT_THROW(average_flow_images(a, Frame::filled(2, 3, 3, 0.f)), DimensionError);
}

// Textured blob on a flat background at a given top-left position.
Frame blob_frame(int size, int top, int left) {
  Frame f = Frame::filled(size, size, 3, 0.3f);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      const double v = 0.6 + 0.3 * std::sin(0.9 * x) * std::cos(0.7 * y);
      for (int c = 0; c < 3; ++c) f.at(top + y, left + x, c) = static_cast<float>(v);
    }
  return f;
}

double patch_hue(const Frame& img, int top, int left) {
  // Mean hue over the centre of the patch, from the mean colour.
  double r = 0, g = 0, b = 0;
  for (int y = top + 4; y < top + 8; ++y)
    for (int x = left + 4; x < left + 8; ++x) {
      r += img.at(y, x, 0);
      g += img.at(y, x, 1);
      b += img.at(y, x, 2);
    }
  return rgb_to_hsv(r, g, b)[0];
}

TEST(BurstFlowImages, StaticBurstIsBlack) {
  Burst b;
  b.frames = {blob_frame(48, 10, 10), blob_frame(48, 10, 10), blob_frame(48, 10, 10)};
  const auto out = burst_flow_images(b);
  for (const Frame* f : {&out.flow12, &out.flow23, &out.averaged})
    for (float v : f->data()) EXPECT_LE(v, 1e-3f);
}

TEST(BurstFlowImages, ConstantMotionGivesMatchingHue) {
  Burst b;
  b.frames = {blob_frame(48, 16, 12), blob_frame(48, 16, 14), blob_frame(48, 16, 16)};
  const auto out = burst_flow_images(b);
  const double h12 = patch_hue(out.flow12, 16, 13), h23 = patch_hue(out.flow23, 16, 15);
  EXPECT_LT(std::min(std::abs(h12 - h23), 1 - std::abs(h12 - h23)), 0.03);
  EXPECT_LT(std::min(h12, 1 - h12), 0.05);  // motion along +x renders red
}

TEST(BurstFlowImages, TurnGivesQuarterHueShift) {
  Burst b;
  b.frames = {blob_frame(48, 14, 12), blob_frame(48, 14, 14), blob_frame(48, 16, 14)};
  const auto out = burst_flow_images(b);
  const double h12 = patch_hue(out.flow12, 14, 13), h23 = patch_hue(out.flow23, 15, 14);
  const double diff = std::fmod(h23 - h12 + 1.0, 1.0);
  EXPECT_NEAR(diff, 0.25, 0.04);
}

}  // namespace
}  // namespace burstnet
