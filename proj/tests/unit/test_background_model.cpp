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

#include <array>
#include <cmath>

#include "burstnet/background_model.hpp"
#include "burstnet/rng.hpp"

namespace burstnet {
namespace {

// Straight-line scalar reference for one pixel, fixed-capacity arrays and
// insertion sort; written independently of PixelMixture.
struct ScalarMixture {
  int n = 0;
  std::array<double, 8> w{}, mu{}, var{};

  bool step(double x, const Mog2Params& p) {
    const double a = p.learning_rate;
    int hit = -1;
    double best = 1e300;
    for (int k = 0; k < n; ++k) {
      const double diff = x - mu[k];
      const double m = diff * diff / var[k];
      if (m < p.var_threshold && m < best) {
        best = m;
        hit = k;
      }
    }
    bool bg = false;
    if (hit >= 0) {
      double acc = 0;
      for (int k = 0; k < n; ++k) {
        if (k == hit) {
          bg = true;
          break;
        }
        acc += w[k];
        if (acc >= p.background_ratio) break;
      }
      for (int k = 0; k < n; ++k) w[k] = (1.0 - a) * w[k] + (k == hit ? a : 0.0);
      const double rho = a / w[hit];
      const double diff = x - mu[hit];
      mu[hit] = (1.0 - rho) * mu[hit] + rho * x;
      double v = (1.0 - rho) * var[hit] + rho * diff * diff;
      if (v < p.var_min) v = p.var_min;
      if (v > p.var_max) v = p.var_max;
      var[hit] = v;
    } else {
      for (int k = 0; k < n; ++k) w[k] *= (1.0 - a);
      const int slot = n < p.max_components ? n++ : n - 1;
      w[slot] = a;
      mu[slot] = x;
      var[slot] = p.var_init;
    }
    int m = 0;
    for (int k = 0; k < n; ++k)
      if (!(w[k] < a * p.complexity_prune)) {
        w[m] = w[k];
        mu[m] = mu[k];
        var[m] = var[k];
        ++m;
      }
    n = m;
    double total = 0;
    for (int k = 0; k < n; ++k) total += w[k];
    for (int k = 0; k < n; ++k) w[k] /= total;
    for (int i = 1; i < n; ++i)
      for (int j = i; j > 0 && w[j] / std::sqrt(var[j]) > w[j - 1] / std::sqrt(var[j - 1]); --j) {
        std::swap(w[j], w[j - 1]);
        std::swap(mu[j], mu[j - 1]);
        std::swap(var[j], var[j - 1]);
      }
    return !bg;
  }
};

TEST(Mog2, IdenticalFrameIsBackground) {
  Rng rng = make_rng(1);
  Frame f(8, 8, 1);
  for (float& v : f.mutable_data()) v = static_cast<float>(uniform01(rng));
  Mog2Model model(f, {});
  const ForegroundMask mask = model.update(f);
  for (float v : mask.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Mog2, FarValueIsForeground) {
  // (0.9 - 0.2)^2 / 0.0225 = 21.8 > 16.
  Mog2Model model(Frame::filled(4, 4, 1, 0.2f), {});
  const ForegroundMask mask = model.update(Frame::filled(4, 4, 1, 0.9f));
  for (float v : mask.data()) EXPECT_EQ(v, 1.0f);
}

TEST(Mog2, MatchedUpdateMovesMean) {
  Mog2Params p;
  Mog2Model model(Frame::filled(1, 1, 1, 0.5f), p);
  model.update(Frame::filled(1, 1, 1, 0.55f));
  const auto& c = model.pixel(0, 0).components;
  ASSERT_EQ(c.size(), 1u);
  // weight (1-a)*1 + a = 1, rho = a / 1.
  const double x = static_cast<double>(0.55f), rho = 0.3;
  EXPECT_DOUBLE_EQ(c[0].weight, 1.0);
  EXPECT_DOUBLE_EQ(c[0].mean, (1 - rho) * 0.5 + rho * x);
  EXPECT_DOUBLE_EQ(c[0].variance, (1 - rho) * 0.0225 + rho * (x - 0.5) * (x - 0.5));
}

TEST(Mog2, TrajectoriesMatchScalarReference) {
  Rng rng = make_rng(99);
  for (int seq = 0; seq < 100; ++seq) {
    Mog2Params p;
    p.max_components = 1 + static_cast<int>(uniform_index(rng, 5));
    p.learning_rate = uniform(rng, 0.05, 0.6);
    const double first = uniform01(rng);
    Mog2Model model(Frame::filled(1, 1, 1, static_cast<float>(first)), p);
    ScalarMixture ref;
    ref.n = 1;
    ref.w[0] = 1.0;
    ref.mu[0] = static_cast<float>(first);
    ref.var[0] = p.var_init;
    for (int t = 0; t < 30; ++t) {
      const double base = uniform01(rng) < 0.5 ? 0.3 : 0.7;
      const float x = static_cast<float>(std::clamp(base + normal(rng, 0, 0.1), 0.0, 1.0));
      const bool fg = model.update(Frame::filled(1, 1, 1, x)).at(0, 0) == 1.0f;
      ASSERT_EQ(fg, ref.step(x, p)) << "seq " << seq << " t " << t;
      const auto& c = model.pixel(0, 0).components;
      ASSERT_EQ(static_cast<int>(c.size()), ref.n);
      double sum = 0;
      for (int k = 0; k < ref.n; ++k) {
        ASSERT_EQ(c[k].weight, ref.w[k]);
        ASSERT_EQ(c[k].mean, ref.mu[k]);
        ASSERT_EQ(c[k].variance, ref.var[k]);
        EXPECT_GE(c[k].variance, p.var_min);
        EXPECT_LE(c[k].variance, p.var_max);
        sum += c[k].weight;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
      for (int k = 1; k < ref.n; ++k)
        EXPECT_GE(c[k - 1].weight / std::sqrt(c[k - 1].variance), c[k].weight / std::sqrt(c[k].variance));
    }
  }
}

TEST(Mog2, RejectsMismatchedFrame) {
  Mog2Model model(Frame::filled(4, 4, 1, 0.2f), {});
  EXPECT_THROW(model.update(Frame::filled(4, 5, 1, 0.2f)), DimensionError);
  Mog2Params bad;
  bad.var_init = 1.0;
  EXPECT_THROW(Mog2Model(Frame::filled(2, 2, 1, 0.f), bad), ConfigError);
}

Frame square_frame(int size, int top, int left, Rng& rng, double noise) {
  Frame f(size, size, 1);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const bool in = y >= top && y < top + 8 && x >= left && x < left + 8;
      f.at(y, x) = static_cast<float>(std::clamp((in ? 0.9 : 0.1) + normal(rng, 0, noise), 0.0, 1.0));
    }
  return f;
}

TEST(BurstForeground, StaticBurstIsEmpty) {
  Rng rng = make_rng(4);
  Burst b;
  const Frame f = square_frame(32, 10, 10, rng, 0.0);
  b.frames = {f, f, f};
  const ForegroundMask mask = burst_foreground(b);
  for (float v : mask.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BurstForeground, MovingSquareCoversUnion) {
  Rng rng = make_rng(5);
  Burst b;
  b.frames = {square_frame(32, 12, 4, rng, 0.01), square_frame(32, 12, 8, rng, 0.01), square_frame(32, 12, 12, rng, 0.01)};
  const ForegroundMask mask = burst_foreground(b);
  int inter = 0, uni = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool truth = y >= 12 && y < 20 && x >= 8 && x < 20;
      const bool got = mask.at(y, x) == 1.0f;
      EXPECT_TRUE(mask.at(y, x) == 0.0f || got);
      inter += truth && got;
      uni += truth || got;
    }
  EXPECT_GE(static_cast<double>(inter) / uni, 0.5);
}

TEST(BurstForeground, SmallIlluminationStepStaysBackground) {
  Rng rng = make_rng(6);
  Burst b;
  Frame f1(32, 32, 1);
  for (float& v : f1.mutable_data()) v = static_cast<float>(uniform(rng, 0.2, 0.7));
  Frame f2 = f1, f3 = f1;
  for (float& v : f2.mutable_data()) v += 0.02f;
  for (float& v : f3.mutable_data()) v += 0.04f;
  b.frames = {f1, f2, f3};
  const ForegroundMask mask = burst_foreground(b);
  double fg = 0;
  for (float v : mask.data()) fg += v;
  EXPECT_LT(fg / mask.size(), 0.05);
}

}  // namespace
}  // namespace burstnet
