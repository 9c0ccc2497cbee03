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

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "burstnet/learner/models.hpp"
#include "burstnet/learner/optim.hpp"
#include "burstnet/rng.hpp"

namespace burstnet::learner {
namespace {

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-4;
// Gradients below this magnitude are compared absolutely; central
// differences carry roughly 1e-10 of truncation and round-off error.
constexpr double kFloor = 1e-6;
// Inputs whose ReLU or pooling decisions sit this close to a tie are redrawn.
constexpr double kKinkMargin = 2e-4;

Planes<double> random_planes(int c, int h, int w, Rng& rng) {
  Planes<double> p(c, h, w);
  for (double& v : p.v) v = uniform01(rng);
  return p;
}

template <class Model>
void randomize(Model& m, Rng& rng, double sd) {
  for (double& v : m.params()) v = normal(rng, 0.0, sd);
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFloor}); }

template <class Model>
double max_fd_error(Model& m, const typename Model::Input& x, double y) {
  std::vector<double> grad;
  std::array<typename Model::Input, 1> xs{x};
  std::array<double, 1> ys{y};
  m.loss_and_grad(std::span<const typename Model::Input>(xs), std::span<const double>(ys), grad);
  double worst = 0.0;
  auto& theta = m.params();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + kStep;
    const double lp = m.loss(std::span<const typename Model::Input>(xs), std::span<const double>(ys));
    theta[i] = keep - kStep;
    const double lm = m.loss(std::span<const typename Model::Input>(xs), std::span<const double>(ys));
    theta[i] = keep;
    worst = std::max(worst, rel_error(grad[i], (lp - lm) / (2 * kStep)));
  }
  return worst;
}

TEST(CnnGradient, MatchesFiniteDifferences) {
  Rng rng = make_rng(11, {1});
  int accepted = 0;
  for (int attempt = 0; accepted < 20 && attempt < 400; ++attempt) {
    CnnModel<double> m(4);
    randomize(m, rng, 0.3);
    const auto x = random_planes(4, 8, 8, rng);
    if (m.kink_margin(x) < kKinkMargin) continue;
    const double y = static_cast<double>(attempt % 2);
    EXPECT_LE(max_fd_error(m, x, y), kTolerance) << "draw " << accepted;
    ++accepted;
  }
  EXPECT_EQ(accepted, 20);
}

TEST(LstmGradient, MatchesFiniteDifferences) {
  Rng rng = make_rng(12, {1});
  int accepted = 0;
  for (int attempt = 0; accepted < 20 && attempt < 4000; ++attempt) {
    LstmModel<double> m;
    randomize(m, rng, 0.3);
    LstmModel<double>::Input x{random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng)};
    if (m.kink_margin(x) < kKinkMargin) continue;
    const double y = static_cast<double>(attempt % 2);
    EXPECT_LE(max_fd_error(m, x, y), kTolerance) << "draw " << accepted;
    ++accepted;
  }
  EXPECT_EQ(accepted, 20);
}

TEST(CnnGradient, BatchGradientIsMeanOfSamples) {
  Rng rng = make_rng(13, {});
  CnnModel<double> m(3);
  randomize(m, rng, 0.3);
  std::vector<Planes<double>> xs{random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng)};
  std::vector<double> ys{1, 0, 1};
  std::vector<double> g_all, g_one, sum(m.params().size(), 0.0);
  const double loss = m.loss_and_grad(std::span<const Planes<double>>(xs), std::span<const double>(ys), g_all);
  double loss_sum = 0;
  for (std::size_t b = 0; b < xs.size(); ++b) {
    loss_sum += m.loss_and_grad(std::span<const Planes<double>>(&xs[b], 1), std::span<const double>(&ys[b], 1), g_one);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g_one[i];
  }
  EXPECT_NEAR(loss, loss_sum / 3, 1e-12);
  for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(g_all[i], sum[i] / 3, 1e-12);
}

TEST(CnnGradient, DenseBiasIsMeanResidual) {
  Rng rng = make_rng(14, {});
  CnnModel<double> m(3);
  m.init(rng);
  std::vector<Planes<double>> xs;
  std::vector<double> ys;
  for (int b = 0; b < 6; ++b) {
    xs.push_back(random_planes(3, 8, 8, rng));
    ys.push_back(b % 3 == 0 ? 1.0 : 0.0);
  }
  std::vector<double> g;
  m.loss_and_grad(std::span<const Planes<double>>(xs), std::span<const double>(ys), g);
  double expect = 0;
  for (std::size_t b = 0; b < xs.size(); ++b) expect += m.predict(xs[b]) - ys[b];
  EXPECT_NEAR(g[m.layout().find("dense.bias").offset], expect / 6, 1e-14);
}

TEST(CnnGradient, DeadFilterHasZeroKernelGradient) {
  Rng rng = make_rng(15, {});
  CnnModel<double> m(3);
  m.init(rng);
  m.params()[m.layout().find("conv1.bias").offset] = -100.0;
  std::vector<Planes<double>> xs{random_planes(3, 8, 8, rng)};
  std::vector<double> ys{1};
  std::vector<double> g;
  m.loss_and_grad(std::span<const Planes<double>>(xs), std::span<const double>(ys), g);
  const auto& w = m.layout().find("conv1.weight");
  for (std::size_t i = 0; i < 27; ++i) EXPECT_EQ(g[w.offset + i], 0.0);
  EXPECT_EQ(g[m.layout().find("conv1.bias").offset], 0.0);
  bool any = false;
  for (std::size_t i = 27; i < w.size; ++i) any |= g[w.offset + i] != 0.0;
  EXPECT_TRUE(any);
}

TEST(LstmGradient, TrunkGradientIsSumOverSteps) {
  Rng rng = make_rng(16, {});
  LstmModel<double> m;
  LstmModel<double>::Input x;
  do {
    randomize(m, rng, 0.3);
    x = {random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng)};
  } while (m.kink_margin(x) < kKinkMargin);
  const double y = 1.0;
  std::array<std::vector<double>, 3> step_theta{m.params(), m.params(), m.params()};
  std::vector<double> rest;
  std::array<std::vector<double>, 3> step_grad;
  m.untied_loss_and_grad(x, y, step_theta, rest, step_grad);

  std::vector<double> tied;
  std::array<LstmModel<double>::Input, 1> xs{x};
  std::array<double, 1> ys{y};
  m.loss_and_grad(std::span<const LstmModel<double>::Input>(xs), std::span<const double>(ys), tied);

  std::vector<double> unused;
  std::array<std::vector<double>, 3> unused_steps;
  for (const char* name : {"trunk.conv1.weight", "trunk.conv1.bias", "trunk.conv2.weight", "trunk.conv2.bias"}) {
    const auto& s = m.layout().find(name);
    for (std::size_t i = s.offset; i < s.offset + s.size; i += 7) {
      double total = 0;
      for (int t = 0; t < 3; ++t) {
        auto perturbed = step_theta;
        perturbed[t][i] += kStep;
        const double lp = m.untied_loss_and_grad(x, y, perturbed, unused, unused_steps);
        perturbed[t][i] -= 2 * kStep;
        const double lm = m.untied_loss_and_grad(x, y, perturbed, unused, unused_steps);
        const double fd = (lp - lm) / (2 * kStep);
        EXPECT_LE(rel_error(step_grad[t][i], fd), kTolerance) << name << " step " << t;
        total += step_grad[t][i];
      }
      EXPECT_NEAR(tied[i], total, 1e-12) << name;
    }
  }
}

TEST(CnnForward, ZeroWeightsGiveHalf) {
  CnnModel<double> m(7);
  Rng rng = make_rng(17, {});
  EXPECT_EQ(m.predict(random_planes(7, 16, 16, rng)), 0.5);
  LstmModel<double> l;
  LstmModel<double>::Input x{random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng), random_planes(3, 8, 8, rng)};
  EXPECT_EQ(l.predict(x), 0.5);
}

TEST(CnnForward, DoublingDenseDoublesLogit) {
  Rng rng = make_rng(18, {});
  CnnModel<double> m(3);
  m.init(rng);
  const auto x = random_planes(3, 16, 16, rng);
  const double z = m.logit(x);
  const auto& w = m.layout().find("dense.weight");
  for (std::size_t i = 0; i < w.size; ++i) m.params()[w.offset + i] *= 2;
  EXPECT_NEAR(m.logit(x), 2 * z, 1e-12);
  EXPECT_NEAR(m.predict(x), 1.0 / (1.0 + std::exp(-2 * z)), 1e-12);
}

TEST(CnnForward, ChannelMismatchIsContractError) {
  CnnModel<double> m(4);
  EXPECT_THROW(m.logit(Planes<double>(3, 8, 8)), ContractError);
}

// Direct convolution loops with no im2col, pooling by explicit windows.
std::vector<double> ref_conv_relu_pool(const std::vector<double>& in, int c_in, int h, int w, const double* k,
                                       const double* b, int c_out) {
  std::vector<double> conv(static_cast<std::size_t>(c_out) * h * w);
  for (int o = 0; o < c_out; ++o)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = b[o];
        for (int c = 0; c < c_in; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              s += k[((o * c_in + c) * 3 + dy + 1) * 3 + dx + 1] * in[(c * h + yy) * w + xx];
            }
        conv[(o * h + y) * w + x] = s > 0 ? s : 0;
      }
  std::vector<double> out(static_cast<std::size_t>(c_out) * (h / 2) * (w / 2));
  for (int o = 0; o < c_out; ++o)
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x) {
        const double* p = conv.data() + (o * h + 2 * y) * w + 2 * x;
        out[(o * (h / 2) + y) * (w / 2) + x] = std::max({p[0], p[1], p[w], p[w + 1]});
      }
  return out;
}

TEST(CnnForward, MatchesStraightLineReference) {
  Rng rng = make_rng(19, {});
  CnnModel<double> m(6);
  randomize(m, rng, 0.2);
  const int h = 12, w = 10;
  const auto x = random_planes(6, h, w, rng);
  const auto& th = m.params();
  const auto& L = m.layout();
  auto a1 = ref_conv_relu_pool(x.v, 6, h, w, &th[L.find("conv1.weight").offset], &th[L.find("conv1.bias").offset], 16);
  auto a2 = ref_conv_relu_pool(a1, 16, h / 2, w / 2, &th[L.find("conv2.weight").offset],
                               &th[L.find("conv2.bias").offset], 32);
  const int n = (h / 4) * (w / 4);
  double z = th[L.find("dense.bias").offset];
  for (int k = 0; k < 32; ++k) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += a2[k * n + i];
    z += th[L.find("dense.weight").offset + k] * s / n;
  }
  EXPECT_NEAR(m.logit(x), z, 1e-12);
  EXPECT_NEAR(m.predict(x), 1 / (1 + std::exp(-z)), 1e-12);
}

TEST(Adam, FirstStepMatchesScalarOracle) {
  AdamParams p;
  for (double g : {0.3, -2.0, 1e-6}) {
    Adam<double> opt(1, p);
    std::vector<double> theta{1.0};
    std::vector<double> grad{g};
    opt.step(std::span<double>(theta), std::span<const double>(grad));
    // m_hat = g, v_hat = g^2 after bias correction.
    const double expect = 1.0 - p.learning_rate * g / (std::abs(g) + p.epsilon);
    EXPECT_NEAR(theta[0], expect, 1e-15);
    EXPECT_NEAR(theta[0], 1.0 - p.learning_rate * (g > 0 ? 1 : -1), 1e-2 * p.learning_rate);
  }
}

TEST(Adam, SecondStepMatchesScalarOracle) {
  AdamParams p;
  p.learning_rate = 0.01;
  Adam<double> opt(1, p);
  std::vector<double> theta{0.0};
  const double g1 = 0.5, g2 = -0.2;
  std::vector<double> grad{g1};
  opt.step(std::span<double>(theta), std::span<const double>(grad));
  grad[0] = g2;
  opt.step(std::span<double>(theta), std::span<const double>(grad));
  const double m = 0.9 * 0.1 * g1 + 0.1 * g2;
  const double v = 0.999 * 0.001 * g1 * g1 + 0.001 * g2 * g2;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double expect = -0.01 * g1 / (std::abs(g1) + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  EXPECT_NEAR(theta[0], expect, 1e-14);
}

TEST(Training, MemorizesSmallSet) {
  Rng rng = make_rng(20, {});
  CnnModel<float> m(3);
  m.init(rng);
  std::vector<Planes<float>> xs;
  std::vector<float> ys;
  for (int i = 0; i < 32; ++i) {
    Planes<float> p(3, 16, 16);
    for (float& v : p.v) v = static_cast<float>(uniform01(rng));
    xs.push_back(std::move(p));
    ys.push_back(static_cast<float>(i % 2));
  }
  AdamParams ap;
  ap.learning_rate = 1e-2;
  Adam<float> opt(m.params().size(), ap);
  std::vector<float> g;
  float loss = 1;
  int steps = 0;
  for (; steps < 500 && loss >= 0.1f; ++steps) {
    loss = m.loss_and_grad(std::span<const Planes<float>>(xs), std::span<const float>(ys), g);
    opt.step(std::span<float>(m.params()), std::span<const float>(g));
  }
  EXPECT_LT(loss, 0.1f) << "after " << steps << " steps";
}

TEST(WarmStart, CopiesTripletsAndDrawsMog2) {
  Rng rng = make_rng(21, {});
  CnnModel<double> src(3);
  src.init(rng);
  randomize(src, rng, 0.1);
  using R = ChannelRole;
  const std::vector<R> roles{R::kImage1, R::kImage1, R::kImage1, R::kMog2};
  CnnModel<double> dst(4);
  warm_start_input_layer(dst, src, std::span<const R>(roles), rng);
  const auto& sw = src.layout().find("conv1.weight");
  const auto& dw = dst.layout().find("conv1.weight");
  for (int o = 0; o < 16; ++o) {
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < 9; ++t)
        EXPECT_EQ(dst.params()[dw.offset + (o * 4 + c) * 9 + t], src.params()[sw.offset + (o * 3 + c) * 9 + t]);
    bool nonzero = false;
    for (int t = 0; t < 9; ++t) nonzero |= dst.params()[dw.offset + (o * 4 + 3) * 9 + t] != 0.0;
    EXPECT_TRUE(nonzero);
  }
  for (const char* name : {"conv1.bias", "conv2.weight", "conv2.bias", "dense.weight", "dense.bias"}) {
    const auto& a = src.layout().find(name);
    const auto& b = dst.layout().find(name);
    for (std::size_t i = 0; i < a.size; ++i) EXPECT_EQ(src.params()[a.offset + i], dst.params()[b.offset + i]);
  }
}

TEST(WarmStart, HybridLayoutCopiesFourTriplets) {
  Rng rng = make_rng(22, {});
  CnnModel<float> src(3);
  src.init(rng);
  using R = ChannelRole;
  const std::vector<R> roles{R::kImage1, R::kImage1, R::kImage1, R::kImage2, R::kImage2, R::kImage2, R::kImage3,
                             R::kImage3, R::kImage3, R::kFlowAveraged, R::kFlowAveraged, R::kFlowAveraged, R::kMog2};
  CnnModel<float> dst(13);
  warm_start_input_layer(dst, src, std::span<const R>(roles), rng);
  const auto& sw = src.layout().find("conv1.weight");
  const auto& dw = dst.layout().find("conv1.weight");
  for (int o = 0; o < 16; ++o)
    for (int trip = 0; trip < 4; ++trip)
      for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 9; ++t)
          ASSERT_EQ(dst.params()[dw.offset + (o * 13 + trip * 3 + c) * 9 + t],
                    src.params()[sw.offset + (o * 3 + c) * 9 + t]);
}

TEST(WarmStart, Mog2SliceStatistics) {
  Rng rng = make_rng(23, {});
  CnnModel<double> src(3);
  src.init(rng);
  using R = ChannelRole;
  const std::vector<R> roles{R::kImage1, R::kImage1, R::kImage1, R::kMog2};
  std::vector<double> draws;
  while (draws.size() < 10000) {
    CnnModel<double> dst(4);
    warm_start_input_layer(dst, src, std::span<const R>(roles), rng);
    const auto& dw = dst.layout().find("conv1.weight");
    for (int o = 0; o < 16; ++o)
      for (int t = 0; t < 9; ++t) draws.push_back(dst.params()[dw.offset + (o * 4 + 3) * 9 + t]);
  }
  const double n = static_cast<double>(draws.size());
  double mean = 0, sq = 0;
  for (double v : draws) mean += v;
  mean /= n;
  for (double v : draws) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / (n - 1));
  EXPECT_LE(std::abs(mean), 3 * 0.01 / std::sqrt(n));
  // Standard error of the sample standard deviation is sigma / sqrt(2(n-1)).
  EXPECT_LE(std::abs(sd - 0.01), 3 * 0.01 / std::sqrt(2 * (n - 1)));
}

TEST(WarmStart, RejectsMismatches) {
  Rng rng = make_rng(24, {});
  CnnModel<double> src(3), src4(4), dst(4);
  using R = ChannelRole;
  const std::vector<R> three{R::kImage1, R::kImage1, R::kImage1};
  const std::vector<R> four{R::kImage1, R::kImage1, R::kImage1, R::kMog2};
  const std::vector<R> split{R::kImage1, R::kImage1, R::kMog2, R::kImage1};
  EXPECT_THROW(warm_start_input_layer(dst, src, std::span<const R>(three), rng), ContractError);
  EXPECT_THROW(warm_start_input_layer(dst, src4, std::span<const R>(four), rng), ContractError);
  EXPECT_THROW(warm_start_input_layer(dst, src, std::span<const R>(split), rng), ContractError);
}

TEST(WarmStart, TrunkCopy) {
  Rng rng = make_rng(25, {});
  CnnModel<float> src(3);
  src.init(rng);
  LstmModel<float> dst;
  dst.init(rng);
  warm_start_trunk(dst, src);
  const auto& a = src.layout().find("conv2.weight");
  const auto& b = dst.layout().find("trunk.conv2.weight");
  for (std::size_t i = 0; i < a.size; ++i) EXPECT_EQ(src.params()[a.offset + i], dst.params()[b.offset + i]);
}

TEST(Cadence, QuarterEpochBoundaries) {
  EXPECT_EQ(checkpoint_batches(4, 4), (std::vector<long long>{1, 2, 3, 4}));
  EXPECT_EQ(checkpoint_batches(10, 4), (std::vector<long long>{3, 5, 8, 10}));
  EXPECT_EQ(checkpoint_batches(63, 4), (std::vector<long long>{16, 32, 48, 63}));
  EXPECT_EQ(checkpoint_batches(2, 4), (std::vector<long long>{1, 2}));
  EXPECT_EQ(checkpoint_batches(1, 4), (std::vector<long long>{1}));
}

TEST(EarlyStop, ScriptedSequence) {
  EarlyStopping es(3);
  const std::vector<double> seq{0.60, 0.70, 0.69, 0.68, 0.66, 0.9};
  int stopped_at = 0;
  for (double v : seq) {
    if (es.observe(v)) {
      stopped_at = es.count();
      break;
    }
  }
  EXPECT_EQ(stopped_at, 5);
  EXPECT_EQ(es.best_index(), 2);
  EXPECT_DOUBLE_EQ(es.best(), 0.70);
}

TEST(EarlyStop, TiesDoNotCountAsImprovement) {
  EarlyStopping es(2);
  EXPECT_FALSE(es.observe(0.5));
  EXPECT_FALSE(es.observe(0.5));
  EXPECT_TRUE(es.observe(0.5));
  EXPECT_EQ(es.best_index(), 1);
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

}  // namespace
}  // namespace burstnet::learner
