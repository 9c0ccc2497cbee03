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

#include <filesystem>
#include <vector>

#include "burstnet/learner/models.hpp"
#include "burstnet/learner/trainer.hpp"

namespace burstnet::learner {
namespace {

struct ToyData {
  std::vector<Planes<float>> xs;
  std::vector<int> ys;

  explicit ToyData(int n, std::uint64_t seed = 3) {
    Rng rng = make_rng(seed, {});
    for (int i = 0; i < n; ++i) {
      const int y = i % 2;
      Planes<float> p(3, 8, 8);
      for (float& v : p.v) v = static_cast<float>(uniform01(rng) * 0.5 + 0.5 * y * (&v - p.v.data() < 64));
      xs.push_back(std::move(p));
      ys.push_back(y);
    }
  }
  auto sampler() const {
    return [this](std::size_t i, int) { return std::make_pair(xs[i], ys[i]); };
  }
};

TEST(Train, ScriptedEarlyStopping) {
  ToyData data(128);
  CnnModel<float> m(3);
  Rng rng = make_rng(1, {});
  m.init(rng);
  const std::vector<double> script{0.60, 0.70, 0.69, 0.68, 0.66, 0.99, 0.99};
  std::size_t calls = 0;
  std::vector<float> at_best;
  auto score = [&](const CnnModel<float>& model) {
    if (calls == 1) at_best = model.params();
    return script.at(calls++);
  };
  TrainConfig cfg;
  const auto r = train(m, data.xs.size(), data.sampler(), score, cfg);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(calls, 5u);
  EXPECT_EQ(r.best.index, 2);
  EXPECT_DOUBLE_EQ(r.best.val_auc, 0.70);
  EXPECT_EQ(r.best.step, 2);
  EXPECT_EQ(m.params(), at_best);
}

TEST(Train, QuarterEpochCadence) {
  ToyData data(128);
  CnnModel<float> m(3);
  Rng rng = make_rng(2, {});
  m.init(rng);
  int calls = 0;
  auto score = [&](const CnnModel<float>&) { return 0.5 + 0.01 * ++calls; };
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto r = train(m, data.xs.size(), data.sampler(), score, cfg);
  ASSERT_EQ(r.history.size(), 8u);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(r.history[k].step, k + 1);
  EXPECT_FALSE(r.early_stopped);
  EXPECT_EQ(r.best.index, 8);

  // 100 samples: B = 4, last batch partial but kept.
  ToyData odd(100);
  calls = 0;
  cfg.epochs = 1;
  cfg.batch_size = 16;  // B = 7: marks 2, 4, 6, 7
  const auto r2 = train(m, odd.xs.size(), odd.sampler(), score, cfg);
  ASSERT_EQ(r2.history.size(), 4u);
  EXPECT_EQ(r2.history[0].step, 2);
  EXPECT_EQ(r2.history[1].step, 4);
  EXPECT_EQ(r2.history[2].step, 6);
  EXPECT_EQ(r2.history[3].step, 7);
  EXPECT_EQ(r2.steps, 7);
}

TEST(Train, BitIdenticalAcrossRuns) {
  ToyData data(96);
  auto run = [&]() {
    CnnModel<float> m(3);
    Rng rng = make_rng(4, {});
    m.init(rng);
    auto score = [&](const CnnModel<float>& model) {
      std::vector<double> s;
      for (const auto& x : data.xs) s.push_back(model.predict(x));
      return roc_auc(s, data.ys);
    };
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 9;
    cfg.adam.learning_rate = 1e-3;
    train(m, data.xs.size(), data.sampler(), score, cfg);
    return m.params();
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a, b);
}

TEST(Train, LearnsSeparableToy) {
  ToyData data(128);
  CnnModel<float> m(3);
  Rng rng = make_rng(5, {});
  m.init(rng);
  auto score = [&](const CnnModel<float>& model) {
    std::vector<double> s;
    for (const auto& x : data.xs) s.push_back(model.predict(x));
    return roc_auc(s, data.ys);
  };
  TrainConfig cfg;
  cfg.adam.learning_rate = 1e-3;
  cfg.epochs = 30;
  cfg.patience = 40;
  const auto r = train(m, data.xs.size(), data.sampler(), score, cfg);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_GT(r.best.val_auc, 0.95);
}

TEST(Train, EmptySplitIsConfigError) {
  CnnModel<float> m(3);
  auto sample = [](std::size_t, int) { return std::make_pair(Planes<float>(3, 8, 8), 0); };
  auto score = [](const CnnModel<float>&) { return 0.5; };
  EXPECT_THROW(train(m, 0, sample, score, TrainConfig{}), ConfigError);
  TrainConfig bad;
  bad.patience = 0;
  EXPECT_THROW(train(m, 4, sample, score, bad), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "burstnet_ckpt_rt";
  std::filesystem::remove_all(dir);
  LstmModel<float> m;
  Rng rng = make_rng(6, {});
  m.init(rng);
  CheckpointMeta meta{"LSTM", 12, 3, 0, 0.75, "abc", 3};
  save_checkpoint(dir / "best", m, meta);
  LstmModel<float> back;
  load_checkpoint(dir / "best", back);
  EXPECT_EQ(back.params(), m.params());
  const auto mb = load_checkpoint_meta(dir / "best");
  EXPECT_EQ(mb.variant, "LSTM");
  EXPECT_EQ(mb.step, 12);
  EXPECT_EQ(mb.val_auc, 0.75);
  CnnModel<float> wrong(4);
  EXPECT_THROW(load_checkpoint(dir / "best", wrong), ContractError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace burstnet::learner
