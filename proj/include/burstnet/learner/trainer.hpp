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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/learner/optim.hpp"
#include "burstnet/metrics.hpp"
#include "burstnet/rng.hpp"
#include "burstnet/tensor_io.hpp"
#include "json.hpp"

namespace burstnet::learner {

struct TrainConfig {
  AdamParams adam;
  int epochs = 10;
  int batch_size = 32;
  int checkpoints_per_epoch = 4;
  int patience = 3;
  std::uint64_t seed = 0;

  void validate() const {
    adam.validate();
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (checkpoints_per_epoch < 1) throw ConfigError("checkpoints_per_epoch must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
  }
};

template <class T>
struct Checkpoint {
  long long step = 0;  // optimizer steps taken
  int index = 0;       // 1-based checkpoint number
  int epoch = 0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<T> params;
};

struct CheckpointRecord {
  long long step = 0;
  int epoch = 0;
  double val_auc = 0.0;
  double train_loss = 0.0;  // mean over batches since the previous checkpoint
};

template <class T>
struct TrainResult {
  Checkpoint<T> best;
  std::vector<CheckpointRecord> history;
  bool early_stopped = false;
  long long steps = 0;
};

/// Mini-batch Adam with validation checkpoints at fixed fractions of each
/// epoch and early stopping on the validation score. `sample(i, epoch)`
/// returns the (input, label) of training sample i; `score(model)` returns
/// the validation ROC AUC. The model ends holding the best parameters.
template <class Model, class SampleFn, class ScoreFn>
TrainResult<typename Model::Scalar> train(Model& model, std::size_t n_train, SampleFn&& sample, ScoreFn&& score,
                                          const TrainConfig& cfg) {
  using T = typename Model::Scalar;
  using Input = typename Model::Input;
  cfg.validate();
  if (n_train == 0) throw ConfigError("training split is empty");
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const long long batches = static_cast<long long>((n_train + bs - 1) / bs);
  const auto marks = checkpoint_batches(batches, cfg.checkpoints_per_epoch);

  Adam<T> opt(model.params().size(), cfg.adam);
  EarlyStopping stopper(cfg.patience);
  TrainResult<T> result;
  std::vector<std::size_t> order(n_train);
  std::vector<Input> xs;
  std::vector<T> ys, grad;
  double loss_sum = 0.0;
  long long loss_batches = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(cfg.seed, {0x7EA1u, static_cast<std::uint64_t>(epoch)});
    shuffle(order.begin(), order.end(), rng);
    std::size_t next_mark = 0;
    for (long long b = 1; b <= batches; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b - 1) * bs, hi = std::min(n_train, lo + bs);
      xs.clear();
      ys.clear();
      for (std::size_t i = lo; i < hi; ++i) {
        auto [x, y] = sample(order[i], epoch);
        xs.push_back(std::move(x));
        ys.push_back(static_cast<T>(y));
      }
      const T loss = model.loss_and_grad(std::span<const Input>(xs), std::span<const T>(ys), grad);
      if (!std::isfinite(static_cast<double>(loss))) throw NumericError("training loss is not finite");
      opt.step(std::span<T>(model.params()), std::span<const T>(grad));
      ++result.steps;
      loss_sum += static_cast<double>(loss);
      ++loss_batches;

      if (next_mark < marks.size() && b == marks[next_mark]) {
        ++next_mark;
        const double auc = score(static_cast<const Model&>(model));
        if (!std::isfinite(auc)) throw NumericError("validation score is not finite");
        result.history.push_back({result.steps, epoch, auc, loss_sum / static_cast<double>(loss_batches)});
        loss_sum = 0.0;
        loss_batches = 0;
        const bool stop = stopper.observe(auc);
        if (stopper.best_index() == stopper.count())
          result.best = {result.steps, stopper.count(), epoch, auc, model.params()};
        if (stop) {
          result.early_stopped = true;
          model.params() = result.best.params;
          return result;
        }
      }
    }
  }
  model.params() = result.best.params;
  return result;
}

struct CheckpointMeta {
  std::string variant;
  long long step = 0;
  int index = 0;
  int epoch = 0;
  double val_auc = 0.0;
  std::string config_hash;
  int in_channels = 0;
};

inline nlohmann::ordered_json meta_to_json(const CheckpointMeta& m) {
  nlohmann::ordered_json j;
  j["variant"] = m.variant;
  j["step"] = m.step;
  j["checkpoint"] = m.index;
  j["epoch"] = m.epoch;
  j["val_auc"] = m.val_auc;
  j["config_hash"] = m.config_hash;
  j["in_channels"] = m.in_channels;
  return j;
}

inline CheckpointMeta meta_from_json(const nlohmann::ordered_json& j) {
  CheckpointMeta m;
  m.variant = j.at("variant").get<std::string>();
  m.step = j.at("step").get<long long>();
  m.index = j.at("checkpoint").get<int>();
  m.epoch = j.at("epoch").get<int>();
  m.val_auc = j.at("val_auc").get<double>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.in_channels = j.at("in_channels").get<int>();
  return m;
}

/// Writes `<stem>.btsb` with one tensor per named parameter and
/// `<stem>.json` with the metadata.
template <class Model>
void save_checkpoint(const std::filesystem::path& stem, const Model& model, const CheckpointMeta& meta) {
  NamedTensors entries;
  for (const auto& spec : model.layout().specs()) {
    Tensor t;
    for (int d : spec.shape) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.data.assign(model.params().begin() + static_cast<std::ptrdiff_t>(spec.offset),
                  model.params().begin() + static_cast<std::ptrdiff_t>(spec.offset + spec.size));
    entries.emplace_back(spec.name, std::move(t));
  }
  auto bundle = stem;
  bundle += ".btsb";
  auto sidecar = stem;
  sidecar += ".json";
  write_bundle(bundle, entries);
  write_text_file(sidecar, meta_to_json(meta).dump(2) + "\n");
}

inline CheckpointMeta load_checkpoint_meta(const std::filesystem::path& stem) {
  auto sidecar = stem;
  sidecar += ".json";
  std::ifstream in(sidecar);
  if (!in) throw DataError("cannot open checkpoint metadata " + sidecar.string());
  try {
    return meta_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(sidecar.string() + ": " + e.what(), 0);
  }
}

/// Fills `model` from `<stem>.btsb`; every parameter must be present with
/// the model's shape.
template <class Model>
void load_checkpoint(const std::filesystem::path& stem, Model& model) {
  auto bundle = stem;
  bundle += ".btsb";
  const auto entries = read_bundle(bundle);
  for (const auto& spec : model.layout().specs()) {
    const auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == spec.name; });
    if (it == entries.end()) throw ContractError("checkpoint lacks parameter " + spec.name);
    std::vector<std::uint32_t> dims;
    for (int d : spec.shape) dims.push_back(static_cast<std::uint32_t>(d));
    if (it->second.dims != dims) throw DimensionError("checkpoint parameter " + spec.name + " has the wrong shape");
    for (std::size_t i = 0; i < spec.size; ++i) {
      const float v = it->second.data[i];
      if (!std::isfinite(v)) throw NumericError("checkpoint parameter " + spec.name + " is not finite");
      model.params()[spec.offset + i] = static_cast<typename Model::Scalar>(v);
    }
  }
}

}  // namespace burstnet::learner
