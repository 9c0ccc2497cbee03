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

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "burstnet/assembler.hpp"
#include "burstnet/augmentation.hpp"
#include "burstnet/dataset.hpp"
#include "burstnet/image_io.hpp"
#include "burstnet/learner/models.hpp"
#include "burstnet/learner/optim.hpp"
#include "burstnet/learner/trainer.hpp"
#include "burstnet/metrics.hpp"
#include "burstnet/pipeline/config.hpp"
#include "burstnet/synthetic.hpp"

namespace burstnet::pipeline {

namespace fs = std::filesystem;
using Reporter = std::function<void(const std::string&)>;

inline void quiet(const std::string&) {}

/// Runs fn(i) for i in [0, n) on `jobs` threads; rethrows the first failure.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&]() {
    try {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  const auto extra = static_cast<std::size_t>(std::max(1, jobs) - 1);
  for (std::size_t t = 0; t < std::min(extra, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  Rng rng = make_rng(seed, {a, b});
  return rng();
}

/// Loads frames and cached features on first use and keeps them.
class BurstStore {
 public:
  BurstStore(fs::path manifest_dir, int image_size, fs::path cache_dir)
      : dir_(std::move(manifest_dir)), size_(image_size), cache_(std::move(cache_dir)) {}

  /// Frame k of a burst, RGB at the working size.
  const Frame& frame(const BurstRecord& r, int k) {
    auto& slot = frames_[r.burst_id];
    if (!slot[k]) {
      const fs::path p = dir_ / r.frame_paths[k];
      log_.push_back(p.generic_string());
      Frame f = load_image(p);
      if (f.channels() == 1) {
        std::vector<float> rgb;
        rgb.reserve(f.size() * 3);
        for (float v : f.data()) rgb.insert(rgb.end(), 3, v);
        f = Frame(f.height(), f.width(), 3, std::move(rgb));
      }
      if (f.height() != size_ || f.width() != size_) f = resize_bilinear(f, size_, size_);
      slot[k] = std::move(f);
    }
    return *slot[k];
  }

  Burst burst(const BurstRecord& r) {
    Burst b;
    b.burst_id = r.burst_id;
    b.site_id = r.site_id;
    b.label = r.binary_label.value_or(-1);
    for (int k = 0; k < 3; ++k) b.frames[k] = frame(r, k);
    return b;
  }

  const BurstFeatures& features(const BurstRecord& r) {
    auto it = features_.find(r.burst_id);
    if (it == features_.end()) {
      const fs::path d = cache_ / r.burst_id;
      if (!features_exist(d))
        throw ContractError("features for burst " + r.burst_id + " are missing from " + cache_.string() +
                            "; run the features command first");
      BurstFeatures f = read_features(d);
      if (f.mog2.height() != size_ || f.mog2.width() != size_)
        throw StaleCacheError("cached features for " + r.burst_id + " do not match data.image_size");
      it = features_.emplace(r.burst_id, std::move(f)).first;
    }
    return it->second;
  }

  const std::vector<std::string>& access_log() const { return log_; }

 private:
  fs::path dir_;
  int size_;
  fs::path cache_;
  std::map<std::string, std::array<std::optional<Frame>, 3>> frames_;
  std::map<std::string, BurstFeatures> features_;
  std::vector<std::string> log_;
};

// ---------------------------------------------------------------- synth --

inline std::string synth_hash(const Config& c) { return c.hash({"synth."}); }

inline fs::path cmd_synth(const Config& c, int jobs, const Reporter& report = quiet) {
  const fs::path dir = c.manifest_path().parent_path();
  const auto params = c.synthetic();
  report("generating " + std::to_string(2 * params.bursts_per_class) + " synthetic bursts in " + dir.string());
  const auto manifest = generate_synthetic(params, dir, jobs);
  write_text_file(dir / "synth.json", Json{{"hash", synth_hash(c)}}.dump(2) + "\n");
  c.write(dir);
  return manifest;
}

/// Generates the default synthetic data set when no manifest exists yet;
/// refuses to reuse data generated under different settings.
inline void ensure_data(const Config& c, int jobs, const Reporter& report) {
  const fs::path manifest = c.manifest_path();
  const fs::path stamp = manifest.parent_path() / "synth.json";
  if (fs::exists(manifest)) {
    if (fs::exists(stamp)) {
      std::ifstream in(stamp);
      const auto have = Json::parse(in).at("hash").get<std::string>();
      if (have != synth_hash(c))
        throw StaleCacheError("synthetic data in " + manifest.parent_path().string() +
                              " was generated with different synth.* settings; remove it or change --out");
    }
    return;
  }
  if (!c.get_string("data.manifest").empty()) throw DataError("manifest " + manifest.string() + " does not exist");
  cmd_synth(c, jobs, report);
}

inline std::vector<BurstRecord> load_labelled(const Config& c) {
  const auto m = load_manifest(c.manifest_path());
  return binarize(m.records, load_species_map(c.species_map_path()));
}

// ------------------------------------------------------------- features --

inline std::string features_hash(const Config& c) { return c.hash({"data.image_size", "flow.", "mog2.", "synth."}); }

struct FeatureStats {
  std::size_t computed = 0, reused = 0;
};

/// Computes the four feature tensors of every burst in the manifest into
/// the cache. Bursts whose files already exist are skipped; a cache built
/// under different settings is an error.
inline FeatureStats cmd_features(const Config& c, int jobs, const Reporter& report = quiet) {
  const auto flow = c.flow();
  const auto mog2 = c.mog2();
  const double cap = c.get_double("flow.magnitude_cap");
  const fs::path cache = c.cache_dir();
  const fs::path stamp = cache / "features.json";
  const std::string hash = features_hash(c);
  if (fs::exists(stamp)) {
    std::ifstream in(stamp);
    const auto have = Json::parse(in).at("hash").get<std::string>();
    if (have != hash)
      throw StaleCacheError("feature cache " + cache.string() + " was built with different settings (" + have +
                            " vs " + hash + "); remove it or change --out");
  } else {
    fs::create_directories(cache);
    write_text_file(stamp, Json{{"hash", hash}}.dump(2) + "\n");
  }
  const auto manifest = load_manifest(c.manifest_path());
  std::vector<const BurstRecord*> unique;
  std::set<std::string> seen;
  for (const auto& r : manifest.records)
    if (seen.insert(r.burst_id).second) unique.push_back(&r);

  std::vector<char> done(unique.size(), 0);
  for (std::size_t i = 0; i < unique.size(); ++i) done[i] = features_exist(cache / unique[i]->burst_id);
  FeatureStats stats;
  for (char d : done) (d ? stats.reused : stats.computed)++;
  report("features: " + std::to_string(stats.computed) + " to compute, " + std::to_string(stats.reused) + " cached");
  const int size = c.image_size();
  parallel_for(unique.size(), jobs, [&](std::size_t i) {
    if (done[i]) return;
    BurstStore local(manifest.directory, size, cache);
    const Burst b = local.burst(*unique[i]);
    write_features(cache / unique[i]->burst_id, compute_features(b, flow, mog2, cap));
  });
  c.write(cache);
  return stats;
}

// ---------------------------------------------------------------- split --

inline std::vector<BurstRecord> make_split(const Config& c, SplitMode mode, std::uint64_t seed) {
  auto records = split(load_labelled(c), c.split(mode, seed));
  return balance(records, derive_seed(seed, 0xBA1A));
}

/// Writes the split and balanced manifest; rows repeat for oversampled bursts.
inline fs::path write_split(const fs::path& path, const std::vector<BurstRecord>& records,
                            const fs::path& source_dir) {
  Manifest m;
  m.directory = source_dir;
  m.records = records;
  write_manifest(path, m);
  return path;
}

inline fs::path cmd_split(const Config& c, const Reporter& report = quiet) {
  const auto records = make_split(c, c.split_mode(), c.get_seed("seed"));
  const fs::path path = c.out_dir() / "split.csv";
  write_split(path, records, c.manifest_path().parent_path());
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest})
    report(std::string(split_name(s)) + ": " + std::to_string(records_in(records, s).size()) + " bursts");
  c.write(c.out_dir());
  return path;
}

/// Records of a split manifest, with labels.
inline Manifest load_split(const Config& c, const fs::path& path) {
  if (!fs::exists(path)) throw DataError("split manifest " + path.string() + " not found; run the split command first");
  Manifest m = load_manifest(path);
  m.records = binarize(m.records, load_species_map(c.species_map_path()));
  for (const auto& r : m.records)
    if (!r.split) throw DataError("split manifest " + path.string() + " has a row without a split: " + r.burst_id);
  return m;
}

// ------------------------------------------------------------- training --

using AnyModel = std::variant<learner::CnnModel<float>, learner::LstmModel<float>>;

inline AnyModel make_model(ModelVariant v) {
  if (v == ModelVariant::kLstm) return learner::LstmModel<float>();
  return learner::CnnModel<float>(variant_channels(v));
}

inline std::size_t variant_index(ModelVariant v) { return static_cast<std::size_t>(v); }

/// Model inputs for a burst without augmentation, as the evaluator sees them.
class InputBuilder {
 public:
  InputBuilder(BurstStore& store, ModelVariant v) : store_(store), v_(v) {}

  std::vector<ChannelStack> stacks(const BurstRecord& r, AssembleMode mode) {
    if (v_ == ModelVariant::kBaseline) {
      std::vector<ChannelStack> out;
      const int frames = mode == AssembleMode::kTrain ? 3 : 1;
      const ChannelRole roles[3] = {ChannelRole::kImage1, ChannelRole::kImage2, ChannelRole::kImage3};
      for (int k = 0; k < frames; ++k) out.push_back(ChannelStack::concat({{store_.frame(r, k), roles[k]}}));
      return out;
    }
    const Burst b = store_.burst(r);
    return build_stack(b, needs_features(v_) ? &store_.features(r) : nullptr, v_, mode);
  }

 private:
  BurstStore& store_;
  ModelVariant v_;
};

struct TrainOutcome {
  AnyModel model;
  learner::TrainResult<float> result;
};

inline double predict_one(const AnyModel& model, const std::vector<ChannelStack>& stacks) {
  if (const auto* cnn = std::get_if<learner::CnnModel<float>>(&model))
    return static_cast<double>(cnn->predict(learner::to_planes<float>(stacks.at(0))));
  const auto& lstm = std::get<learner::LstmModel<float>>(model);
  return static_cast<double>(lstm.predict({learner::to_planes<float>(stacks.at(0)),
                                           learner::to_planes<float>(stacks.at(1)),
                                           learner::to_planes<float>(stacks.at(2))}));
}

/// Trains one variant on the train split, validating on the val split.
/// Non-baseline variants start from `warm` when given.
inline TrainOutcome train_variant(const Config& c, BurstStore& store, const std::vector<BurstRecord>& records,
                                  ModelVariant v, std::uint64_t seed, const learner::CnnModel<float>* warm,
                                  const Reporter& report = quiet) {
  const auto vi = variant_index(v);
  const auto train_cfg = c.train(derive_seed(seed, 0x7A11, vi));
  const auto aug_cfg = c.augment(derive_seed(seed, 0xA06, vi));
  const auto train_recs = records_in(records, Split::kTrain);
  const auto val_recs = records_in(records, Split::kVal);
  if (train_recs.empty()) throw ConfigError("training split is empty");
  if (val_recs.empty()) throw ConfigError("validation split is empty");

  AnyModel model = make_model(v);
  Rng init_rng = make_rng(seed, {0x1417, vi});
  std::visit([&](auto& m) { m.init(init_rng); }, model);
  if (warm && v != ModelVariant::kBaseline) {
    if (auto* cnn = std::get_if<learner::CnnModel<float>>(&model)) {
      const auto roles = variant_roles(v);
      learner::warm_start_input_layer(*cnn, *warm, std::span<const ChannelRole>(roles), init_rng);
    } else {
      learner::warm_start_trunk(std::get<learner::LstmModel<float>>(model), *warm);
    }
  }

  InputBuilder builder(store, v);
  std::vector<std::vector<ChannelStack>> val_inputs;
  std::vector<int> val_labels;
  for (const auto* r : val_recs) {
    val_inputs.push_back(builder.stacks(*r, AssembleMode::kEval));
    val_labels.push_back(*r->binary_label);
  }
  // Baseline trains on every frame of a burst as its own sample.
  const std::size_t per_burst = v == ModelVariant::kBaseline ? 3 : 1;
  const std::size_t n = train_recs.size() * per_burst;
  auto augment = [&](const std::vector<ChannelStack>& stacks, int epoch, std::size_t i) {
    const auto draw = draw_augmentation(aug_cfg, stacks[0].height(), stacks[0].width(),
                                        static_cast<std::uint64_t>(epoch), i);
    std::vector<ChannelStack> out;
    for (const auto& s : stacks) out.push_back(apply_augmentation(s, draw));
    return out;
  };

  TrainOutcome out{std::move(model), {}};
  report("training " + std::string(variant_name(v)) + " on " + std::to_string(n) + " samples");
  if (auto* cnn = std::get_if<learner::CnnModel<float>>(&out.model)) {
    auto sample = [&](std::size_t i, int epoch) {
      const auto* r = train_recs[i / per_burst];
      auto stacks = builder.stacks(*r, AssembleMode::kTrain);
      const auto aug = augment({stacks[i % per_burst]}, epoch, i);
      return std::make_pair(learner::to_planes<float>(aug[0]), *r->binary_label);
    };
    auto cnn_score = [&](const learner::CnnModel<float>& m) {
      std::vector<double> s;
      s.reserve(val_inputs.size());
      for (const auto& in : val_inputs) s.push_back(static_cast<double>(m.predict(learner::to_planes<float>(in[0]))));
      return roc_auc(s, val_labels);
    };
    out.result = learner::train(*cnn, n, sample, cnn_score, train_cfg);
  } else {
    auto& lstm = std::get<learner::LstmModel<float>>(out.model);
    auto sample = [&](std::size_t i, int epoch) {
      const auto* r = train_recs[i];
      const auto aug = augment(builder.stacks(*r, AssembleMode::kTrain), epoch, i);
      learner::LstmModel<float>::Input x{learner::to_planes<float>(aug[0]), learner::to_planes<float>(aug[1]),
                                         learner::to_planes<float>(aug[2])};
      return std::make_pair(std::move(x), *r->binary_label);
    };
    auto lstm_score = [&](const learner::LstmModel<float>& m) {
      std::vector<double> s;
      s.reserve(val_inputs.size());
      for (const auto& in : val_inputs)
        s.push_back(static_cast<double>(m.predict({learner::to_planes<float>(in[0]), learner::to_planes<float>(in[1]),
                                                   learner::to_planes<float>(in[2])})));
      return roc_auc(s, val_labels);
    };
    out.result = learner::train(lstm, n, sample, lstm_score, train_cfg);
  }
  const auto& best = out.result.best;
  report(std::string(variant_name(v)) + ": best val AUC " + std::to_string(best.val_auc) + " at checkpoint " +
         std::to_string(best.index) + " (step " + std::to_string(best.step) + ")" +
         (out.result.early_stopped ? ", stopped early" : ""));
  return out;
}

/// Deterministic, unaugmented predictions for every record of a split.
inline std::vector<Prediction> predict(const AnyModel& model, BurstStore& store,
                                       const std::vector<BurstRecord>& records, Split split, ModelVariant v) {
  InputBuilder builder(store, v);
  std::vector<Prediction> out;
  for (const auto* r : records_in(records, split))
    out.push_back({r->burst_id, predict_one(model, builder.stacks(*r, AssembleMode::kEval)), *r->binary_label});
  return out;
}

inline std::vector<std::string> ids_in(const std::vector<BurstRecord>& records, Split split) {
  std::vector<std::string> ids;
  for (const auto* r : records_in(records, split)) ids.push_back(r->burst_id);
  return ids;
}

inline learner::CheckpointMeta make_meta(const Config& c, ModelVariant v, const TrainOutcome& t) {
  learner::CheckpointMeta m;
  m.variant = std::string(variant_name(v));
  m.step = t.result.best.step;
  m.index = t.result.best.index;
  m.epoch = t.result.best.epoch;
  m.val_auc = t.result.best.val_auc;
  m.config_hash = c.model_hash();
  m.in_channels = variant_channels(v);
  return m;
}

inline void save_outcome(const fs::path& dir, const Config& c, ModelVariant v, const TrainOutcome& t) {
  const auto meta = make_meta(c, v, t);
  std::visit([&](const auto& m) { learner::save_checkpoint(dir / "checkpoint", m, meta); }, t.model);
  Json h = Json::array();
  for (const auto& rec : t.result.history)
    h.push_back({{"step", rec.step}, {"epoch", rec.epoch}, {"val_auc", rec.val_auc}, {"train_loss", rec.train_loss}});
  write_text_file(dir / "history.json", h.dump(2) + "\n");
}

inline AnyModel load_model(const fs::path& stem, ModelVariant v, const Config& c) {
  const auto meta = learner::load_checkpoint_meta(stem);
  if (meta.variant != variant_name(v))
    throw ContractError("checkpoint " + stem.string() + " holds " + meta.variant + ", not " +
                        std::string(variant_name(v)));
  if (meta.config_hash != c.model_hash())
    throw StaleCacheError("checkpoint " + stem.string() + " was trained with a different configuration");
  AnyModel model = make_model(v);
  std::visit([&](auto& m) { learner::load_checkpoint(stem, m); }, model);
  return model;
}

inline fs::path model_dir(const Config& c, ModelVariant v) { return c.out_dir() / "models" / variant_name(v); }

inline fs::path cmd_train(const Config& c, ModelVariant v, const Reporter& report = quiet) {
  const Manifest m = load_split(c, c.out_dir() / "split.csv");
  BurstStore store(m.directory, c.image_size(), c.cache_dir());
  std::optional<AnyModel> warm;
  if (v != ModelVariant::kBaseline && c.get_bool("train.warm_start")) {
    const fs::path stem = model_dir(c, ModelVariant::kBaseline) / "checkpoint";
    auto bundle = stem;
    bundle += ".btsb";
    if (!fs::exists(bundle))
      throw DataError("warm start needs the Baseline checkpoint " + bundle.string() +
                      "; train Baseline first or set train.warm_start=false");
    warm = load_model(stem, ModelVariant::kBaseline, c);
  }
  const auto t = train_variant(c, store, m.records, v, c.get_seed("seed"),
                               warm ? &std::get<learner::CnnModel<float>>(*warm) : nullptr, report);
  const fs::path dir = model_dir(c, v);
  save_outcome(dir, c, v, t);
  c.write(dir);
  return dir / "checkpoint";
}

inline EvalReport cmd_eval(const Config& c, ModelVariant v, std::optional<fs::path> checkpoint = std::nullopt,
                           const Reporter& report = quiet) {
  const Manifest m = load_split(c, c.out_dir() / "split.csv");
  BurstStore store(m.directory, c.image_size(), c.cache_dir());
  const fs::path stem = checkpoint.value_or(model_dir(c, v) / "checkpoint");
  const AnyModel model = load_model(stem, v, c);
  const auto r = evaluate(predict(model, store, m.records, Split::kTest, v), ids_in(m.records, Split::kTest),
                          std::string(variant_name(v)), "test");
  const fs::path dir = model_dir(c, v);
  write_report(dir, r);
  c.write(dir);
  report(std::string(variant_name(v)) + ": test ROC AUC " + std::to_string(r.roc_auc));
  return r;
}

// ----------------------------------------------------------- experiment --

struct ExperimentResult {
  // scenario -> variant -> per-seed test AUC, in configured seed order
  std::map<std::string, std::map<std::string, std::vector<double>>> auc;
  ComparisonTable table;
};

inline ExperimentResult cmd_experiment(const Config& c, int jobs, const Reporter& report = quiet) {
  ensure_data(c, jobs, report);
  cmd_features(c, jobs, report);
  std::vector<ModelVariant> variants{ModelVariant::kBaseline};
  for (auto v : c.variants())
    if (v != ModelVariant::kBaseline) variants.push_back(v);
  const auto seeds = c.seeds();
  const fs::path root = c.out_dir() / "experiment";
  BurstStore store(c.manifest_path().parent_path(), c.image_size(), c.cache_dir());
  ExperimentResult result;
  for (auto mode : c.scenarios()) {
    const std::string scenario(split_mode_name(mode));
    for (auto seed : seeds) {
      const fs::path dir = root / scenario / ("seed_" + std::to_string(seed));
      report("scenario " + scenario + ", seed " + std::to_string(seed));
      const auto records = make_split(c, mode, seed);
      write_split(dir / "split.csv", records, c.manifest_path().parent_path());
      std::optional<learner::CnnModel<float>> baseline;
      for (auto v : variants) {
        const learner::CnnModel<float>* warm = c.get_bool("train.warm_start") && baseline ? &*baseline : nullptr;
        const auto t = train_variant(c, store, records, v, seed, warm, report);
        const fs::path vdir = dir / variant_name(v);
        save_outcome(vdir, c, v, t);
        const auto r = evaluate(predict(t.model, store, records, Split::kTest, v), ids_in(records, Split::kTest),
                                std::string(variant_name(v)), "test");
        write_report(vdir, r);
        report(std::string(variant_name(v)) + ": test ROC AUC " + std::to_string(r.roc_auc));
        result.auc[scenario][std::string(variant_name(v))].push_back(r.roc_auc);
        result.table.add(std::string(variant_name(v)), scenario + "/" + std::to_string(seed), r.roc_auc);
        if (v == ModelVariant::kBaseline) baseline = std::get<learner::CnnModel<float>>(t.model);
      }
    }
  }
  Json summary;
  for (auto mode : c.scenarios()) {
    const std::string scenario(split_mode_name(mode));
    for (auto v : variants) {
      const std::string variant(variant_name(v));
      const auto& values = result.auc.at(scenario).at(variant);
      double mean = 0;
      for (double a : values) mean += a;
      mean /= static_cast<double>(values.size());
      result.table.add(variant, scenario + "/mean", mean);
      summary[scenario][variant] = {{"seeds", c.at("seeds")}, {"test_auc", values}, {"mean", mean}};
    }
  }
  write_text_file(root / "comparison.json", summary.dump(2) + "\n");
  write_text_file(root / "comparison.txt", result.table.to_text());
  c.write(root);
  report("comparison:\n" + result.table.to_text());
  return result;
}

}  // namespace burstnet::pipeline
