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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "burstnet/assembler.hpp"
#include "burstnet/augmentation.hpp"
#include "burstnet/background_model.hpp"
#include "burstnet/dataset.hpp"
#include "burstnet/error.hpp"
#include "burstnet/learner/trainer.hpp"
#include "burstnet/optical_flow.hpp"
#include "burstnet/synthetic.hpp"
#include "json.hpp"

namespace burstnet::pipeline {

using Json = nlohmann::ordered_json;

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

/// Flat key/value configuration. Every key has a default; files and
/// `--set` overrides may only change existing keys and must keep their type.
class Config {
 public:
  static Json defaults() {
    Json j;
    j["out"] = "runs";
    j["seed"] = 1;
    j["seeds"] = Json::array({1, 2, 3});
    j["scenarios"] = Json::array({"uniform", "site_based"});
    Json variants = Json::array();
    for (auto v : kAllVariants) variants.push_back(std::string(variant_name(v)));
    j["variants"] = variants;

    j["data.manifest"] = "";
    j["data.species_map"] = "";
    j["data.image_size"] = 64;

    const SyntheticParams sp;
    j["synth.image_size"] = sp.image_size;
    j["synth.bursts_per_class"] = 1500;
    j["synth.animal_contrast"] = sp.animal_contrast;
    j["synth.speed_min"] = sp.speed_min;
    j["synth.speed_max"] = sp.speed_max;
    j["synth.jitter_amplitude"] = sp.jitter_amplitude;
    j["synth.jitter_probability"] = sp.jitter_probability;
    j["synth.night_probability"] = sp.night_probability;
    j["synth.noise_level"] = sp.noise_level;
    j["synth.num_sites"] = sp.num_sites;
    j["synth.max_decoys"] = sp.max_decoys;
    j["synth.seed"] = 7;

    j["split.mode"] = "uniform";
    j["split.train"] = 2.0 / 3.0;
    j["split.val"] = 1.0 / 6.0;
    j["split.test"] = 1.0 / 6.0;

    const FlowParams fp;
    j["flow.pyramid_scale"] = fp.pyramid_scale;
    j["flow.levels"] = fp.levels;
    j["flow.window"] = fp.window;
    j["flow.iterations"] = fp.iterations;
    j["flow.poly_n"] = fp.poly_n;
    j["flow.poly_sigma"] = fp.poly_sigma;
    j["flow.magnitude_cap"] = kDefaultMagnitudeCap;

    const Mog2Params mp;
    j["mog2.max_components"] = mp.max_components;
    j["mog2.learning_rate"] = mp.learning_rate;
    j["mog2.var_threshold"] = mp.var_threshold;
    j["mog2.background_ratio"] = mp.background_ratio;
    j["mog2.var_init"] = mp.var_init;
    j["mog2.var_min"] = mp.var_min;
    j["mog2.var_max"] = mp.var_max;
    j["mog2.complexity_prune"] = mp.complexity_prune;

    const AugmentConfig ac;
    j["augment.flip_prob"] = ac.flip_prob;
    j["augment.color_prob"] = ac.color_prob;
    j["augment.zoom_prob"] = ac.zoom_prob;
    j["augment.hue_delta_min"] = ac.hue_delta.first;
    j["augment.hue_delta_max"] = ac.hue_delta.second;
    j["augment.saturation_min"] = ac.saturation.first;
    j["augment.saturation_max"] = ac.saturation.second;
    j["augment.brightness_min"] = ac.brightness.first;
    j["augment.brightness_max"] = ac.brightness.second;
    j["augment.contrast_min"] = ac.contrast.first;
    j["augment.contrast_max"] = ac.contrast.second;
    j["augment.zoom_min"] = ac.zoom_fraction.first;
    j["augment.zoom_max"] = ac.zoom_fraction.second;

    const learner::TrainConfig tc;
    // The small classifier trains from scratch; at 1e-4 it barely moves
    // before early stopping fires. TrainConfig keeps 1e-4.
    j["train.learning_rate"] = 1e-3;
    j["train.beta1"] = tc.adam.beta1;
    j["train.beta2"] = tc.adam.beta2;
    j["train.epsilon"] = tc.adam.epsilon;
    j["train.epochs"] = tc.epochs;
    j["train.batch_size"] = 16;
    j["train.checkpoints_per_epoch"] = tc.checkpoints_per_epoch;
    j["train.patience"] = tc.patience;
    j["train.warm_start"] = true;
    return j;
  }

  Config() : values_(defaults()) {}

  /// Defaults overlaid with a JSON object file.
  static Config from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path.string() + " must be a JSON object");
    Config c;
    for (auto it = j.begin(); it != j.end(); ++it) c.set(it.key(), it.value());
    return c;
  }

  void set(const std::string& key, const Json& value) {
    if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    Json& slot = values_[key];
    if (slot.is_number_float() && value.is_number()) {
      slot = value.get<double>();
    } else if (slot.is_number_integer() && value.is_number_integer()) {
      slot = value;
    } else if (slot.is_boolean() && value.is_boolean()) {
      slot = value;
    } else if (slot.is_string() && value.is_string()) {
      slot = value;
    } else if (slot.is_array() && value.is_array()) {
      const bool want_int = key == "seeds";
      for (const auto& e : value)
        if (want_int ? !e.is_number_integer() : !e.is_string())
          throw ConfigError("config key '" + key + "' has the wrong element type");
      slot = value;
    } else {
      throw ConfigError("config key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                        std::string(value.type_name()));
    }
  }

  /// `key=value`; the value is read as JSON when it parses, otherwise as a
  /// string. Array keys also accept comma-separated lists.
  void set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    Json v = Json::parse(text, nullptr, false);
    if (v.is_discarded()) v = text;
    if (values_[key].is_array() && !v.is_array()) {
      Json arr = Json::array();
      std::stringstream ss(v.is_string() ? v.get<std::string>() : v.dump());
      std::string item;
      while (std::getline(ss, item, ',')) {
        Json e = Json::parse(item, nullptr, false);
        arr.push_back(e.is_discarded() ? Json(item) : e);
      }
      v = arr;
    }
    set(key, v);
  }

  const Json& json() const { return values_; }
  const Json& at(const std::string& key) const {
    if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    return values_.at(key);
  }
  int get_int(const std::string& key) const { return at(key).get<int>(); }
  double get_double(const std::string& key) const { return at(key).get<double>(); }
  bool get_bool(const std::string& key) const { return at(key).get<bool>(); }
  std::string get_string(const std::string& key) const { return at(key).get<std::string>(); }
  std::uint64_t get_seed(const std::string& key) const {
    const auto v = at(key).get<long long>();
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
  }

  std::filesystem::path out_dir() const { return get_string("out"); }
  std::filesystem::path manifest_path() const {
    const auto m = get_string("data.manifest");
    return m.empty() ? out_dir() / "data" / "manifest.csv" : std::filesystem::path(m);
  }
  std::filesystem::path species_map_path() const {
    const auto s = get_string("data.species_map");
    return s.empty() ? manifest_path().parent_path() / "species_map.txt" : std::filesystem::path(s);
  }
  std::filesystem::path cache_dir() const { return out_dir() / "cache"; }

  /// Hash of every key whose name starts with one of `prefixes`.
  std::string hash(std::initializer_list<std::string_view> prefixes) const {
    Json subset;
    for (auto it = values_.begin(); it != values_.end(); ++it)
      for (auto p : prefixes)
        if (it.key().rfind(p, 0) == 0) {
          subset[it.key()] = it.value();
          break;
        }
    return fnv1a_hex(subset.dump());
  }

  /// Hash of the settings that influence trained weights and reports;
  /// output and input locations are excluded.
  std::string model_hash() const {
    return hash({"seed", "data.image_size", "synth.", "split.", "flow.", "mog2.", "augment.", "train."});
  }

  std::string dump() const { return values_.dump(2) + "\n"; }

  void write(const std::filesystem::path& dir) const { write_text_file(dir / "config.json", dump()); }

  SyntheticParams synthetic() const {
    SyntheticParams p;
    p.image_size = get_int("synth.image_size");
    p.bursts_per_class = get_int("synth.bursts_per_class");
    p.animal_contrast = get_double("synth.animal_contrast");
    p.speed_min = get_double("synth.speed_min");
    p.speed_max = get_double("synth.speed_max");
    p.jitter_amplitude = get_double("synth.jitter_amplitude");
    p.jitter_probability = get_double("synth.jitter_probability");
    p.night_probability = get_double("synth.night_probability");
    p.noise_level = get_double("synth.noise_level");
    p.num_sites = get_int("synth.num_sites");
    p.max_decoys = get_int("synth.max_decoys");
    p.seed = get_seed("synth.seed");
    p.validate();
    return p;
  }

  FlowParams flow() const {
    FlowParams p;
    p.pyramid_scale = get_double("flow.pyramid_scale");
    p.levels = get_int("flow.levels");
    p.window = get_int("flow.window");
    p.iterations = get_int("flow.iterations");
    p.poly_n = get_int("flow.poly_n");
    p.poly_sigma = get_double("flow.poly_sigma");
    p.validate();
    if (!(get_double("flow.magnitude_cap") > 0)) throw ConfigError("flow.magnitude_cap must be positive");
    return p;
  }

  Mog2Params mog2() const {
    Mog2Params p;
    p.max_components = get_int("mog2.max_components");
    p.learning_rate = get_double("mog2.learning_rate");
    p.var_threshold = get_double("mog2.var_threshold");
    p.background_ratio = get_double("mog2.background_ratio");
    p.var_init = get_double("mog2.var_init");
    p.var_min = get_double("mog2.var_min");
    p.var_max = get_double("mog2.var_max");
    p.complexity_prune = get_double("mog2.complexity_prune");
    p.validate();
    return p;
  }

  AugmentConfig augment(std::uint64_t seed) const {
    AugmentConfig a;
    a.flip_prob = get_double("augment.flip_prob");
    a.color_prob = get_double("augment.color_prob");
    a.zoom_prob = get_double("augment.zoom_prob");
    a.hue_delta = {get_double("augment.hue_delta_min"), get_double("augment.hue_delta_max")};
    a.saturation = {get_double("augment.saturation_min"), get_double("augment.saturation_max")};
    a.brightness = {get_double("augment.brightness_min"), get_double("augment.brightness_max")};
    a.contrast = {get_double("augment.contrast_min"), get_double("augment.contrast_max")};
    a.zoom_fraction = {get_double("augment.zoom_min"), get_double("augment.zoom_max")};
    a.seed = seed;
    a.validate();
    return a;
  }

  learner::TrainConfig train(std::uint64_t seed) const {
    learner::TrainConfig t;
    t.adam.learning_rate = get_double("train.learning_rate");
    t.adam.beta1 = get_double("train.beta1");
    t.adam.beta2 = get_double("train.beta2");
    t.adam.epsilon = get_double("train.epsilon");
    t.epochs = get_int("train.epochs");
    t.batch_size = get_int("train.batch_size");
    t.checkpoints_per_epoch = get_int("train.checkpoints_per_epoch");
    t.patience = get_int("train.patience");
    t.seed = seed;
    t.validate();
    return t;
  }

  SplitSpec split(SplitMode mode, std::uint64_t seed) const {
    SplitSpec s;
    s.mode = mode;
    s.train = get_double("split.train");
    s.val = get_double("split.val");
    s.test = get_double("split.test");
    s.seed = seed;
    s.validate();
    return s;
  }

  SplitMode split_mode() const { return parse_split_mode(get_string("split.mode")); }

  static SplitMode parse_split_mode(const std::string& s) {
    if (s == "uniform") return SplitMode::kUniform;
    if (s == "site_based") return SplitMode::kSiteBased;
    throw ConfigError("split mode must be 'uniform' or 'site_based', got '" + s + "'");
  }

  std::vector<ModelVariant> variants() const {
    std::vector<ModelVariant> out;
    for (const auto& v : at("variants")) out.push_back(parse_variant(v.get<std::string>()));
    if (out.empty()) throw ConfigError("variants must not be empty");
    return out;
  }

  std::vector<SplitMode> scenarios() const {
    std::vector<SplitMode> out;
    for (const auto& s : at("scenarios")) out.push_back(parse_split_mode(s.get<std::string>()));
    if (out.empty()) throw ConfigError("scenarios must not be empty");
    return out;
  }

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& s : at("seeds")) {
      if (s.get<long long>() < 0) throw ConfigError("seeds must be non-negative");
      out.push_back(s.get<std::uint64_t>());
    }
    if (out.empty()) throw ConfigError("seeds must not be empty");
    return out;
  }

  int image_size() const {
    const int s = get_int("data.image_size");
    if (s < 16) throw ConfigError("data.image_size must be >= 16");
    return s;
  }

 private:
  Json values_;
};

inline std::string_view split_mode_name(SplitMode m) { return m == SplitMode::kUniform ? "uniform" : "site_based"; }

}  // namespace burstnet::pipeline
