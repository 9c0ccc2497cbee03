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

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "burstnet/background_model.hpp"
#include "burstnet/burst.hpp"
#include "burstnet/error.hpp"
#include "burstnet/optical_flow.hpp"
#include "burstnet/tensor.hpp"
#include "burstnet/tensor_io.hpp"

namespace burstnet {

enum class ModelVariant {
  kBaseline,
  kLstm,
  kMog2_4,
  kMog2_10,
  kOptFlow_6,
  kOptFlow_15,
  kHybrid_13,
  kOptFlowOnly_6,
  kOptFlowMog2Only_7,
};

inline constexpr std::array<ModelVariant, 9> kAllVariants = {
    ModelVariant::kBaseline,   ModelVariant::kLstm,       ModelVariant::kMog2_4,
    ModelVariant::kMog2_10,    ModelVariant::kOptFlow_6,  ModelVariant::kOptFlow_15,
    ModelVariant::kHybrid_13,  ModelVariant::kOptFlowOnly_6, ModelVariant::kOptFlowMog2Only_7,
};

inline std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::kBaseline: return "Baseline";
    case ModelVariant::kLstm: return "LSTM";
    case ModelVariant::kMog2_4: return "Mog2_4";
    case ModelVariant::kMog2_10: return "Mog2_10";
    case ModelVariant::kOptFlow_6: return "OptFlow_6";
    case ModelVariant::kOptFlow_15: return "OptFlow_15";
    case ModelVariant::kHybrid_13: return "Hybrid_13";
    case ModelVariant::kOptFlowOnly_6: return "OptFlowOnly_6";
    case ModelVariant::kOptFlowMog2Only_7: return "OptFlowMog2Only_7";
  }
  return "?";
}

inline ModelVariant parse_variant(std::string_view name) {
  for (ModelVariant v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

/// Channels of one model input; the LSTM's per-step input has 3.
inline int variant_channels(ModelVariant v) {
  switch (v) {
    case ModelVariant::kBaseline:
    case ModelVariant::kLstm: return 3;
    case ModelVariant::kMog2_4: return 4;
    case ModelVariant::kMog2_10: return 10;
    case ModelVariant::kOptFlow_6: return 6;
    case ModelVariant::kOptFlow_15: return 15;
    case ModelVariant::kHybrid_13: return 13;
    case ModelVariant::kOptFlowOnly_6: return 6;
    case ModelVariant::kOptFlowMog2Only_7: return 7;
  }
  return 0;
}

inline bool needs_features(ModelVariant v) { return v != ModelVariant::kBaseline && v != ModelVariant::kLstm; }
inline bool is_sequence_input(ModelVariant v) { return v == ModelVariant::kLstm; }

struct BurstFeatures {
  Frame flow12, flow23, flow_avg;
  ForegroundMask mog2;
};

inline BurstFeatures compute_features(const Burst& burst, const FlowParams& flow = {}, const Mog2Params& mog2 = {},
                                      double magnitude_cap = kDefaultMagnitudeCap) {
  auto f = burst_flow_images(burst, flow, magnitude_cap);
  return {std::move(f.flow12), std::move(f.flow23), std::move(f.averaged), burst_foreground(burst, mog2)};
}

inline constexpr std::array<std::string_view, 4> kFeatureFiles = {"flow12.btsr", "flow23.btsr", "flow_avg.btsr",
                                                                   "mog2.btsr"};

inline void write_features(const std::filesystem::path& dir, const BurstFeatures& f) {
  std::filesystem::create_directories(dir);
  write_tensor(dir / kFeatureFiles[0], frame_to_tensor(f.flow12, ChannelRole::kFlow12));
  write_tensor(dir / kFeatureFiles[1], frame_to_tensor(f.flow23, ChannelRole::kFlow23));
  write_tensor(dir / kFeatureFiles[2], frame_to_tensor(f.flow_avg, ChannelRole::kFlowAveraged));
  write_tensor(dir / kFeatureFiles[3], frame_to_tensor(f.mog2, ChannelRole::kMog2));
}

inline bool features_exist(const std::filesystem::path& dir) {
  for (auto name : kFeatureFiles)
    if (!std::filesystem::exists(dir / name)) return false;
  return true;
}

inline BurstFeatures read_features(const std::filesystem::path& dir) {
  auto load = [&](std::string_view name, ChannelRole role, int channels) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw ContractError("missing feature file " + path.string());
    const Tensor t = read_tensor(path);
    if (t.dims.size() != 3 || t.dims[2] != static_cast<std::uint32_t>(channels))
      throw DimensionError("feature file " + path.string() + " has the wrong shape");
    for (auto r : t.roles)
      if (r != role) throw ContractError("feature file " + path.string() + " has the wrong channel role");
    return frame_from_tensor(t);
  };
  return {load(kFeatureFiles[0], ChannelRole::kFlow12, 3), load(kFeatureFiles[1], ChannelRole::kFlow23, 3),
          load(kFeatureFiles[2], ChannelRole::kFlowAveraged, 3), load(kFeatureFiles[3], ChannelRole::kMog2, 1)};
}

enum class AssembleMode { kTrain, kEval };

/// Model inputs for one burst. Baseline in train mode and LSTM return one
/// stack per frame; every other case returns a single stack.
inline std::vector<ChannelStack> build_stack(const Burst& burst, const BurstFeatures* features, ModelVariant v,
                                             AssembleMode mode = AssembleMode::kEval) {
  using R = ChannelRole;
  const auto& [f1, f2, f3] = burst.frames;
  for (const Frame& f : burst.frames)
    if (f.channels() != 3) throw ChannelError("burst " + burst.burst_id + " frames must be RGB");
  if (needs_features(v)) {
    if (!features)
      throw ContractError("variant " + std::string(variant_name(v)) + " needs features for burst " + burst.burst_id);
    for (const Frame* f : {&features->flow12, &features->flow23, &features->flow_avg, &features->mog2})
      if (f->height() != f1.height() || f->width() != f1.width())
        throw DimensionError("features of burst " + burst.burst_id + " do not match its frame size");
  }
  std::vector<ChannelStack> out;
  switch (v) {
    case ModelVariant::kBaseline:
      out.push_back(ChannelStack::concat({{f1, R::kImage1}}));
      if (mode == AssembleMode::kTrain) {
        out.push_back(ChannelStack::concat({{f2, R::kImage2}}));
        out.push_back(ChannelStack::concat({{f3, R::kImage3}}));
      }
      break;
    case ModelVariant::kLstm:
      out.push_back(ChannelStack::concat({{f1, R::kImage1}}));
      out.push_back(ChannelStack::concat({{f2, R::kImage2}}));
      out.push_back(ChannelStack::concat({{f3, R::kImage3}}));
      break;
    case ModelVariant::kMog2_4:
      out.push_back(ChannelStack::concat({{f1, R::kImage1}, {features->mog2, R::kMog2}}));
      break;
    case ModelVariant::kMog2_10:
      out.push_back(ChannelStack::concat({{f1, R::kImage1}, {f2, R::kImage2}, {f3, R::kImage3}, {features->mog2, R::kMog2}}));
      break;
    case ModelVariant::kOptFlow_6:
      out.push_back(ChannelStack::concat({{f1, R::kImage1}, {features->flow_avg, R::kFlowAveraged}}));
      break;
    case ModelVariant::kOptFlow_15:
      out.push_back(ChannelStack::concat({{f1, R::kImage1},
                                          {f2, R::kImage2},
                                          {f3, R::kImage3},
                                          {features->flow12, R::kFlow12},
                                          {features->flow23, R::kFlow23}}));
      break;
    case ModelVariant::kHybrid_13:
      out.push_back(ChannelStack::concat({{f1, R::kImage1},
                                          {f2, R::kImage2},
                                          {f3, R::kImage3},
                                          {features->flow_avg, R::kFlowAveraged},
                                          {features->mog2, R::kMog2}}));
      break;
    case ModelVariant::kOptFlowOnly_6:
      out.push_back(ChannelStack::concat({{features->flow12, R::kFlow12}, {features->flow23, R::kFlow23}}));
      break;
    case ModelVariant::kOptFlowMog2Only_7:
      out.push_back(ChannelStack::concat(
          {{features->flow12, R::kFlow12}, {features->flow23, R::kFlow23}, {features->mog2, R::kMog2}}));
      break;
  }
  return out;
}

/// Role layout of a variant's input, without building it.
inline std::vector<ChannelRole> variant_roles(ModelVariant v) {
  using R = ChannelRole;
  auto rep = [](std::vector<R>& out, R r, int n) { out.insert(out.end(), n, r); };
  std::vector<R> out;
  switch (v) {
    case ModelVariant::kBaseline:
    case ModelVariant::kLstm: rep(out, R::kImage1, 3); break;
    case ModelVariant::kMog2_4: rep(out, R::kImage1, 3); rep(out, R::kMog2, 1); break;
    case ModelVariant::kMog2_10:
      rep(out, R::kImage1, 3); rep(out, R::kImage2, 3); rep(out, R::kImage3, 3); rep(out, R::kMog2, 1);
      break;
    case ModelVariant::kOptFlow_6: rep(out, R::kImage1, 3); rep(out, R::kFlowAveraged, 3); break;
    case ModelVariant::kOptFlow_15:
      rep(out, R::kImage1, 3); rep(out, R::kImage2, 3); rep(out, R::kImage3, 3);
      rep(out, R::kFlow12, 3); rep(out, R::kFlow23, 3);
      break;
    case ModelVariant::kHybrid_13:
      rep(out, R::kImage1, 3); rep(out, R::kImage2, 3); rep(out, R::kImage3, 3);
      rep(out, R::kFlowAveraged, 3); rep(out, R::kMog2, 1);
      break;
    case ModelVariant::kOptFlowOnly_6: rep(out, R::kFlow12, 3); rep(out, R::kFlow23, 3); break;
    case ModelVariant::kOptFlowMog2Only_7:
      rep(out, R::kFlow12, 3); rep(out, R::kFlow23, 3); rep(out, R::kMog2, 1);
      break;
  }
  return out;
}

}  // namespace burstnet
