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
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <mutex>
#include <thread>
#include <vector>

#include "burstnet/burst.hpp"
#include "burstnet/color.hpp"
#include "burstnet/dataset.hpp"
#include "burstnet/error.hpp"
#include "burstnet/image_io.hpp"
#include "burstnet/rng.hpp"
#include "burstnet/texture.hpp"

namespace burstnet {

/// Desk-scale camera-trap scenes: per-site textured backgrounds, static
/// animal-like decoys, optional swaying vegetation, and (for positives) a
/// low-contrast blob by day or a pair of bright eyes by night moving at
/// constant velocity.
struct SyntheticParams {
  int image_size = 64;
  int bursts_per_class = 100;
  double animal_contrast = 0.6;
  double speed_min = 2.0, speed_max = 5.0;  // px per frame
  double jitter_amplitude = 1.5;            // px
  double jitter_probability = 0.5;
  double night_probability = 0.2;
  double noise_level = 0.02;
  int num_sites = 20;
  int max_decoys = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (image_size < 16) throw ConfigError("synthetic image_size must be >= 16");
    if (bursts_per_class < 1) throw ConfigError("synthetic bursts_per_class must be >= 1");
    if (animal_contrast < 0 || animal_contrast > 1) throw ConfigError("synthetic animal_contrast must be in [0,1]");
    if (speed_min < 0 || speed_max < speed_min || speed_max > image_size / 4.0)
      throw ConfigError("synthetic speed range must lie within [0, image_size/4]");
    if (jitter_amplitude < 0) throw ConfigError("synthetic jitter_amplitude must be >= 0");
    for (double p : {jitter_probability, night_probability})
      if (p < 0 || p > 1) throw ConfigError("synthetic probabilities must be in [0,1]");
    if (noise_level < 0) throw ConfigError("synthetic noise_level must be >= 0");
    if (num_sites < 1) throw ConfigError("synthetic num_sites must be >= 1");
    if (max_decoys < 0) throw ConfigError("synthetic max_decoys must be >= 0");
  }
};

struct SyntheticBurst {
  Burst burst;
  std::array<Frame, 3> masks;                    // animal support per frame; zero for negatives
  std::array<std::array<double, 2>, 3> centers;  // animal centre (x, y) per frame
  bool night = false;
};

namespace detail {

enum : std::uint64_t { kStreamSite = 1, kStreamScene, kStreamDecoy, kStreamJitter, kStreamAnimal, kStreamNoise };

using Rgb = std::array<double, 3>;

struct RgbPlane {
  int size = 0;
  std::vector<Rgb> px;
  Rgb& at(int y, int x) { return px[static_cast<std::size_t>(y) * size + x]; }
  const Rgb& at(int y, int x) const { return px[static_cast<std::size_t>(y) * size + x]; }
  Rgb sample(double y, double x) const {
    y = std::clamp(y, 0.0, size - 1.0);
    x = std::clamp(x, 0.0, size - 1.0);
    const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    const int y1 = std::min(y0 + 1, size - 1), x1 = std::min(x0 + 1, size - 1);
    const double fy = y - y0, fx = x - x0;
    Rgb out;
    for (int c = 0; c < 3; ++c)
      out[c] = (1 - fy) * ((1 - fx) * at(y0, x0)[c] + fx * at(y0, x1)[c]) + fy * ((1 - fx) * at(y1, x0)[c] + fx * at(y1, x1)[c]);
    return out;
  }
};

inline RgbPlane site_background(const SyntheticParams& p, int site) {
  Rng rng = make_rng(p.seed, {kStreamSite, static_cast<std::uint64_t>(site)});
  const int n = p.image_size;
  const auto base = hsv_to_rgb(uniform(rng, 0.08, 0.35), uniform(rng, 0.2, 0.55), uniform(rng, 0.35, 0.6));
  const double fine_sigma = uniform(rng, 1.0, 2.0), coarse_sigma = uniform(rng, 4.0, 8.0);
  const auto fine = smooth_noise(n, n, fine_sigma, 0.15, rng);
  const auto coarse = smooth_noise(n, n, coarse_sigma, 0.12, rng);
  std::array<std::vector<double>, 3> tint;
  for (auto& t : tint) t = smooth_noise(n, n, 3.0, 0.04, rng);
  RgbPlane bg{n, std::vector<Rgb>(static_cast<std::size_t>(n) * n)};
  for (std::size_t i = 0; i < bg.px.size(); ++i) {
    const double tex = (fine[i] - 0.5) + (coarse[i] - 0.5);
    for (int c = 0; c < 3; ++c) bg.px[i][c] = std::clamp(base[c] * (1.0 + 1.8 * tex) + (tint[c][i] - 0.5), 0.0, 1.0);
  }
  return bg;
}

/// Day blob or night eye pair; rasterised as coverage in [0,1].
struct Critter {
  bool night = false;
  double rx = 5, ry = 4, angle = 0;
  double sign = 1;
  Rgb tint{1, 1, 1};
  double phase_x = 0, phase_y = 0;

  static Critter draw(Rng& rng, bool night) {
    Critter c;
    c.night = night;
    c.rx = uniform(rng, 4.0, 7.0);
    c.ry = uniform(rng, 3.0, 5.0);
    c.angle = uniform(rng, 0, std::numbers::pi);
    c.sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
    c.tint = {uniform(rng, 0.8, 1.0), uniform(rng, 0.7, 0.9), uniform(rng, 0.5, 0.8)};
    c.phase_x = uniform(rng, 0, 6.3);
    c.phase_y = uniform(rng, 0, 6.3);
    return c;
  }

  double radius() const { return night ? 5.0 : std::max(rx, ry) * 1.2 + 1.0; }

  /// Coverage and body-texture factor at offset (u, v) from the centre.
  std::pair<double, double> coverage(double u, double v) const {
    if (night) {
      double best = 0;
      for (double ex : {-2.5, 2.5}) {
        const double r = std::hypot(u - ex, v) / 1.6;
        best = std::max(best, std::clamp((1.15 - r) / 0.3, 0.0, 1.0));
      }
      return {best, 1.0};
    }
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double a = (ca * u + sa * v) / rx, b = (-sa * u + ca * v) / ry;
    const double r = std::hypot(a, b);
    const double texture = 0.75 + 0.25 * std::sin(1.3 * a * rx + phase_x) * std::cos(1.1 * b * ry + phase_y);
    return {std::clamp((1.15 - r) / 0.3, 0.0, 1.0), texture};
  }

  bool inside(double u, double v) const {
    if (night) return std::hypot(u - 2.5, v) < 1.6 || std::hypot(u + 2.5, v) < 1.6;
    const double ca = std::cos(angle), sa = std::sin(angle);
    return std::hypot((ca * u + sa * v) / rx, (-sa * u + ca * v) / ry) < 1.0;
  }

  void paint(RgbPlane& img, double cx, double cy, double contrast) const {
    const int r = static_cast<int>(std::ceil(radius())) + 1;
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(img.size - 1, static_cast<int>(cy) + r); ++y)
      for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(img.size - 1, static_cast<int>(cx) + r); ++x) {
        const auto [alpha, texture] = coverage(x - cx, y - cy);
        if (alpha <= 0) continue;
        auto& px = img.at(y, x);
        for (int c = 0; c < 3; ++c) {
          const double delta = night ? 2.0 * contrast : sign * contrast * texture * tint[c];
          px[c] = std::clamp(px[c] + alpha * delta, 0.0, 1.0);
        }
      }
  }
};

}  // namespace detail

inline std::string synthetic_burst_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "syn_%06d", index);
  return buf;
}

/// Render burst `index`. Even indices are positives unless `label` is given;
/// `velocity` overrides the sampled motion. Every random component uses its
/// own stream, so a positive with contrast 0 equals the same-index negative.
inline SyntheticBurst render_burst(const SyntheticParams& p, int index, std::optional<int> label = std::nullopt,
                                   std::optional<std::array<double, 2>> velocity = std::nullopt) {
  p.validate();
  using namespace detail;
  const int n = p.image_size;
  const int lbl = label.value_or(index % 2 == 0 ? 1 : 0);
  const int site = (index / 2) % p.num_sites;
  const auto idx = static_cast<std::uint64_t>(index);

  SyntheticBurst out;
  out.burst.burst_id = synthetic_burst_id(index);
  char site_buf[32];
  std::snprintf(site_buf, sizeof(site_buf), "site_%02d", site);
  out.burst.site_id = site_buf;
  out.burst.label = lbl;

  const RgbPlane bg = site_background(p, site);

  Rng scene = make_rng(p.seed, {kStreamScene, idx});
  const bool night = bernoulli(scene, p.night_probability);
  const double gain = uniform(scene, 0.85, 1.15);
  out.night = night;

  Rng jitter_rng = make_rng(p.seed, {kStreamJitter, idx});
  const bool jitter = bernoulli(jitter_rng, p.jitter_probability);
  const double jx = uniform(jitter_rng, 8, n - 8), jy = uniform(jitter_rng, 8, n - 8);
  const double jr = uniform(jitter_rng, 6, 10);
  std::array<std::array<double, 2>, 3> jd{};
  for (int k = 1; k < 3; ++k) {
    const double a = uniform(jitter_rng, 0, 2 * std::numbers::pi), m = p.jitter_amplitude * std::sqrt(uniform01(jitter_rng));
    jd[k] = {m * std::cos(a), m * std::sin(a)};
  }

  Rng decoy_rng = make_rng(p.seed, {kStreamDecoy, idx});
  const int n_decoys = static_cast<int>(uniform_index(decoy_rng, static_cast<std::uint64_t>(p.max_decoys) + 1));
  std::vector<std::pair<Critter, std::array<double, 2>>> decoys;
  for (int d = 0; d < n_decoys; ++d) {
    Critter c = Critter::draw(decoy_rng, night);
    const double m = c.radius();
    decoys.push_back({c, {uniform(decoy_rng, m, n - 1 - m), uniform(decoy_rng, m, n - 1 - m)}});
  }

  Rng animal_rng = make_rng(p.seed, {kStreamAnimal, idx});
  const Critter animal = Critter::draw(animal_rng, night);
  std::array<double, 2> v;
  if (velocity) {
    v = *velocity;
  } else {
    const double speed = uniform(animal_rng, p.speed_min, p.speed_max);
    const double dir = uniform(animal_rng, 0, 2 * std::numbers::pi);
    v = {speed * std::cos(dir), speed * std::sin(dir)};
  }
  const double margin = animal.radius();
  std::array<double, 2> start;
  for (int a = 0; a < 2; ++a) {
    const double lo = margin - std::min(0.0, 2 * v[a]), hi = n - 1 - margin - std::max(0.0, 2 * v[a]);
    if (hi < lo) throw ConfigError("animal motion does not fit in the frame");
    start[a] = uniform(animal_rng, lo, hi);
  }

  Rng noise_rng = make_rng(p.seed, {kStreamNoise, idx});
  for (int k = 0; k < 3; ++k) {
    RgbPlane img{n, std::vector<Rgb>(bg.px.size())};
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        Rgb c = bg.at(y, x);
        if (jitter && k > 0) {
          const double w = std::clamp((jr - std::hypot(x - jx, y - jy)) / 3.0, 0.0, 1.0);
          if (w > 0) {
            const Rgb moved = bg.sample(y - jd[k][1], x - jd[k][0]);
            for (int ch = 0; ch < 3; ++ch) c[ch] = (1 - w) * c[ch] + w * moved[ch];
          }
        }
        if (night) {
          const double l = 0.45 * (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]);
          c = {l, l, l};
        }
        for (double& ch : c) ch = std::clamp(ch * gain, 0.0, 1.0);
        img.at(y, x) = c;
      }
    for (const auto& [d, pos] : decoys) d.paint(img, pos[0], pos[1], p.animal_contrast);
    out.centers[k] = {start[0] + k * v[0], start[1] + k * v[1]};
    Frame mask(n, n, 1);
    if (lbl == 1) {
      animal.paint(img, out.centers[k][0], out.centers[k][1], p.animal_contrast);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          if (animal.inside(x - out.centers[k][0], y - out.centers[k][1])) mask.at(y, x) = 1.0f;
    }
    out.masks[k] = std::move(mask);
    Frame frame(n, n, 3);
    auto dst = frame.mutable_data();
    for (std::size_t i = 0; i < img.px.size(); ++i)
      for (int ch = 0; ch < 3; ++ch)
        dst[3 * i + ch] = static_cast<float>(std::clamp(img.px[i][ch] + normal(noise_rng, 0, p.noise_level), 0.0, 1.0));
    out.burst.frames[k] = std::move(frame);
  }
  return out;
}

/// Write 2 x bursts_per_class bursts as PNGs plus `manifest.csv` and
/// `species_map.txt` under `out_dir`. Returns the manifest path.
inline std::filesystem::path generate_synthetic(const SyntheticParams& p, const std::filesystem::path& out_dir,
                                                int jobs = 1) {
  p.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  const int total = 2 * p.bursts_per_class;
  std::vector<BurstRecord> records(total);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    try {
      for (int i = next++; i < total; i = next++) {
        const auto sb = render_burst(p, i);
        BurstRecord& r = records[i];
        r.burst_id = sb.burst.burst_id;
        r.site_id = sb.burst.site_id;
        r.raw_label = sb.burst.label == 1 ? "animal" : "empty";
        for (int k = 0; k < 3; ++k) {
          const std::string name = r.burst_id + "_" + std::to_string(k + 1) + ".png";
          save_image(out_dir / "images" / name, sb.burst.frames[k]);
          r.frame_paths[k] = "images/" + name;
          if (sb.burst.label == 1) save_image(out_dir / "masks" / name, sb.masks[k]);
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = total;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  Manifest m;
  m.directory = out_dir;
  m.records = std::move(records);
  const auto manifest = out_dir / "manifest.csv";
  write_manifest(manifest, m);
  std::ofstream species(out_dir / "species_map.txt", std::ios::trunc);
  species << "# raw_label,binary_label\nanimal,1\nempty,0\n";
  return manifest;
}

}  // namespace burstnet
