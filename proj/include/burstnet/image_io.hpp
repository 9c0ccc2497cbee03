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

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/tensor.hpp"

namespace burstnet {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

inline Frame frame_from_bytes(int h, int w, int c, const std::vector<std::uint8_t>& px) {
  std::vector<float> data(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) data[i] = static_cast<float>(px[i]) / 255.0f;
  return Frame(h, w, c, std::move(data));
}

inline std::vector<std::uint8_t> frame_to_bytes(const Frame& f) {
  std::vector<std::uint8_t> px(f.size());
  const auto d = f.data();
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(d[i], 0.0f, 1.0f) * 255.0f));
  return px;
}

inline Frame load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DataError("cannot read png " + path.string() + ": " + image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode png " + path.string() + ": " + msg);
  }
  return frame_from_bytes(static_cast<int>(image.height), static_cast<int>(image.width), gray ? 1 : 3, px);
}

inline void save_png(const std::filesystem::path& path, const Frame& f) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(f.width());
  image.height = static_cast<png_uint_32>(f.height());
  image.format = f.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const auto px = frame_to_bytes(f);
  if (!png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr))
    throw DataError("cannot write png " + path.string() + ": " + image.message);
}

inline Frame load_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        t.push_back(c);
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw DataError("unsupported pnm type in " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw DataError("malformed pnm header in " + path.string());
  }
  if (maxval != 255) throw DataError("only 8-bit pnm supported: " + path.string());
  const int c = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * c);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size())) throw DataError("truncated pnm " + path.string());
  return frame_from_bytes(h, w, c, px);
}

inline void save_pnm(const std::filesystem::path& path, const Frame& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << (f.channels() == 3 ? "P6" : "P5") << "\n" << f.width() << " " << f.height() << "\n255\n";
  const auto px = frame_to_bytes(f);
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace detail

/// Load an 8-bit PNG, PPM or PGM as a [0,1] frame.
inline Frame load_image(const std::filesystem::path& path) {
  const auto ext = detail::lower_extension(path);
  if (ext == ".png") return detail::load_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return detail::load_pnm(path);
  throw DataError("unsupported image format: " + path.string());
}

inline void save_image(const std::filesystem::path& path, const Frame& f) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto ext = detail::lower_extension(path);
  if (ext == ".png") return detail::save_png(path, f);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return detail::save_pnm(path, f);
  throw DataError("unsupported image format: " + path.string());
}

}  // namespace burstnet
