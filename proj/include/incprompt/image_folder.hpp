/**
 * Copyright 2026 The incprompt Authors
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

// Class-per-directory PNG datasets: root/<split>/<class_name>/*.png.
// Requires linking libpng.

#pragma once

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "incprompt/backbone.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/data.hpp"

namespace incprompt {

namespace detail {

struct PngPixels {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgba;  // 4 bytes per pixel
};

inline PngPixels read_png_rgba(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw ConfigError("cannot open image '" + path + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ConfigError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ConfigError("libpng: cannot allocate info struct");
  }
  PngPixels out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ConfigError("libpng: failed to decode '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  out.rgba.resize(static_cast<std::size_t>(out.width) * out.height * 4);
  rows.resize(static_cast<std::size_t>(out.height));
  for (int r = 0; r < out.height; ++r) rows[static_cast<std::size_t>(r)] = out.rgba.data() + static_cast<std::size_t>(r) * out.width * 4;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace detail

/// Loads a PNG scaled to [-1, 1]. One channel averages RGB; three keeps RGB.
template <typename Scalar>
Image<Scalar> load_png(const std::string& path, int image_size, int channels) {
  require(channels == 1 || channels == 3, "image folder: channels must be 1 or 3");
  const detail::PngPixels px = detail::read_png_rgba(path);
  if (px.width != image_size || px.height != image_size) {
    throw ConfigError("image '" + path + "' is " + std::to_string(px.width) + "x" + std::to_string(px.height) +
                      ", expected " + std::to_string(image_size) + "x" + std::to_string(image_size));
  }
  Image<Scalar> img{image_size, image_size, channels,
                    std::vector<Scalar>(static_cast<std::size_t>(image_size) * image_size * channels)};
  auto norm = [](double v) { return static_cast<Scalar>(v / 127.5 - 1.0); };
  for (int r = 0; r < image_size; ++r) {
    for (int c = 0; c < image_size; ++c) {
      const unsigned char* p = &px.rgba[(static_cast<std::size_t>(r) * image_size + c) * 4];
      if (channels == 1) {
        img.at(r, c, 0) = norm((p[0] + p[1] + p[2]) / 3.0);
      } else {
        for (int k = 0; k < 3; ++k) img.at(r, c, k) = norm(p[k]);
      }
    }
  }
  return img;
}

/// Reads root/train/<class>/*.png and root/test/<class>/*.png. Class labels
/// follow the sorted union of class directory names; files load in sorted order.
template <typename Scalar>
LabeledDataset<Scalar> load_image_folder(const std::string& root, int image_size, int channels) {
  namespace fs = std::filesystem;
  const fs::path base(root);
  if (!fs::is_directory(base / "train") || !fs::is_directory(base / "test")) {
    throw ConfigError("image folder '" + root + "' must contain train/ and test/ directories");
  }
  std::vector<std::string> names;
  for (const char* split : {"train", "test"}) {
    for (const auto& e : fs::directory_iterator(base / split)) {
      if (e.is_directory()) names.push_back(e.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::map<std::string, int> label_of;
  for (std::size_t i = 0; i < names.size(); ++i) label_of[names[i]] = static_cast<int>(i);

  LabeledDataset<Scalar> data;
  data.num_classes = static_cast<int>(names.size());
  data.class_names = names;
  for (const char* split : {"train", "test"}) {
    auto& dst = std::string(split) == "train" ? data.train : data.test;
    for (const auto& name : names) {
      const fs::path dir = base / split / name;
      if (!fs::is_directory(dir)) continue;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        dst.push_back({load_png<Scalar>(f.string(), image_size, channels), label_of[name], f.string()});
      }
    }
  }
  return data;
}

}  // namespace incprompt
