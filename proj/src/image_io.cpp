// Copyright 2026 The uwtrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uwtrack/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace uwt::io {

namespace {

constexpr char kRawMagic[6] = {'U', 'W', 'I', 'M', 'G', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::UnreadableInput, "truncated raw image");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

std::uint8_t to_byte(double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

Image from_bytes(int h, int w, const std::vector<std::uint8_t>& rgb) {
  RowMatrix<double> px(Eigen::Index(h) * w, 3);
  for (Eigen::Index i = 0; i < px.size(); ++i) px.data()[i] = rgb[std::size_t(i)] / 255.0;
  return Image(h, w, std::move(px));
}

std::vector<std::uint8_t> to_bytes(const Image& img) {
  std::vector<std::uint8_t> rgb(std::size_t(img.pixels().size()));
  for (Eigen::Index i = 0; i < img.pixels().size(); ++i) rgb[std::size_t(i)] = to_byte(img.pixels().data()[i]);
  return rgb;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_raw(std::ostream& out, const Image& img) {
  out.write(kRawMagic, sizeof kRawMagic);
  put_u32(out, std::uint32_t(img.height()));
  put_u32(out, std::uint32_t(img.width()));
  // Planar: all of channel 0, then 1, then 2.
  for (Eigen::Index c = 0; c < 3; ++c)
    for (Eigen::Index i = 0; i < img.pixels().rows(); ++i)
      put_u32(out, std::bit_cast<std::uint32_t>(float(img.pixels()(i, c))));
  if (!out) throw Error(ErrorCode::IoError, "failed to write raw image");
}

Image read_raw(std::istream& in) {
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kRawMagic, 6) != 0)
    throw Error(ErrorCode::UnreadableInput, "missing UWIMG1 magic");
  const auto h = get_u32(in), w = get_u32(in);
  if (h == 0 || w == 0 || h > 1u << 15 || w > 1u << 15)
    throw Error(ErrorCode::UnreadableInput, "implausible raw image size");
  RowMatrix<double> px(Eigen::Index(h) * w, 3);
  for (Eigen::Index c = 0; c < 3; ++c)
    for (Eigen::Index i = 0; i < px.rows(); ++i) px(i, c) = double(std::bit_cast<float>(get_u32(in)));
  return Image(int(h), int(w), std::move(px));
}

Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error(ErrorCode::UnreadableInput, path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::UnreadableInput, path.string() + ": " + image.message);
  }
  return from_bytes(int(image.height), int(image.width), rgb);
}

void write_png(const std::filesystem::path& path, const Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.width());
  image.height = png_uint_32(img.height());
  image.format = PNG_FORMAT_RGB;
  const auto rgb = to_bytes(img);
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw Error(ErrorCode::IoError, path.string() + ": " + image.message);
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableInput, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    throw Error(ErrorCode::UnreadableInput, path.string() + ": only 8-bit binary P6 files are supported");
  in.get();
  std::vector<std::uint8_t> rgb(std::size_t(w) * h * 3);
  if (!in.read(reinterpret_cast<char*>(rgb.data()), std::streamsize(rgb.size())))
    throw Error(ErrorCode::UnreadableInput, path.string() + ": truncated pixel data");
  return from_bytes(h, w, rgb);
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  const auto rgb = to_bytes(img);
  out.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed to write " + path.string());
}

namespace {
std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext;
}
}  // namespace

bool is_supported_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".uwimg";
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".uwimg") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableInput, "cannot open " + path.string());
    return read_raw(in);
  }
  throw Error(ErrorCode::UnreadableInput, path.string() + ": unsupported image format");
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const auto ext = lower_extension(path);
  if (ext == ".png") return write_png(path, img);
  if (ext == ".ppm") return write_ppm(path, img);
  if (ext == ".uwimg") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
    return write_raw(out, img);
  }
  throw Error(ErrorCode::IoError, path.string() + ": unsupported image format");
}

}  // namespace uwt::io
