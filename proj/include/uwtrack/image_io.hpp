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

#pragma once

#include <filesystem>
#include <iosfwd>

#include "uwtrack/image.hpp"

namespace uwt::io {

/// Raw exchange format: magic "UWIMG1", u32 height, u32 width, then
/// height*width*3 little-endian float32 values in row-major (y, x, channel) order.
void write_raw(std::ostream& out, const Image& img);
Image read_raw(std::istream& in);

/// 8-bit raster codecs. Values are quantized as round(v * 255).
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

/// Dispatches on the extension: .png, .ppm, .uwimg (raw).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

bool is_supported_image(const std::filesystem::path& path);

}  // namespace uwt::io
