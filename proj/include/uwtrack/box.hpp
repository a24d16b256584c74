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

#include <cmath>
#include <optional>

namespace uwt {

/// Axis-aligned box, top-left corner plus extent, in pixels.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double center_x() const { return x + w / 2; }
  double center_y() const { return y + h / 2; }
  double area() const { return w * h; }
  double diagonal() const { return std::sqrt(w * w + h * h); }

  bool operator==(const Box&) const = default;
};

/// std::nullopt marks a frame whose target is absent (out of view or not annotated).
using MaybeBox = std::optional<Box>;

}  // namespace uwt
