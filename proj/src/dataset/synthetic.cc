// Copyright 2026 The mtverify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mtv/dataset.h"
#include "mtv/error.h"
#include "mtv/rng.h"

namespace mtv::dataset {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Base color of each class; instances jitter around it.
constexpr std::array<std::array<double, 3>, 10> kClassColor = {{
    {1.0, 0.3, 0.3},
    {0.3, 1.0, 0.3},
    {0.3, 0.3, 1.0},
    {1.0, 1.0, 0.3},
    {1.0, 0.3, 1.0},
    {0.3, 1.0, 1.0},
    {1.0, 0.6, 0.2},
    {0.6, 0.2, 1.0},
    {0.8, 0.8, 0.8},
    {0.2, 0.6, 1.0},
}};

struct Draw {
  double period;
  double phase_a;
  double phase_b;
  double cy;
  double cx;
  double radius;
};

// Class texture in [-1, 1] at pixel (r, c) of a 32x32 canvas.
double pattern(int cls, const Draw& d, double r, double c) {
  const double dist = std::hypot(r - d.cy, c - d.cx);
  switch (cls % 10) {
    case 0:
      return std::sin(kTwoPi * r / d.period + d.phase_a);
    case 1:
      return std::sin(kTwoPi * c / d.period + d.phase_a);
    case 2:
      return std::sin(kTwoPi * (r + c) / d.period + d.phase_a);
    case 3:
      return std::sin(kTwoPi * r / d.period + d.phase_a) *
                         std::sin(kTwoPi * c / d.period + d.phase_b) >= 0.0
                 ? 1.0
                 : -1.0;
    case 4:
      return std::tanh(d.radius - dist);
    case 5:
      return std::abs(dist - d.radius) < 1.5 ? 1.0 : -1.0;
    case 6:
      return (std::abs(r - d.cy) < 2.0 || std::abs(c - d.cx) < 2.0) ? 1.0 : -1.0;
    case 7:
      return std::sin(kTwoPi * (r - c) / d.period + d.phase_a);
    case 8:
      return std::cos(std::numbers::pi * dist / 12.0);
    default:
      return std::sin(kTwoPi * r / d.period + d.phase_a) *
             std::sin(kTwoPi * c / d.period + d.phase_b);
  }
}

}  // namespace

LabeledImageSet make_synthetic_images(std::size_t per_class, std::uint64_t seed,
                                      int class_count) {
  if (class_count < 2 || class_count > 10) {
    throw ArgumentError("synthetic corpus supports 2..10 classes");
  }
  Rng rng(seed);
  LabeledImageSet set;
  set.channels = 3;
  set.height = kCifarSide;
  set.width = kCifarSide;
  const std::size_t total = per_class * static_cast<std::size_t>(class_count);
  set.pixels.reserve(total * 3 * kCifarPlane);
  set.labels.reserve(total);

  for (std::size_t n = 0; n < total; ++n) {
    const int cls = static_cast<int>(n % static_cast<std::size_t>(class_count));
    Draw d;
    d.period = rng.uniform(5.0, 9.0);
    d.phase_a = rng.uniform(0.0, kTwoPi);
    d.phase_b = rng.uniform(0.0, kTwoPi);
    d.cy = 15.5 + rng.uniform(-3.0, 3.0);
    d.cx = 15.5 + rng.uniform(-3.0, 3.0);
    d.radius = rng.uniform(3.5, 7.0);
    const double brightness = rng.uniform(80.0, 170.0);
    const double contrast = rng.uniform(25.0, 70.0);
    std::array<double, 3> color;
    for (int ch = 0; ch < 3; ++ch) {
      color[ch] = std::clamp(kClassColor[cls][ch] + rng.uniform(-0.35, 0.35), 0.0, 1.2);
    }
    for (int ch = 0; ch < 3; ++ch) {
      for (std::size_t r = 0; r < kCifarSide; ++r) {
        for (std::size_t c = 0; c < kCifarSide; ++c) {
          const double p = pattern(cls, d, static_cast<double>(r), static_cast<double>(c));
          const double v = brightness + contrast * color[ch] * p + rng.normal(0.0, 28.0);
          set.pixels.push_back(static_cast<float>(std::round(std::clamp(v, 0.0, 255.0))));
        }
      }
    }
    set.labels.push_back(cls);
  }
  return set;
}

}  // namespace mtv::dataset
