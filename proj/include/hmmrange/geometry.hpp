// Copyright 2026, The hmmrange Authors
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
#include <cstddef>

namespace hmmrange {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point &, const Point &) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned rectangle, closed on all sides.
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool contains(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool valid() const { return x1 > x0 && y1 > y0; }
};

/// Extra path length of the single-bounce path tx -> p -> rx over the direct path.
inline double excess_path(Point tx, Point p, Point rx) {
  return distance(tx, p) + distance(p, rx) - distance(tx, rx);
}

/// 1-based range bin of an excess path: ceil(excess / bin_distance), at least 1.
///
/// A scatterer on the direct segment has zero excess; the ceiling would give 0,
/// which is not a valid bin, so it maps to bin 1.
inline std::size_t excess_to_bin(double excess, double bin_distance) {
  // Guard against rounding pushing an exact multiple one bin up.
  const double ratio = excess / bin_distance;
  const double snapped = std::abs(ratio - std::round(ratio)) < 1e-9 ? std::round(ratio) : ratio;
  const double k = std::ceil(snapped);
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

}  // namespace hmmrange
