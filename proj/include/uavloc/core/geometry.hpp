// Copyright 2026 The uavloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <ostream>

namespace uavloc {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
    friend std::ostream& operator<<(std::ostream& os, const Point2& p) {
        return os << '(' << p.x << ", " << p.y << ')';
    }
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    [[nodiscard]] int width() const { return x1 - x0; }
    [[nodiscard]] int height() const { return y1 - y0; }
    [[nodiscard]] bool empty() const { return x1 <= x0 || y1 <= y0; }
    [[nodiscard]] Point2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
    [[nodiscard]] bool contains(const Point2& p) const {
        return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
    }
    [[nodiscard]] bool inside(int w, int h) const {
        return x0 >= 0 && y0 >= 0 && x1 <= w && y1 <= h;
    }
    [[nodiscard]] PixelRect clipped(int w, int h) const {
        return {std::clamp(x0, 0, w), std::clamp(y0, 0, h), std::clamp(x1, 0, w), std::clamp(y1, 0, h)};
    }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
    friend std::ostream& operator<<(std::ostream& os, const PixelRect& r) {
        return os << '[' << r.x0 << ',' << r.x1 << ")x[" << r.y0 << ',' << r.y1 << ')';
    }
};

}  // namespace uavloc
