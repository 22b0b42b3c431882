#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

namespace guibee {

struct Point {
    int x = 0;
    int y = 0;
    bool operator==(const Point&) const = default;
};

// Half-open pixel rectangle: [x0, x1) x [y0, y1).
struct Rect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool empty() const { return x1 <= x0 || y1 <= y0; }

    bool contains(Point p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
    bool contains(const Rect& r) const {
        return r.x0 >= x0 && r.y0 >= y0 && r.x1 <= x1 && r.y1 <= y1;
    }
    Point center() const { return Point{(x0 + x1) / 2, (y0 + y1) / 2}; }

    Rect intersect(const Rect& r) const {
        Rect out{std::max(x0, r.x0), std::max(y0, r.y0), std::min(x1, r.x1), std::min(y1, r.y1)};
        if (out.empty()) return Rect{0, 0, 0, 0};
        return out;
    }
    bool overlaps(const Rect& r) const { return !intersect(r).empty(); }

    std::string to_string() const {
        return "[" + std::to_string(x0) + "," + std::to_string(y0) + "," + std::to_string(x1) +
               "," + std::to_string(y1) + "]";
    }

    bool operator==(const Rect&) const = default;
};

}  // namespace guibee
