#pragma once

#include <cstdint>
#include <string>

namespace ecn {

// Extents of a dense 4-D array, row-major batch -> channel -> row -> column.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }

    std::int64_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::int64_t>(in) * c + ic) * h + iy) * w + ix;
    }

    bool operator==(const Shape&) const = default;

    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

inline Shape scalar_shape() { return Shape{1, 1, 1, 1}; }

} // namespace ecn
