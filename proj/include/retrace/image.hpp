#pragma once

#include <cstdint>
#include <vector>

namespace retrace {

/// Row-major RGB intensity grid.  Pixels are stored as bytes and exposed as
/// intensities in [0, 1]; byte backing keeps serialization round trips and
/// dataset hashes bit-exact.
struct Image {
    int width = 0;
    int height = 0;
    static constexpr int channels = 3;
    std::vector<std::uint8_t> data;  // size = width * height * channels

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * channels, 0) {}

    std::uint8_t& at(int row, int col, int c) {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + c];
    }
    std::uint8_t at(int row, int col, int c) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + c];
    }
    double intensity(int row, int col, int c) const { return at(row, col, c) / 255.0; }

    friend bool operator==(const Image&, const Image&) = default;
};

inline std::uint8_t quantize_intensity(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(v * 255.0 + 0.5);
}

}  // namespace retrace
