#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fp/geometry.hpp"

namespace fp {

// 8-bit grayscale raster, row-major, 500 dpi semantics by default.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
    int dpi = 500;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t size() const { return data.size(); }
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : data) n += v != 0;
        return n;
    }
};

struct QualityMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // each value in [0, 1]

    QualityMap() = default;
    QualityMap(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Per-pixel ridge orientation in radians, pi-periodic representatives in
// [0, pi). Invalid pixels are flagged in `validity`; their angle entries are
// well-defined numbers (0), never NaN.
struct OrientationField {
    int width = 0;
    int height = 0;
    std::vector<double> angles;
    BinaryMask validity;

    OrientationField() = default;
    OrientationField(int w, int h)
        : width(w), height(h), angles(static_cast<std::size_t>(w) * h, 0.0), validity(w, h, false) {}

    double angle(int x, int y) const { return angles[static_cast<std::size_t>(y) * width + x]; }
    double& angle(int x, int y) { return angles[static_cast<std::size_t>(y) * width + x]; }
    bool valid(int x, int y) const { return validity.at(x, y); }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

enum class MinutiaKind { RidgeEnding, Bifurcation };

struct Minutia {
    double x = 0.0;
    double y = 0.0;
    double direction = 0.0;  // radians in [0, 2pi)
    MinutiaKind kind = MinutiaKind::RidgeEnding;
    double reliability = 0.0;  // in [0, 1]
};

}  // namespace fp
