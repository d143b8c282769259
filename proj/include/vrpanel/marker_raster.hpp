#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vrpanel/geometry.hpp"

namespace vrpanel {

// 8-bit grayscale CCD frame.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Dark frame with one bright anti-aliased disk, as seen through a stopped-down
// aperture where only the active marker registers.
GrayImage render_marker_frame(const PixelCoord& center, double radius_px,
                              int width = kSensorWidth, int height = kSensorHeight);

// Intensity-weighted centroid of pixels above `threshold`; nullopt when the
// frame has no bright pixels.
std::optional<PixelCoord> detect_marker(const GrayImage& img, std::uint8_t threshold = 32);

}  // namespace vrpanel
