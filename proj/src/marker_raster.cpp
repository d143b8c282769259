#include "vrpanel/marker_raster.hpp"

#include <algorithm>
#include <cmath>

namespace vrpanel {

GrayImage render_marker_frame(const PixelCoord& center, double radius_px, int width, int height) {
    constexpr int kSuper = 4;
    GrayImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
    const int x0 = std::max(0, static_cast<int>(std::floor(center.i - radius_px - 1)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(center.i + radius_px + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(center.j - radius_px - 1)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(center.j + radius_px + 1)));
    const double r2 = radius_px * radius_px;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            // Pixel centers sit on integer coordinates.
            int covered = 0;
            for (int sy = 0; sy < kSuper; ++sy) {
                for (int sx = 0; sx < kSuper; ++sx) {
                    const double px = x + (sx + 0.5) / kSuper - 0.5 - center.i;
                    const double py = y + (sy + 0.5) / kSuper - 0.5 - center.j;
                    if (px * px + py * py <= r2) ++covered;
                }
            }
            img.pixels[static_cast<std::size_t>(y) * width + x] =
                static_cast<std::uint8_t>(std::lround(255.0 * covered / (kSuper * kSuper)));
        }
    }
    return img;
}

std::optional<PixelCoord> detect_marker(const GrayImage& img, std::uint8_t threshold) {
    double sum = 0.0, si = 0.0, sj = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t v = img.at(x, y);
            if (v < threshold) continue;
            sum += v;
            si += v * static_cast<double>(x);
            sj += v * static_cast<double>(y);
        }
    }
    if (sum == 0.0) return std::nullopt;
    return PixelCoord{si / sum, sj / sum};
}

}  // namespace vrpanel
