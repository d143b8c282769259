#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vrpanel/blend.hpp"
#include "vrpanel/panel_model.hpp"

namespace vrpanel {

// Grayscale light intensities, row-major, row 0 at the top of the screen.
struct Framebuffer {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Framebuffer() = default;
    Framebuffer(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    // 8-bit quantization used for PGM dumps.
    std::vector<std::uint8_t> to_bytes() const;

    friend bool operator==(const Framebuffer&, const Framebuffer&) = default;
};

inline constexpr double kDefaultPixelsPerMeter = 150.0;

// Uniform raster scale shared by all channels of a session.
struct RasterSpec {
    double pixels_per_meter = kDefaultPixelsPerMeter;
    double screen_height_m = 2.0;

    int height_px() const;
    // Pixel count spanning [lo, hi]; throws ValidationError unless the span
    // lands on whole pixels.
    int columns_between(double lo, double hi) const;
    int column_of(double x) const;  // x must lie on a pixel boundary
};

// Widget intensities.
namespace shade {
inline constexpr double kBackground = 0.05;
inline constexpr double kButton = 0.5;
inline constexpr double kKnob = 0.4;
inline constexpr double kSwitchOn = 0.7;
inline constexpr double kSwitchOff = 0.3;
inline constexpr double kLightLit = 1.0;
inline constexpr double kLightDark = 0.1;
inline constexpr double kMeterOn = 0.8;
inline constexpr double kMeterOff = 0.1;
inline constexpr double kScreenOff = 0.1;
inline constexpr double kScreenBase = 0.3;
inline constexpr double kScreenSlideStep = 0.05;
}  // namespace shade

double widget_intensity(const Widget& w, const PanelState& state);

// Deterministic raster of the channel's extent, weighted per column by the
// channel's blend weight.
Framebuffer render_channel(const PanelState& state, const PanelModel& model, const ChannelConfig& cfg,
                           const RasterSpec& raster, const BlendProfile& profile = {});

// Constant-intensity channel image (pre-blend) for seam checks.
Framebuffer uniform_channel(const ChannelConfig& cfg, const RasterSpec& raster, const BlendProfile& profile,
                            double intensity);

// Sums the channel buffers onto the full-screen raster. Throws ValidationError
// on mismatched sizes or extents.
Framebuffer composite(std::span<const Framebuffer> buffers, std::span<const ChannelConfig> configs,
                      const RasterSpec& raster);

// Columns of a channel buffer lying inside its exclusive core.
Framebuffer core_region(const Framebuffer& fb, const ChannelConfig& cfg, const RasterSpec& raster);

void write_pgm(const Framebuffer& fb, const std::filesystem::path& path);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height);

}  // namespace vrpanel
