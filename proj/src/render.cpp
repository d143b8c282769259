#include "vrpanel/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vrpanel/errors.hpp"

namespace vrpanel {

namespace {

constexpr double kPixelSnap = 1e-6;

int snap_to_pixels(double value_px, const char* what) {
    const double r = std::round(value_px);
    if (std::abs(value_px - r) > kPixelSnap) {
        std::ostringstream os;
        os << what << " " << value_px << " px does not fall on a pixel boundary";
        throw ValidationError(os.str());
    }
    return static_cast<int>(r);
}

}  // namespace

std::vector<std::uint8_t> Framebuffer::to_bytes() const {
    std::vector<std::uint8_t> out(pixels.size());
    std::transform(pixels.begin(), pixels.end(), out.begin(), [](double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    });
    return out;
}

int RasterSpec::height_px() const { return snap_to_pixels(screen_height_m * pixels_per_meter, "screen height"); }

int RasterSpec::columns_between(double lo, double hi) const {
    return snap_to_pixels((hi - lo) * pixels_per_meter, "channel extent");
}

int RasterSpec::column_of(double x) const { return snap_to_pixels(x * pixels_per_meter, "channel offset"); }

double widget_intensity(const Widget& w, const PanelState& s) {
    switch (w.kind) {
    case WidgetKind::Button:
        return shade::kButton;
    case WidgetKind::Knob:
        return shade::kKnob;
    case WidgetKind::Switch:
        return s.switches.at(w.id).on ? shade::kSwitchOn : shade::kSwitchOff;
    case WidgetKind::Light:
        return s.lights.at(w.id).lit ? shade::kLightLit : shade::kLightDark;
    case WidgetKind::Meter:
        return s.meters.at(w.id).on ? shade::kMeterOn : shade::kMeterOff;
    case WidgetKind::Screen: {
        const auto& sc = s.screens.at(w.id);
        if (!sc.on) return shade::kScreenOff;
        return shade::kScreenBase + shade::kScreenSlideStep * (sc.slide % 8);
    }
    }
    return shade::kBackground;
}

Framebuffer render_channel(const PanelState& state, const PanelModel& model, const ChannelConfig& cfg,
                           const RasterSpec& raster, const BlendProfile& profile) {
    const int width = raster.columns_between(cfg.x_lo, cfg.x_hi);
    const int height = raster.height_px();
    Framebuffer fb(width, height, shade::kBackground);
    const double ppm = raster.pixels_per_meter;
    const int origin = raster.column_of(cfg.x_lo);

    for (const auto& w : model.widgets) {
        const double value = widget_intensity(w, state);
        // Pixels whose centers fall inside the zone. Columns are found on the
        // global raster so every channel rounds a zone edge the same way.
        const int c0 = std::max(0, static_cast<int>(std::ceil(w.zone.x * ppm - 0.5)) - origin);
        const int c1 = std::min(width - 1, static_cast<int>(std::floor((w.zone.x + w.zone.w) * ppm - 0.5)) - origin);
        const double top = raster.screen_height_m - (w.zone.y + w.zone.h);
        const int r0 = std::max(0, static_cast<int>(std::ceil(top * ppm - 0.5)));
        const int r1 = std::min(height - 1, static_cast<int>(std::floor((top + w.zone.h) * ppm - 0.5)));
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) fb.at(c, r) = value;
    }

    for (int c = 0; c < width; ++c) {
        const double weight = blend_weight(cfg, profile, cfg.x_lo + (c + 0.5) / ppm);
        if (weight == 1.0) continue;
        for (int r = 0; r < height; ++r) fb.at(c, r) *= weight;
    }
    return fb;
}

Framebuffer uniform_channel(const ChannelConfig& cfg, const RasterSpec& raster, const BlendProfile& profile,
                            double intensity) {
    const int width = raster.columns_between(cfg.x_lo, cfg.x_hi);
    Framebuffer fb(width, raster.height_px());
    for (int c = 0; c < width; ++c) {
        const double v = intensity * blend_weight(cfg, profile, cfg.x_lo + (c + 0.5) / raster.pixels_per_meter);
        for (int r = 0; r < fb.height; ++r) fb.at(c, r) = v;
    }
    return fb;
}

Framebuffer composite(std::span<const Framebuffer> buffers, std::span<const ChannelConfig> configs,
                      const RasterSpec& raster) {
    if (buffers.size() != configs.size() || buffers.empty())
        throw ValidationError("composite needs one framebuffer per channel config");
    double lo = configs.front().x_lo, hi = configs.front().x_hi;
    for (const auto& c : configs) {
        lo = std::min(lo, c.x_lo);
        hi = std::max(hi, c.x_hi);
    }
    const int height = raster.height_px();
    const int origin = raster.column_of(lo);
    Framebuffer out(raster.columns_between(lo, hi), height);
    for (std::size_t k = 0; k < buffers.size(); ++k) {
        const auto& fb = buffers[k];
        const auto& cfg = configs[k];
        if (fb.height != height || fb.width != raster.columns_between(cfg.x_lo, cfg.x_hi))
            throw ValidationError("framebuffer of channel " + std::to_string(cfg.channel_id) +
                                  " does not match its extent");
        const int offset = raster.column_of(cfg.x_lo) - origin;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < fb.width; ++c) out.at(offset + c, r) += fb.at(c, r);
    }
    return out;
}

Framebuffer core_region(const Framebuffer& fb, const ChannelConfig& cfg, const RasterSpec& raster) {
    const int c0 = raster.columns_between(cfg.x_lo, cfg.exclusive_lo());
    const int c1 = raster.columns_between(cfg.x_lo, cfg.exclusive_hi());
    Framebuffer out(c1 - c0, fb.height);
    for (int r = 0; r < fb.height; ++r)
        for (int c = c0; c < c1; ++c) out.at(c - c0, r) = fb.at(c, r);
    return out;
}

void write_pgm(const Framebuffer& fb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Runtime, "cannot write " + path.string());
    out << "P5\n" << fb.width << ' ' << fb.height << "\n255\n";
    const auto bytes = fb.to_bytes();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string magic;
    int maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 255 || width <= 0 || height <= 0)
        throw ParseError(path.string() + " is not an 8-bit binary PGM");
    in.get();
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw ParseError(path.string() + " is truncated");
    return bytes;
}

}  // namespace vrpanel
