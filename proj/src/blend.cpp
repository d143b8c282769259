#include "vrpanel/blend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

std::vector<ChannelConfig> partition_screen(double width_m, int n_channels, double overlap_m) {
    if (!(width_m > 0.0)) throw ValidationError("screen width must be positive");
    if (n_channels < 1) throw ValidationError("need at least one channel");
    if (!(overlap_m >= 0.0)) throw ValidationError("overlap must be >= 0");
    const double core = width_m / n_channels;
    if (n_channels > 1 && 2.0 * overlap_m > core) {
        std::ostringstream os;
        os << "infeasible overlap: " << overlap_m << " m per side leaves no room in " << core
           << " m channel cores";
        throw ValidationError(os.str());
    }

    std::vector<ChannelConfig> out;
    for (int c = 0; c < n_channels; ++c) {
        ChannelConfig cfg;
        cfg.channel_id = c;
        cfg.role = c == 0 ? ChannelRole::Server : ChannelRole::Slave;
        cfg.overlap_left = c > 0 ? overlap_m : 0.0;
        cfg.overlap_right = c + 1 < n_channels ? overlap_m : 0.0;
        const double lo = c == 0 ? 0.0 : width_m * c / n_channels;
        const double hi = c + 1 == n_channels ? width_m : width_m * (c + 1) / n_channels;
        cfg.x_lo = lo - cfg.overlap_left;
        cfg.x_hi = hi + cfg.overlap_right;
        out.push_back(cfg);
    }
    return out;
}

double blend_ramp(const BlendProfile& profile, double u) {
    u = std::clamp(u, 0.0, 1.0);
    if (profile.ramp == RampKind::Linear) return u;
    // Symmetric power curve: steeper shoulders for gamma-corrected projectors.
    if (u < 0.5) return 0.5 * std::pow(2.0 * u, profile.gamma);
    return 1.0 - 0.5 * std::pow(2.0 * (1.0 - u), profile.gamma);
}

double blend_weight(const ChannelConfig& cfg, const BlendProfile& profile, double x) {
    if (x < cfg.x_lo || x > cfg.x_hi) return 0.0;
    if (!profile.enabled) return 1.0;
    double w = 1.0;
    if (cfg.overlap_left > 0.0 && x < cfg.exclusive_lo())
        w = std::min(w, blend_ramp(profile, (x - cfg.x_lo) / (2.0 * cfg.overlap_left)));
    if (cfg.overlap_right > 0.0 && x > cfg.exclusive_hi())
        w = std::min(w, blend_ramp(profile, (cfg.x_hi - x) / (2.0 * cfg.overlap_right)));
    return w;
}

double encode_for_projector(double weight, double gamma) {
    return std::pow(std::clamp(weight, 0.0, 1.0), 1.0 / gamma);
}

json channels_to_json(const std::vector<ChannelConfig>& channels) {
    json out = json::array();
    for (const auto& c : channels)
        out.push_back({{"channel_id", c.channel_id},
                       {"role", c.role == ChannelRole::Server ? "server" : "slave"},
                       {"x_range", {c.x_lo, c.x_hi}},
                       {"overlaps", {c.overlap_left, c.overlap_right}}});
    return out;
}

std::vector<ChannelConfig> channels_from_json(const json& j) {
    std::vector<ChannelConfig> out;
    try {
        for (const auto& cj : j) {
            ChannelConfig c;
            c.channel_id = cj.at("channel_id").get<int>();
            c.role = cj.at("role").get<std::string>() == "server" ? ChannelRole::Server : ChannelRole::Slave;
            c.x_lo = cj.at("x_range").at(0).get<double>();
            c.x_hi = cj.at("x_range").at(1).get<double>();
            c.overlap_left = cj.at("overlaps").at(0).get<double>();
            c.overlap_right = cj.at("overlaps").at(1).get<double>();
            if (!(c.x_lo < c.x_hi)) throw ValidationError("channel " + std::to_string(c.channel_id) + ": empty x range");
            out.push_back(c);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("channel layout: ") + e.what());
    }
    return out;
}

}  // namespace vrpanel
