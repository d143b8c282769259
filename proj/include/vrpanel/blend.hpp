#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vrpanel {

enum class ChannelRole { Server, Slave };

// One projector's share of the screen. The render extent [x_lo, x_hi] is the
// channel's core strip widened by `overlap_left` / `overlap_right` at interior
// edges; a neighbor widens by the same amount, so the shared zone at an
// interior boundary is twice the extension wide.
struct ChannelConfig {
    int channel_id = 0;
    ChannelRole role = ChannelRole::Server;
    double x_lo = 0.0;
    double x_hi = 0.0;
    double overlap_left = 0.0;
    double overlap_right = 0.0;

    double core_lo() const { return x_lo + overlap_left; }
    double core_hi() const { return x_hi - overlap_right; }
    // Region where this channel alone has weight 1.
    double exclusive_lo() const { return x_lo + 2.0 * overlap_left; }
    double exclusive_hi() const { return x_hi - 2.0 * overlap_right; }

    friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

// n equal cores across [0, width_m]; each core extended by overlap_m into its
// neighbors. Channel 0 is the server. Throws ValidationError
// ("infeasible overlap") when adjacent shared zones would collide.
std::vector<ChannelConfig> partition_screen(double width_m, int n_channels, double overlap_m);

enum class RampKind { Linear, Gamma };

struct BlendProfile {
    RampKind ramp = RampKind::Linear;
    double gamma = 2.2;
    bool enabled = true;  // false: weight 1 across the whole extent

    static BlendProfile linear() { return {}; }
    static BlendProfile gamma_ramp(double g) { return {RampKind::Gamma, g, true}; }
    static BlendProfile disabled() { return {RampKind::Linear, 1.0, false}; }
};

// Ramp shape on u in [0, 1]; satisfies ramp(u) + ramp(1 - u) = 1.
double blend_ramp(const BlendProfile& profile, double u);

// Light-output weight of a channel at screen position x: 1 in its exclusive
// core, ramped across each shared zone, 0 outside its extent.
double blend_weight(const ChannelConfig& cfg, const BlendProfile& profile, double x);

// Pixel value that makes a projector with the given gamma emit `weight`.
double encode_for_projector(double weight, double gamma);

nlohmann::json channels_to_json(const std::vector<ChannelConfig>& channels);
std::vector<ChannelConfig> channels_from_json(const nlohmann::json& j);

}  // namespace vrpanel
