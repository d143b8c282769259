#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vrpanel/logic_engine.hpp"

namespace vrpanel {

// Server -> all channels: everything that happened in frame `frame_id`.
struct StateBroadcast {
    std::int64_t frame_id = 0;
    double time = 0.0;
    std::vector<StateDelta> deltas;
    friend bool operator==(const StateBroadcast&, const StateBroadcast&) = default;
};

// Channel -> server: frame rendered.
struct FrameDone {
    std::int64_t frame_id = 0;
    int channel_id = 0;
    friend bool operator==(const FrameDone&, const FrameDone&) = default;
};

// Server -> all channels: every channel finished `frame_id`.
struct Advance {
    std::int64_t frame_id = 0;
    friend bool operator==(const Advance&, const Advance&) = default;
};

struct Hello {
    int channel_id = 0;
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct Shutdown {
    std::int64_t frame_id = 0;  // frames completed
    friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

using FrameMessage = std::variant<StateBroadcast, FrameDone, Advance, Hello, Shutdown>;

std::string message_type(const FrameMessage& m);

// {"type", "frame_id", "channel_id"?, "t"?, "delta"?}
nlohmann::json message_to_json(const FrameMessage& m);
FrameMessage message_from_json(const nlohmann::json& j);  // throws ProtocolViolation

// 4-byte big-endian length followed by the UTF-8 JSON body.
std::string encode_frame(const FrameMessage& m);
// Extracts one complete frame from the front of `buffer`, if present.
std::optional<FrameMessage> decode_frame(std::string& buffer);

inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

}  // namespace vrpanel
