#include "vrpanel/protocol.hpp"

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

std::string message_type(const FrameMessage& m) {
    return std::visit(
        [](const auto& msg) -> std::string {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, StateBroadcast>) return "state";
            else if constexpr (std::is_same_v<T, FrameDone>) return "done";
            else if constexpr (std::is_same_v<T, Advance>) return "advance";
            else if constexpr (std::is_same_v<T, Hello>) return "hello";
            else return "shutdown";
        },
        m);
}

json message_to_json(const FrameMessage& m) {
    json j = {{"type", message_type(m)}};
    std::visit(
        [&](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, StateBroadcast>) {
                j["frame_id"] = msg.frame_id;
                j["t"] = msg.time;
                json deltas = json::array();
                for (const auto& d : msg.deltas) deltas.push_back(delta_to_json(d));
                j["delta"] = std::move(deltas);
            } else if constexpr (std::is_same_v<T, FrameDone>) {
                j["frame_id"] = msg.frame_id;
                j["channel_id"] = msg.channel_id;
            } else if constexpr (std::is_same_v<T, Advance>) {
                j["frame_id"] = msg.frame_id;
            } else if constexpr (std::is_same_v<T, Hello>) {
                j["frame_id"] = 0;
                j["channel_id"] = msg.channel_id;
            } else {
                j["frame_id"] = msg.frame_id;
            }
        },
        m);
    return j;
}

FrameMessage message_from_json(const json& j) {
    try {
        const std::string type = j.at("type").get<std::string>();
        if (type == "state") {
            StateBroadcast b{j.at("frame_id").get<std::int64_t>(), j.value("t", 0.0), {}};
            for (const auto& d : j.at("delta")) b.deltas.push_back(delta_from_json(d));
            return b;
        }
        if (type == "done") return FrameDone{j.at("frame_id").get<std::int64_t>(), j.at("channel_id").get<int>()};
        if (type == "advance") return Advance{j.at("frame_id").get<std::int64_t>()};
        if (type == "hello") return Hello{j.at("channel_id").get<int>()};
        if (type == "shutdown") return Shutdown{j.value("frame_id", std::int64_t{0})};
        throw ProtocolViolation("unknown message type '" + type + "'");
    } catch (const json::exception& e) {
        throw ProtocolViolation(std::string("malformed message: ") + e.what());
    } catch (const ParseError& e) {
        throw ProtocolViolation(std::string("malformed message: ") + e.what());
    }
}

std::string encode_frame(const FrameMessage& m) {
    const std::string body = message_to_json(m).dump();
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out += body;
    return out;
}

std::optional<FrameMessage> decode_frame(std::string& buffer) {
    if (buffer.size() < 4) return std::nullopt;
    const auto byte = [&](int k) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[k])); };
    const std::uint32_t n = byte(0) << 24 | byte(1) << 16 | byte(2) << 8 | byte(3);
    if (n > kMaxFrameBytes) throw ProtocolViolation("frame length " + std::to_string(n) + " exceeds limit");
    if (buffer.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    const std::string body = buffer.substr(4, n);
    buffer.erase(0, 4 + static_cast<std::size_t>(n));
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolViolation(std::string("frame is not valid JSON: ") + e.what());
    }
    return message_from_json(j);
}

}  // namespace vrpanel
