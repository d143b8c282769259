#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vrpanel/recognizer.hpp"
#include "vrpanel/session_log.hpp"

namespace vrpanel {

struct BridgeOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7410;  // 0 picks a free port
    std::filesystem::path log_dir;  // empty: keep logs in memory only
    std::size_t inbox_limit = 50;   // queued UI frames beyond this drop the oldest
};

// HTTP + WebSocket endpoint for the operator UI on one port.
//   GET /panel  panel model JSON
//   GET /state  {"frame", "t", "state", "hash"}
//   /ws         client sends {"type":"input","pos":[x,y,z]|null,"glove":[5]};
//               server sends hello / delta / audio / state_hash messages.
// A tick thread consumes at most one queued UI frame per 40 ms of wall clock
// and drives the same recognizer/logic/log path as a scripted run. Ticks with
// no UI input feed an occluded frame holding the last glove reading.
class UiBridge {
public:
    UiBridge(const PanelModel& model, RecognizerConfig cfg, std::string session_id,
             std::vector<StimulusRule> stimuli, BridgeOptions opts);
    ~UiBridge();
    UiBridge(const UiBridge&) = delete;
    UiBridge& operator=(const UiBridge&) = delete;

    // Binds and starts the network and tick threads. Throws NetworkError.
    void start();
    void stop();
    std::uint16_t port() const;

    std::int64_t ticks() const;
    std::string state_hash() const;
    SessionLog server_log() const;
    SessionLog detection_log() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace vrpanel
