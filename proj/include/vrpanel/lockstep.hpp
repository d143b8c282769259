#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "vrpanel/protocol.hpp"
#include "vrpanel/transport.hpp"

namespace vrpanel {

// Server-side barrier bookkeeping. A frame is begun with a broadcast and
// released with Advance once every channel (server included) reported done.
class ServerProtocol {
public:
    explicit ServerProtocol(std::set<int> slave_ids);

    // Returns the broadcast for the next frame; throws ProtocolViolation when
    // the previous frame has not been advanced.
    StateBroadcast begin_frame(std::int64_t frame_id, double time, std::vector<StateDelta> deltas);
    // Marks a channel done; true once the whole frame is complete.
    bool mark_done(int channel_id, std::int64_t frame_id);
    Advance advance();

    std::int64_t current_frame() const { return frame_; }
    bool frame_open() const { return open_; }
    // Slave channels that have not reported the open frame.
    std::vector<int> pending() const;

private:
    std::set<int> slaves_;
    std::set<int> done_;
    std::int64_t frame_ = -1;
    bool open_ = false;
};

// Slave-side validation of the message sequence
//   StateBroadcast(k) -> [render] -> FrameDone(k) -> Advance(k) -> StateBroadcast(k+1) ...
class SlaveProtocol {
public:
    explicit SlaveProtocol(int channel_id) : channel_id_(channel_id) {}

    enum class Phase { AwaitState, Rendering, AwaitAdvance, Finished };

    // Validates an incoming message; throws ProtocolViolation.
    void on_message(const FrameMessage& m);
    FrameDone rendered();

    Phase phase() const { return phase_; }
    std::int64_t frame() const { return frame_; }
    int channel_id() const { return channel_id_; }

private:
    int channel_id_;
    Phase phase_ = Phase::AwaitState;
    std::int64_t frame_ = -1;
};

// Completed-frame counters of all channels; tracks the worst skew observed.
class LockstepMonitor {
public:
    explicit LockstepMonitor(int channels);

    void frame_completed(int channel, std::int64_t frame, double at_seconds);

    std::int64_t max_skew() const;
    std::int64_t completed(int channel) const;
    // Completion times of one channel's frames.
    std::vector<double> completion_times(int channel) const;

private:
    mutable std::mutex mu_;
    std::vector<std::int64_t> completed_;
    std::vector<std::vector<double>> times_;
    std::int64_t max_skew_ = 0;
};

struct FrameUpdate {
    double time = 0.0;
    std::vector<StateDelta> deltas;
};

struct LockstepOptions {
    Millis timeout{5000};
    // Start frame k no earlier than k ticks after frame 0; off = as fast as
    // the barrier allows.
    bool pace = false;
    double tick_s = 0.040;
};

struct ServerHooks {
    // Next frame's content; nullopt ends the session.
    std::function<std::optional<FrameUpdate>(std::int64_t frame)> produce;
    // Renders the server's own channel.
    std::function<void(std::int64_t frame, const FrameUpdate&)> render;
};

// Server side of the lockstep loop over already-connected slave links.
class LockstepServer {
public:
    LockstepServer(std::vector<std::unique_ptr<Connection>> slaves, LockstepOptions opts = {},
                   LockstepMonitor* monitor = nullptr);

    // Waits for every slave's Hello. Throws ChannelTimeout / ProtocolViolation.
    void handshake();
    // Runs frames until `produce` returns nullopt or `stop` is raised, then
    // broadcasts Shutdown. Returns the number of frames completed.
    std::int64_t run(const ServerHooks& hooks, const std::atomic<bool>* stop = nullptr);

    const std::vector<int>& channel_ids() const { return ids_; }

private:
    void broadcast(const FrameMessage& m);
    void shutdown_all(std::int64_t frames);

    std::vector<std::unique_ptr<Connection>> links_;
    std::vector<int> ids_;  // channel id per link
    LockstepOptions opts_;
    LockstepMonitor* monitor_;
};

// Slave side: Hello, then render every broadcast frame until Shutdown.
// Returns the number of frames rendered.
std::int64_t run_slave(Connection& link, int channel_id,
                       const std::function<void(std::int64_t frame, const FrameUpdate&)>& render,
                       Millis timeout = Millis{10000}, LockstepMonitor* monitor = nullptr);

// ---- deterministic discrete-event model of the same protocol ----

struct SimulationSpec {
    int channels = 3;
    std::int64_t frames = 500;
    // Render time of `channel` for `frame`, seconds.
    std::function<double(int channel, std::int64_t frame)> render_latency;
    double message_latency_s = 0.0005;
    bool pace = true;
    double tick_s = 0.040;
};

struct SimulationResult {
    std::int64_t max_skew = 0;
    std::int64_t frames = 0;
    double duration_s = 0.0;
    // Frames per second over the second half of the run.
    double steady_rate_hz = 0.0;
    std::vector<std::vector<double>> completion_times;  // per channel
};

// Runs ServerProtocol/SlaveProtocol under virtual time with the given
// latencies; no wall-clock waiting.
SimulationResult simulate_lockstep(const SimulationSpec& spec);

}  // namespace vrpanel
