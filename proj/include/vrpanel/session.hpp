#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vrpanel/blend.hpp"
#include "vrpanel/lockstep.hpp"
#include "vrpanel/logic_engine.hpp"
#include "vrpanel/recognizer.hpp"
#include "vrpanel/render.hpp"
#include "vrpanel/session_log.hpp"

namespace vrpanel {

// FNV-1a 64 over the compact JSON of the state, as 16 hex digits. The UI
// computes the same digest over its mirror.
std::string state_hash(const PanelState& state);

// Recognizer + logic engine + both session logs. Per input frame: recognize,
// tick the engine to the frame time, apply the recognized operations.
class SessionRunner {
public:
    SessionRunner(const PanelModel& model, RecognizerConfig cfg, std::string session_id,
                  std::vector<StimulusRule> stimuli = {});

    // Mirrors both logs to <dir>/<session_id>.{detection,server}.jsonl.
    void write_logs_to(const std::filesystem::path& dir);

    // Queues the session-start delta; it leads the next frame's update.
    void start();
    FrameUpdate step(const InputFrame& frame);
    void note(const std::string& text);

    const PanelState& state() const { return engine_.state(); }
    const PanelModel& model() const { return model_; }
    const SessionLog& detection_log() const { return detection_; }
    const SessionLog& server_log() const { return server_; }
    const std::vector<StateDelta>& deltas() const { return deltas_; }
    const std::vector<OperationEvent>& operations() const { return operations_; }

private:
    void log_detection(LogRecord r);
    void log_server(LogRecord r);
    void emit(StateDelta d, std::vector<StateDelta>& out);

    const PanelModel& model_;
    Recognizer recognizer_;
    LogicEngine engine_;
    StimulusDetector stimuli_;
    SessionLog detection_;
    SessionLog server_;
    std::unique_ptr<LogWriter> detection_writer_;
    std::unique_ptr<LogWriter> server_writer_;
    std::vector<StateDelta> pending_;
    std::vector<StateDelta> deltas_;
    std::vector<OperationEvent> operations_;
    double last_time_ = 0.0;
};

// One channel's view: folds received deltas and renders its strip.
class ChannelRenderer {
public:
    // `dump_every` > 0 also writes every n-th frame.
    ChannelRenderer(const PanelModel& model, ChannelConfig cfg, RasterSpec raster, BlendProfile blend,
                    std::filesystem::path out_dir, int dump_every = 0);

    void on_frame(std::int64_t frame, const FrameUpdate& update);
    // Writes ch<id>_final.pgm and ch<id>_final_core.pgm.
    void finish();

    Framebuffer render() const;
    const PanelState& state() const { return state_; }
    const ChannelConfig& config() const { return cfg_; }
    std::int64_t frames() const { return frames_; }

    static std::filesystem::path final_path(const std::filesystem::path& dir, int channel_id);
    static std::filesystem::path core_path(const std::filesystem::path& dir, int channel_id);

private:
    const PanelModel& model_;
    ChannelConfig cfg_;
    RasterSpec raster_;
    BlendProfile blend_;
    std::filesystem::path out_dir_;
    int dump_every_;
    PanelState state_;
    std::int64_t frames_ = 0;
};

// Feeds the trace frame by frame into the lockstep loop; frame k carries the
// deltas of input frame k (frame 0 also the session start).
ServerHooks session_hooks(SessionRunner& runner, const std::vector<InputFrame>& trace, ChannelRenderer* local);

}  // namespace vrpanel
