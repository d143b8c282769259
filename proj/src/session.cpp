#include "vrpanel/session.hpp"

#include <cstdio>

namespace vrpanel {

std::string state_hash(const PanelState& state) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : state_to_json(state).dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SessionRunner::SessionRunner(const PanelModel& model, RecognizerConfig cfg, std::string session_id,
                             std::vector<StimulusRule> stimuli)
    : model_(model),
      recognizer_(model, cfg),
      engine_(model),
      stimuli_(std::move(stimuli)),
      detection_{session_id, LogSide::Detection, {}},
      server_{session_id, LogSide::Server, {}} {}

void SessionRunner::write_logs_to(const std::filesystem::path& dir) {
    detection_writer_ = std::make_unique<LogWriter>(dir / (detection_.session_id + ".detection.jsonl"),
                                                    detection_.session_id, LogSide::Detection);
    server_writer_ = std::make_unique<LogWriter>(dir / (server_.session_id + ".server.jsonl"), server_.session_id,
                                                 LogSide::Server);
    for (const auto& r : detection_.records) detection_writer_->append(r);
    for (const auto& r : server_.records) server_writer_->append(r);
}

void SessionRunner::log_detection(LogRecord r) {
    if (detection_writer_) detection_writer_->append(r);
    detection_.append(std::move(r));
}

void SessionRunner::log_server(LogRecord r) {
    if (server_writer_) server_writer_->append(r);
    server_.append(std::move(r));
}

void SessionRunner::emit(StateDelta d, std::vector<StateDelta>& out) {
    const double t = d.time;
    auto stimuli = stimuli_.observe(d);
    log_server({t, d});
    for (auto& s : stimuli) log_server({t, std::move(s)});
    deltas_.push_back(d);
    out.push_back(std::move(d));
}

void SessionRunner::start() { emit(engine_.start(), pending_); }

FrameUpdate SessionRunner::step(const InputFrame& frame) {
    FrameUpdate update{frame.time, std::move(pending_)};
    pending_.clear();

    const auto events = recognizer_.step(frame);
    log_detection({frame.time, frame});
    for (const auto& ev : events) {
        log_detection({ev.time, ev});
        operations_.push_back(ev);
    }

    // Same convention as run_session: a tick is recorded whenever time moves.
    if (frame.time > engine_.state().clock) emit(engine_.tick(frame.time), update.deltas);
    for (const auto& ev : events) emit(engine_.apply(ev), update.deltas);
    last_time_ = frame.time;
    return update;
}

void SessionRunner::note(const std::string& text) {
    const double t = server_.records.empty() ? last_time_ : std::max(last_time_, server_.records.back().time);
    log_server({t, Note{text}});
}

// ---- ChannelRenderer ----

ChannelRenderer::ChannelRenderer(const PanelModel& model, ChannelConfig cfg, RasterSpec raster, BlendProfile blend,
                                 std::filesystem::path out_dir, int dump_every)
    : model_(model),
      cfg_(cfg),
      raster_(raster),
      blend_(blend),
      out_dir_(std::move(out_dir)),
      dump_every_(dump_every),
      state_(initial_state(model)) {}

void ChannelRenderer::on_frame(std::int64_t frame, const FrameUpdate& update) {
    for (const auto& d : update.deltas) state_ = apply_delta(std::move(state_), d);
    frames_ = frame + 1;
    if (dump_every_ > 0 && frame % dump_every_ == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "ch%d_f%06lld.pgm", cfg_.channel_id, static_cast<long long>(frame));
        std::filesystem::create_directories(out_dir_);
        write_pgm(render(), out_dir_ / name);
    }
}

Framebuffer ChannelRenderer::render() const { return render_channel(state_, model_, cfg_, raster_, blend_); }

void ChannelRenderer::finish() {
    std::filesystem::create_directories(out_dir_);
    const Framebuffer fb = render();
    write_pgm(fb, final_path(out_dir_, cfg_.channel_id));
    write_pgm(core_region(fb, cfg_, raster_), core_path(out_dir_, cfg_.channel_id));
}

std::filesystem::path ChannelRenderer::final_path(const std::filesystem::path& dir, int channel_id) {
    return dir / ("ch" + std::to_string(channel_id) + "_final.pgm");
}

std::filesystem::path ChannelRenderer::core_path(const std::filesystem::path& dir, int channel_id) {
    return dir / ("ch" + std::to_string(channel_id) + "_final_core.pgm");
}

ServerHooks session_hooks(SessionRunner& runner, const std::vector<InputFrame>& trace, ChannelRenderer* local) {
    ServerHooks hooks;
    hooks.produce = [&runner, &trace](std::int64_t k) -> std::optional<FrameUpdate> {
        if (k >= static_cast<std::int64_t>(trace.size())) return std::nullopt;
        return runner.step(trace[static_cast<std::size_t>(k)]);
    };
    hooks.render = [local](std::int64_t k, const FrameUpdate& u) {
        if (local) local->on_frame(k, u);
    };
    return hooks;
}

}  // namespace vrpanel
