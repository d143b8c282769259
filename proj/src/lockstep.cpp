#include "vrpanel/lockstep.hpp"

#include <algorithm>
#include <queue>
#include <sstream>
#include <thread>

#include "vrpanel/errors.hpp"

namespace vrpanel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

// ---- ServerProtocol ----

ServerProtocol::ServerProtocol(std::set<int> slave_ids) : slaves_(std::move(slave_ids)) {
    if (slaves_.count(0)) throw ProtocolViolation("channel 0 is reserved for the server");
}

StateBroadcast ServerProtocol::begin_frame(std::int64_t frame_id, double time, std::vector<StateDelta> deltas) {
    if (open_)
        throw ProtocolViolation("frame " + std::to_string(frame_id) + " begun before frame " +
                                std::to_string(frame_) + " was advanced");
    if (frame_id != frame_ + 1)
        throw ProtocolViolation("frame " + std::to_string(frame_id) + " does not follow frame " +
                                std::to_string(frame_));
    open_ = true;
    frame_ = frame_id;
    done_.clear();
    return {frame_id, time, std::move(deltas)};
}

bool ServerProtocol::mark_done(int channel_id, std::int64_t frame_id) {
    if (!open_ || frame_id != frame_)
        throw ProtocolViolation("channel " + std::to_string(channel_id) + " reported frame " +
                                std::to_string(frame_id) + " while frame " + std::to_string(frame_) +
                                (open_ ? " is open" : " is closed"));
    if (channel_id != 0 && !slaves_.count(channel_id))
        throw ProtocolViolation("done from unknown channel " + std::to_string(channel_id));
    if (!done_.insert(channel_id).second)
        throw ProtocolViolation("channel " + std::to_string(channel_id) + " reported frame " +
                                std::to_string(frame_id) + " twice");
    return done_.size() == slaves_.size() + 1;
}

Advance ServerProtocol::advance() {
    if (!open_ || done_.size() != slaves_.size() + 1)
        throw ProtocolViolation("advance of frame " + std::to_string(frame_) + " before every channel finished");
    open_ = false;
    return {frame_};
}

std::vector<int> ServerProtocol::pending() const {
    std::vector<int> out;
    for (int id : slaves_)
        if (!done_.count(id)) out.push_back(id);
    return out;
}

// ---- SlaveProtocol ----

void SlaveProtocol::on_message(const FrameMessage& m) {
    const std::string who = "channel " + std::to_string(channel_id_) + ": ";
    if (const auto* b = std::get_if<StateBroadcast>(&m)) {
        if (phase_ != Phase::AwaitState)
            throw ProtocolViolation(who + "state for frame " + std::to_string(b->frame_id) +
                                    " arrived before frame " + std::to_string(frame_) + " was advanced");
        if (b->frame_id != frame_ + 1)
            throw ProtocolViolation(who + "out-of-order frame_id " + std::to_string(b->frame_id) +
                                    ", expected " + std::to_string(frame_ + 1));
        frame_ = b->frame_id;
        phase_ = Phase::Rendering;
    } else if (const auto* a = std::get_if<Advance>(&m)) {
        if (phase_ != Phase::AwaitAdvance || a->frame_id != frame_)
            throw ProtocolViolation(who + "unexpected advance of frame " + std::to_string(a->frame_id));
        phase_ = Phase::AwaitState;
    } else if (std::holds_alternative<Shutdown>(m)) {
        phase_ = Phase::Finished;
    } else {
        throw ProtocolViolation(who + "unexpected '" + message_type(m) + "' message");
    }
}

FrameDone SlaveProtocol::rendered() {
    if (phase_ != Phase::Rendering) throw ProtocolViolation("rendered() outside a frame");
    phase_ = Phase::AwaitAdvance;
    return {frame_, channel_id_};
}

// ---- LockstepMonitor ----

LockstepMonitor::LockstepMonitor(int channels)
    : completed_(static_cast<std::size_t>(channels), 0), times_(static_cast<std::size_t>(channels)) {}

void LockstepMonitor::frame_completed(int channel, std::int64_t frame, double at_seconds) {
    std::lock_guard lock(mu_);
    auto& count = completed_.at(static_cast<std::size_t>(channel));
    count = std::max(count, frame + 1);
    times_[static_cast<std::size_t>(channel)].push_back(at_seconds);
    const auto [lo, hi] = std::minmax_element(completed_.begin(), completed_.end());
    max_skew_ = std::max(max_skew_, *hi - *lo);
}

std::int64_t LockstepMonitor::max_skew() const {
    std::lock_guard lock(mu_);
    return max_skew_;
}

std::int64_t LockstepMonitor::completed(int channel) const {
    std::lock_guard lock(mu_);
    return completed_.at(static_cast<std::size_t>(channel));
}

std::vector<double> LockstepMonitor::completion_times(int channel) const {
    std::lock_guard lock(mu_);
    return times_.at(static_cast<std::size_t>(channel));
}

// ---- LockstepServer ----

LockstepServer::LockstepServer(std::vector<std::unique_ptr<Connection>> slaves, LockstepOptions opts,
                               LockstepMonitor* monitor)
    : links_(std::move(slaves)), opts_(opts), monitor_(monitor) {}

void LockstepServer::handshake() {
    ids_.assign(links_.size(), -1);
    std::set<int> seen;
    for (std::size_t i = 0; i < links_.size(); ++i) {
        std::optional<FrameMessage> msg;
        try {
            msg = links_[i]->receive(opts_.timeout);
        } catch (const NetworkError& e) {
            throw ChannelTimeout(-1, "connection " + std::to_string(i) + " closed before Hello: " + e.what());
        }
        if (!msg) throw ChannelTimeout(-1, "connection " + std::to_string(i) + " sent no Hello");
        const auto* hello = std::get_if<Hello>(&*msg);
        if (!hello) throw ProtocolViolation("expected Hello, got '" + message_type(*msg) + "'");
        if (hello->channel_id <= 0 || !seen.insert(hello->channel_id).second)
            throw ProtocolViolation("invalid or duplicate channel id " + std::to_string(hello->channel_id));
        ids_[i] = hello->channel_id;
    }
}

void LockstepServer::broadcast(const FrameMessage& m) {
    for (std::size_t i = 0; i < links_.size(); ++i) {
        try {
            links_[i]->send(m);
        } catch (const NetworkError& e) {
            throw ChannelTimeout(ids_[i], "channel " + std::to_string(ids_[i]) + " unreachable: " + e.what());
        }
    }
}

void LockstepServer::shutdown_all(std::int64_t frames) {
    for (auto& link : links_) {
        try {
            link->send(Shutdown{frames});
        } catch (const NetworkError&) {
        }
    }
}

std::int64_t LockstepServer::run(const ServerHooks& hooks, const std::atomic<bool>* stop) {
    if (ids_.size() != links_.size()) handshake();
    ServerProtocol proto(std::set<int>(ids_.begin(), ids_.end()));
    const auto start = Clock::now();
    std::int64_t frames = 0;

    try {
        for (std::int64_t k = 0;; ++k) {
            if (stop && stop->load()) break;
            auto update = hooks.produce(k);
            if (!update) break;
            if (opts_.pace)
                std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                          std::chrono::duration<double>(opts_.tick_s * k)));
            const auto frame_start = Clock::now();
            broadcast(proto.begin_frame(k, update->time, update->deltas));

            if (hooks.render) hooks.render(k, *update);
            if (monitor_) monitor_->frame_completed(0, k, seconds_since(start));
            bool complete = proto.mark_done(0, k);

            const auto deadline = frame_start + opts_.timeout;
            for (std::size_t i = 0; i < links_.size() && !complete; ++i) {
                const int id = ids_[i];
                const auto is_pending = [&] {
                    const auto p = proto.pending();
                    return std::find(p.begin(), p.end(), id) != p.end();
                };
                while (is_pending()) {
                    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
                    std::optional<FrameMessage> msg;
                    try {
                        msg = links_[i]->receive(std::max(left, Millis{0}));
                    } catch (const NetworkError&) {
                        throw ChannelTimeout(id, "channel " + std::to_string(id) + " disconnected during frame " +
                                                     std::to_string(k));
                    }
                    if (!msg) {
                        std::ostringstream os;
                        os << "channel " << id << " stalled: no FrameDone for frame " << k << " within "
                           << opts_.timeout.count() << " ms";
                        throw ChannelTimeout(id, os.str());
                    }
                    const auto* done = std::get_if<FrameDone>(&*msg);
                    if (!done) throw ProtocolViolation("expected FrameDone from channel " + std::to_string(id));
                    if (done->channel_id != id)
                        throw ProtocolViolation("connection of channel " + std::to_string(id) +
                                                " reported as channel " + std::to_string(done->channel_id));
                    complete = proto.mark_done(done->channel_id, done->frame_id);
                }
            }
            broadcast(proto.advance());
            frames = k + 1;
        }
    } catch (...) {
        shutdown_all(frames);
        throw;
    }
    shutdown_all(frames);
    return frames;
}

std::int64_t run_slave(Connection& link, int channel_id,
                       const std::function<void(std::int64_t, const FrameUpdate&)>& render, Millis timeout,
                       LockstepMonitor* monitor) {
    const auto start = Clock::now();
    link.send(Hello{channel_id});
    SlaveProtocol proto(channel_id);
    std::int64_t rendered = 0;
    for (;;) {
        auto msg = link.receive(timeout);
        if (!msg)
            throw ChannelTimeout(0, "channel " + std::to_string(channel_id) + ": server silent for " +
                                        std::to_string(timeout.count()) + " ms");
        proto.on_message(*msg);
        if (proto.phase() == SlaveProtocol::Phase::Finished) return rendered;
        if (const auto* b = std::get_if<StateBroadcast>(&*msg)) {
            render(b->frame_id, FrameUpdate{b->time, b->deltas});
            if (monitor) monitor->frame_completed(channel_id, b->frame_id, seconds_since(start));
            link.send(proto.rendered());
            ++rendered;
        }
    }
}

// ---- discrete-event simulation ----

namespace {

struct SimEvent {
    double time;
    std::uint64_t seq;
    enum Kind { StartFrame, Deliver, RenderDone } kind;
    int channel;  // destination (Deliver) or renderer (RenderDone)
    std::int64_t frame;
    FrameMessage message;

    bool operator>(const SimEvent& o) const { return std::tie(time, seq) > std::tie(o.time, o.seq); }
};

}  // namespace

SimulationResult simulate_lockstep(const SimulationSpec& spec) {
    if (spec.channels < 1) throw ValidationError("simulation needs at least one channel");
    std::set<int> slave_ids;
    for (int c = 1; c < spec.channels; ++c) slave_ids.insert(c);
    ServerProtocol server(slave_ids);
    std::vector<SlaveProtocol> slaves;
    for (int c = 0; c < spec.channels; ++c) slaves.emplace_back(c);
    LockstepMonitor monitor(spec.channels);
    const auto latency = [&](int c, std::int64_t k) { return spec.render_latency ? spec.render_latency(c, k) : 0.0; };

    std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> queue;
    std::uint64_t seq = 0;
    const auto push = [&](double t, SimEvent::Kind kind, int channel, std::int64_t frame, FrameMessage m = Shutdown{}) {
        queue.push({t, seq++, kind, channel, frame, std::move(m)});
    };
    const auto pace_time = [&](std::int64_t k) { return spec.pace ? spec.tick_s * static_cast<double>(k) : 0.0; };

    std::vector<double> advance_times;
    double now = 0.0;
    if (spec.frames > 0) push(0.0, SimEvent::StartFrame, 0, 0);

    while (!queue.empty()) {
        SimEvent ev = queue.top();
        queue.pop();
        now = ev.time;
        switch (ev.kind) {
        case SimEvent::StartFrame: {
            auto b = server.begin_frame(ev.frame, spec.tick_s * static_cast<double>(ev.frame), {});
            for (int c = 1; c < spec.channels; ++c) push(now + spec.message_latency_s, SimEvent::Deliver, c, ev.frame, b);
            push(now + latency(0, ev.frame), SimEvent::RenderDone, 0, ev.frame);
            break;
        }
        case SimEvent::RenderDone: {
            monitor.frame_completed(ev.channel, ev.frame, now);
            bool complete = false;
            if (ev.channel == 0) {
                complete = server.mark_done(0, ev.frame);
            } else {
                push(now + spec.message_latency_s, SimEvent::Deliver, 0, ev.frame, slaves[ev.channel].rendered());
            }
            if (complete) goto frame_complete;
            break;
        }
        case SimEvent::Deliver: {
            if (ev.channel == 0) {
                const auto& done = std::get<FrameDone>(ev.message);
                if (server.mark_done(done.channel_id, done.frame_id)) goto frame_complete;
            } else {
                slaves[ev.channel].on_message(ev.message);
                if (std::holds_alternative<StateBroadcast>(ev.message))
                    push(now + latency(ev.channel, ev.frame), SimEvent::RenderDone, ev.channel, ev.frame);
            }
            break;
        }
        }
        continue;

    frame_complete: {
        const Advance adv = server.advance();
        advance_times.push_back(now);
        for (int c = 1; c < spec.channels; ++c) push(now + spec.message_latency_s, SimEvent::Deliver, c, adv.frame_id, adv);
        if (adv.frame_id + 1 < spec.frames) {
            push(std::max(now, pace_time(adv.frame_id + 1)), SimEvent::StartFrame, 0, adv.frame_id + 1);
        } else {
            for (int c = 1; c < spec.channels; ++c)
                push(now + spec.message_latency_s, SimEvent::Deliver, c, adv.frame_id, Shutdown{spec.frames});
        }
    }
    }

    SimulationResult result;
    result.max_skew = monitor.max_skew();
    result.frames = static_cast<std::int64_t>(advance_times.size());
    result.duration_s = now;
    for (int c = 0; c < spec.channels; ++c) result.completion_times.push_back(monitor.completion_times(c));
    if (advance_times.size() >= 4) {
        const std::size_t a = advance_times.size() / 2;
        const std::size_t b = advance_times.size() - 1;
        const double span = advance_times[b] - advance_times[a];
        result.steady_rate_hz = span > 0.0 ? static_cast<double>(b - a) / span : 0.0;
    }
    return result;
}

}  // namespace vrpanel
