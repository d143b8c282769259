#include "vrpanel/recognizer.hpp"

#include <cmath>
#include <fstream>

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

namespace {

constexpr double kTickTolerance = 1e-6;

bool refractory_clear(const RecognizerState& state, const std::string& widget, double t,
                      const RecognizerConfig& cfg) {
    auto it = state.last_fired.find(widget);
    return it == state.last_fired.end() || t - it->second >= cfg.refractory_s - 1e-9;
}

// Zone lookup for the frame's marker, restricted to one widget kind.
const Widget* zone_of_kind(const InputFrame& frame, const PanelModel& model, WidgetKind kind) {
    if (!frame.position) return nullptr;
    const Widget* w = operable_at(model, frame.position->point.x, frame.position->point.y);
    return w && w->kind == kind ? w : nullptr;
}

std::optional<Kinematics> trailing_kinematics(const RecognizerState& state) {
    if (state.positions.size() < 3) return std::nullopt;
    std::vector<FusedPosition> tail(state.positions.end() - 3, state.positions.end());
    return estimate_kinematics(tail);
}

}  // namespace

std::optional<std::int64_t> tick_index(double t) {
    if (!std::isfinite(t)) return std::nullopt;
    const auto k = static_cast<std::int64_t>(std::llround(t / kTick));
    if (std::abs(t - tick_time(k)) > kTickTolerance) return std::nullopt;
    return k;
}

bool GloveFrame::valid() const {
    for (int v : fingers)
        if (v < 0 || v > 255) return false;
    return true;
}

std::string to_string(GestureClass g) {
    switch (g) {
    case GestureClass::Open:
        return "open";
    case GestureClass::Hold:
        return "hold";
    case GestureClass::Neutral:
        return "neutral";
    }
    return "?";
}

void RecognizerConfig::validate() const {
    const auto in_range = [](int v) { return v >= 0 && v <= 255; };
    if (!in_range(open_threshold)) throw ValidationError("open_threshold must lie in [0, 255]");
    if (!in_range(hold_threshold)) throw ValidationError("hold_threshold must lie in [0, 255]");
    if (open_threshold > hold_threshold)
        throw ValidationError("open_threshold must not exceed hold_threshold");
    if (!(accel_threshold > 0.0)) throw ValidationError("accel_threshold must be positive");
    if (tune_delta_threshold < 0) throw ValidationError("tune_delta_threshold must be >= 0");
    if (window < 3) throw ValidationError("window must be at least 3 frames");
    if (refractory_s < 0.0) throw ValidationError("refractory must be >= 0");
}

json recognizer_config_to_json(const RecognizerConfig& c) {
    return {{"open_threshold", c.open_threshold},
            {"hold_threshold", c.hold_threshold},
            {"accel_threshold", c.accel_threshold},
            {"tune_delta_threshold", c.tune_delta_threshold},
            {"window", c.window},
            {"refractory_s", c.refractory_s},
            {"polarity", c.polarity == GlovePolarity::HighIsFlexed ? "high_is_flexed" : "high_is_open"}};
}

RecognizerConfig recognizer_config_from_json(const json& j) {
    RecognizerConfig c;
    try {
        c.open_threshold = j.value("open_threshold", c.open_threshold);
        c.hold_threshold = j.value("hold_threshold", c.hold_threshold);
        c.accel_threshold = j.value("accel_threshold", c.accel_threshold);
        c.tune_delta_threshold = j.value("tune_delta_threshold", c.tune_delta_threshold);
        c.window = j.value("window", c.window);
        c.refractory_s = j.value("refractory_s", c.refractory_s);
        const std::string polarity = j.value("polarity", std::string("high_is_flexed"));
        if (polarity == "high_is_flexed")
            c.polarity = GlovePolarity::HighIsFlexed;
        else if (polarity == "high_is_open")
            c.polarity = GlovePolarity::HighIsOpen;
        else
            throw ParseError("unknown glove polarity '" + polarity + "'");
    } catch (const json::exception& e) {
        throw ParseError(std::string("recognizer config: ") + e.what());
    }
    c.validate();
    return c;
}

RecognizerConfig load_recognizer_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open recognizer config " + path.string());
    try {
        return recognizer_config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

int flexion(const GloveFrame& g, Finger f, GlovePolarity polarity) {
    const int v = g.fingers[f];
    return polarity == GlovePolarity::HighIsFlexed ? v : 255 - v;
}

GestureClass classify_gesture(const GloveFrame& g, const RecognizerConfig& cfg) {
    if (flexion(g, Index, cfg.polarity) < cfg.open_threshold) return GestureClass::Open;
    for (int f = Thumb; f <= Little; ++f)
        if (flexion(g, static_cast<Finger>(f), cfg.polarity) < cfg.hold_threshold)
            return GestureClass::Neutral;
    return GestureClass::Hold;
}

Kinematics estimate_kinematics(std::span<const FusedPosition> window) {
    if (window.size() < 3)
        throw InsufficientData("kinematics need 3 consecutive visible positions, have " +
                               std::to_string(window.size()));
    const FusedPosition& a = window[window.size() - 3];
    const FusedPosition& b = window[window.size() - 2];
    const FusedPosition& c = window[window.size() - 1];
    const double h1 = b.time - a.time;
    const double h2 = c.time - b.time;
    if (!(h1 > 0.0) || !(h2 > 0.0))
        throw OrderingError("kinematics window timestamps must increase");
    const WorldPoint slope1 = (b.point - a.point) * (1.0 / h1);
    const WorldPoint slope2 = (c.point - b.point) * (1.0 / h2);
    Kinematics k;
    k.velocity = (c.point - a.point) * (1.0 / (h1 + h2));
    k.acceleration = (slope2 - slope1) * (2.0 / (h1 + h2));
    return k;
}

std::optional<OperationEvent> detect_push(const RecognizerState& state, const InputFrame& frame,
                                          const PanelModel& model, const RecognizerConfig& cfg) {
    const Widget* button = zone_of_kind(frame, model, WidgetKind::Button);
    if (!button) return std::nullopt;
    if (classify_gesture(frame.glove, cfg) != GestureClass::Open) return std::nullopt;
    const auto kin = trailing_kinematics(state);
    if (!kin || kin->accel() < cfg.accel_threshold) return std::nullopt;
    if (!refractory_clear(state, button->id, frame.time, cfg)) return std::nullopt;
    return OperationEvent{frame.time, button->id, OperationKind::push()};
}

std::optional<OperationEvent> detect_tune(const RecognizerState& state, const InputFrame& frame,
                                          const PanelModel& model, const RecognizerConfig& cfg) {
    const Widget* knob = zone_of_kind(frame, model, WidgetKind::Knob);
    if (!knob) return std::nullopt;
    if (classify_gesture(frame.glove, cfg) != GestureClass::Hold) return std::nullopt;
    if (static_cast<int>(state.gloves.size()) < cfg.window) return std::nullopt;

    const GloveFrame& first = state.gloves.front();
    const GloveFrame& last = state.gloves.back();
    int delta = 0;
    for (int f = Index; f <= Little; ++f) {
        const auto finger = static_cast<Finger>(f);
        delta += flexion(last, finger, cfg.polarity) - flexion(first, finger, cfg.polarity);
    }
    Direction dir;
    if (delta > cfg.tune_delta_threshold)
        dir = Direction::Clockwise;
    else if (delta < -cfg.tune_delta_threshold)
        dir = Direction::CounterClockwise;
    else
        return std::nullopt;
    if (!refractory_clear(state, knob->id, frame.time, cfg)) return std::nullopt;
    return OperationEvent{frame.time, knob->id, OperationKind::tune(dir)};
}

std::optional<OperationEvent> detect_switch(const RecognizerState& state, const InputFrame& frame,
                                            const PanelModel& model, const RecognizerConfig& cfg) {
    const Widget* sw = zone_of_kind(frame, model, WidgetKind::Switch);
    if (!sw) return std::nullopt;
    if (classify_gesture(frame.glove, cfg) != GestureClass::Hold) return std::nullopt;
    const auto kin = trailing_kinematics(state);
    if (!kin || kin->accel() < cfg.accel_threshold) return std::nullopt;
    // Push up turns on, pull down turns off.
    const double dy = state.positions.back().point.y - state.positions.front().point.y;
    if (dy == 0.0) return std::nullopt;
    if (!refractory_clear(state, sw->id, frame.time, cfg)) return std::nullopt;
    return OperationEvent{frame.time, sw->id,
                          OperationKind::turn(dy > 0.0 ? Direction::On : Direction::Off)};
}

std::vector<OperationEvent> step(RecognizerState& state, const InputFrame& frame,
                                 const PanelModel& model, const RecognizerConfig& cfg) {
    const auto k = tick_index(frame.time);
    if (!k) throw OrderingError("frame at t=" + std::to_string(frame.time) + " is off the 40 ms tick grid");
    if (state.last_tick && *k != *state.last_tick + 1)
        throw OrderingError("frame tick " + std::to_string(*k) + " does not follow tick " +
                            std::to_string(*state.last_tick));
    if (!frame.glove.valid()) throw ValidationError("glove values must lie in [0, 255]");
    state.last_tick = *k;

    state.gloves.push_back(frame.glove);
    while (static_cast<int>(state.gloves.size()) > cfg.window) state.gloves.pop_front();

    if (!frame.position) {
        state.positions.clear();  // occlusion breaks the kinematics history
        return {};
    }
    state.positions.push_back(*frame.position);
    while (static_cast<int>(state.positions.size()) > cfg.window) state.positions.pop_front();

    std::vector<OperationEvent> events;
    for (auto detector : {detect_push, detect_tune, detect_switch}) {
        if (auto ev = detector(state, frame, model, cfg)) {
            state.last_fired[ev->widget] = ev->time;
            events.push_back(std::move(*ev));
        }
    }
    return events;
}

Recognizer::Recognizer(const PanelModel& model, RecognizerConfig cfg)
    : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate();
}

std::vector<OperationEvent> Recognizer::step(const InputFrame& frame) {
    return vrpanel::step(state_, frame, model_, cfg_);
}

}  // namespace vrpanel
