#include "vrpanel/logic_engine.hpp"

#include <algorithm>
#include <cmath>

#include "vrpanel/errors.hpp"
#include "vrpanel/recognizer.hpp"

namespace vrpanel {

using nlohmann::json;

namespace {

std::optional<WidgetValue> value_of(const PanelState& s, const Widget& w) {
    switch (w.kind) {
    case WidgetKind::Light:
        return s.lights.at(w.id);
    case WidgetKind::Meter:
        return s.meters.at(w.id);
    case WidgetKind::Screen:
        return s.screens.at(w.id);
    case WidgetKind::Knob:
        return s.knobs.at(w.id);
    case WidgetKind::Switch:
        return s.switches.at(w.id);
    case WidgetKind::Button:
        return std::nullopt;
    }
    return std::nullopt;
}

void store(PanelState& s, const std::string& id, const WidgetValue& v) {
    std::visit(
        [&](const auto& value) {
            using T = std::decay_t<decltype(value)>;
            if constexpr (std::is_same_v<T, LightState>)
                s.lights[id] = value;
            else if constexpr (std::is_same_v<T, MeterState>)
                s.meters[id] = value;
            else if constexpr (std::is_same_v<T, ScreenState>)
                s.screens[id] = value;
            else if constexpr (std::is_same_v<T, KnobState>)
                s.knobs[id] = value;
            else
                s.switches[id] = value;
        },
        v);
}

// Records the final value of every touched widget whose value differs from
// `before`, in first-touch order.
void collect_changes(const PanelState& before, const PanelState& after, const PanelModel& model,
                     const std::vector<std::string>& touched, StateDelta& delta) {
    for (const auto& id : touched) {
        const bool seen = std::any_of(delta.changes.begin(), delta.changes.end(),
                                      [&](const WidgetChange& c) { return c.widget == id; });
        if (seen) continue;
        const Widget& w = model.at(id);
        auto a = value_of(before, w);
        auto b = value_of(after, w);
        if (a && b && *a != *b) delta.changes.push_back({id, *b});
    }
}

json value_to_json(const WidgetValue& v) {
    return std::visit(
        [](const auto& value) -> json {
            using T = std::decay_t<decltype(value)>;
            if constexpr (std::is_same_v<T, LightState>)
                return {{"light", {{"mode", to_string(value.mode)}, {"lit", value.lit}}}};
            else if constexpr (std::is_same_v<T, MeterState>)
                return {{"meter", {{"on", value.on}}}};
            else if constexpr (std::is_same_v<T, ScreenState>)
                return {{"screen", {{"on", value.on}, {"slide", value.slide}}}};
            else if constexpr (std::is_same_v<T, KnobState>)
                return {{"knob", {{"value", value.value}}}};
            else
                return {{"switch", {{"on", value.on}}}};
        },
        v);
}

WidgetValue value_from_json(const json& j) {
    if (j.contains("light"))
        return LightState{parse_light_mode(j["light"].at("mode").get<std::string>()),
                          j["light"].at("lit").get<bool>()};
    if (j.contains("meter")) return MeterState{j["meter"].at("on").get<bool>()};
    if (j.contains("screen"))
        return ScreenState{j["screen"].at("on").get<bool>(), j["screen"].at("slide").get<int>()};
    if (j.contains("knob")) return KnobState{j["knob"].at("value").get<int>()};
    if (j.contains("switch")) return SwitchState{j["switch"].at("on").get<bool>()};
    throw ParseError("widget change without a recognized value");
}

}  // namespace

json operation_to_json(const OperationEvent& ev) {
    return {{"t", ev.time}, {"widget", ev.widget}, {"op", to_string(ev.kind)}};
}

OperationEvent operation_from_json(const json& j) {
    return {j.at("t").get<double>(), j.at("widget").get<std::string>(),
            parse_operation_kind(j.at("op").get<std::string>())};
}

json delta_to_json(const StateDelta& d) {
    json changes = json::array();
    for (const auto& c : d.changes) {
        json cj = value_to_json(c.value);
        cj["widget"] = c.widget;
        changes.push_back(std::move(cj));
    }
    json audio = json::array();
    for (const auto& a : d.audio) audio.push_back({{"t", a.time}, {"name", a.name}});
    json j = {{"t", d.time}, {"changes", std::move(changes)}, {"audio", std::move(audio)}};
    if (d.source) j["source"] = operation_to_json(*d.source);
    return j;
}

StateDelta delta_from_json(const json& j) {
    try {
        StateDelta d;
        d.time = j.at("t").get<double>();
        for (const auto& c : j.at("changes")) d.changes.push_back({c.at("widget").get<std::string>(), value_from_json(c)});
        for (const auto& a : j.at("audio")) d.audio.push_back({a.at("t").get<double>(), a.at("name").get<std::string>()});
        if (j.contains("source") && !j.at("source").is_null()) d.source = operation_from_json(j.at("source"));
        return d;
    } catch (const json::exception& e) {
        throw ParseError(std::string("state delta: ") + e.what());
    }
}

bool flicker_lit(double t, double period_s) {
    const auto half_periods = static_cast<long long>(std::floor(2.0 * t / period_s));
    return half_periods % 2 == 0;
}

std::pair<PanelState, StateDelta> apply(const PanelState& state, const OperationEvent& ev,
                                        const PanelModel& model) {
    const Widget& widget = model.at(ev.widget);
    PanelState next = state;
    next.clock = std::max(state.clock, ev.time);
    StateDelta delta;
    delta.time = next.clock;
    delta.source = ev;

    std::vector<std::string> touched;
    if (widget.kind == WidgetKind::Knob && ev.kind.type == OperationType::TuneKnob) {
        next.knobs[widget.id].value += ev.kind.direction == Direction::Clockwise ? 1 : -1;
        touched.push_back(widget.id);
    } else if (widget.kind == WidgetKind::Switch && ev.kind.type == OperationType::TurnSwitch) {
        next.switches[widget.id].on = ev.kind.direction == Direction::On;
        touched.push_back(widget.id);
    }

    for (const auto& rule : model.rules) {
        if (rule.trigger_widget != ev.widget || rule.trigger_kind != ev.kind) continue;
        for (const auto& e : rule.effects) {
            switch (e.action) {
            case EffectAction::LightOn:
                next.lights[e.target] = {LightMode::On, true};
                break;
            case EffectAction::LightOff:
                next.lights[e.target] = {LightMode::Off, false};
                break;
            case EffectAction::LightFlicker:
                next.lights[e.target] = {LightMode::Flicker,
                                         flicker_lit(next.clock, model.defaults.flicker_period_s)};
                break;
            case EffectAction::MeterOn:
                next.meters[e.target].on = true;
                break;
            case EffectAction::MeterOff:
                next.meters[e.target].on = false;
                break;
            case EffectAction::ScreenNextSlide: {
                auto& screen = next.screens[e.target];
                screen.on = true;
                screen.slide = (screen.slide + 1) % model.at(e.target).slide_count;
                break;
            }
            case EffectAction::ScreenOff:
                next.screens[e.target].on = false;
                break;
            case EffectAction::PlayAudio:
                delta.audio.push_back({next.clock, e.audio});
                break;
            }
            if (!e.target.empty()) touched.push_back(e.target);
        }
    }
    collect_changes(state, next, model, touched, delta);
    return {std::move(next), std::move(delta)};
}

std::pair<PanelState, StateDelta> tick(const PanelState& state, double now, const PanelModel& model) {
    if (now < state.clock)
        throw OrderingError("tick to t=" + std::to_string(now) + " precedes clock " +
                            std::to_string(state.clock));
    PanelState next = state;
    next.clock = now;
    StateDelta delta;
    delta.time = now;
    if (now == state.clock) return {std::move(next), std::move(delta)};

    const bool lit = flicker_lit(now, model.defaults.flicker_period_s);
    for (auto& [id, light] : next.lights) {
        if (light.mode != LightMode::Flicker || light.lit == lit) continue;
        light.lit = lit;
        delta.changes.push_back({id, light});
    }
    return {std::move(next), std::move(delta)};
}

StateDelta start_session(const PanelModel& model) {
    StateDelta d;
    if (!model.defaults.env_audio.empty()) d.audio.push_back({0.0, model.defaults.env_audio});
    return d;
}

PanelState apply_delta(PanelState state, const StateDelta& delta) {
    state.clock = std::max(state.clock, delta.time);
    for (const auto& c : delta.changes) store(state, c.widget, c.value);
    return state;
}

std::vector<StateDelta> run_session(const PanelModel& model, const std::vector<OperationEvent>& events,
                                    double duration) {
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (events[k].time < 0.0 || events[k].time > duration)
            throw OrderingError("event at t=" + std::to_string(events[k].time) + " lies outside [0, " +
                                std::to_string(duration) + "]");
        if (k > 0 && events[k].time < events[k - 1].time)
            throw OrderingError("events are not time-ordered at index " + std::to_string(k));
    }

    LogicEngine engine(model);
    std::vector<StateDelta> out;
    out.push_back(engine.start());
    // Zero-elapsed ticks carry nothing; every other tick is kept so the delta
    // stream also records the clock.
    const auto advance = [&](double t) {
        if (t > engine.state().clock) out.push_back(engine.tick(t));
    };

    std::size_t next_event = 0;
    const auto apply_until = [&](double t) {
        while (next_event < events.size() && events[next_event].time <= t) {
            const auto& ev = events[next_event++];
            advance(ev.time);
            out.push_back(engine.apply(ev));
        }
    };
    const auto last_tick = static_cast<std::int64_t>(std::floor(duration / kTick + 1e-9));
    for (std::int64_t k = 1; k <= last_tick; ++k) {
        const double t = tick_time(k);
        apply_until(t);
        advance(t);
    }
    apply_until(duration);
    advance(duration);
    return out;
}

LogicEngine::LogicEngine(const PanelModel& model) : model_(model), state_(initial_state(model)) {}

StateDelta LogicEngine::start() { return start_session(model_); }

StateDelta LogicEngine::apply(const OperationEvent& ev) {
    auto [next, delta] = vrpanel::apply(state_, ev, model_);
    state_ = std::move(next);
    return delta;
}

StateDelta LogicEngine::tick(double now) {
    auto [next, delta] = vrpanel::tick(state_, now, model_);
    state_ = std::move(next);
    return delta;
}

}  // namespace vrpanel
