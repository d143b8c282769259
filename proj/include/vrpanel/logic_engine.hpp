#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vrpanel/operation.hpp"
#include "vrpanel/panel_model.hpp"

namespace vrpanel {

struct AudioEvent {
    double time = 0.0;
    std::string name;
    friend bool operator==(const AudioEvent&, const AudioEvent&) = default;
};

using WidgetValue = std::variant<LightState, MeterState, ScreenState, KnobState, SwitchState>;

struct WidgetChange {
    std::string widget;
    WidgetValue value;
    friend bool operator==(const WidgetChange&, const WidgetChange&) = default;
};

// Unit of state propagation: everything that changed at one instant and why.
struct StateDelta {
    double time = 0.0;
    std::vector<WidgetChange> changes;  // only widgets whose value changed
    std::vector<AudioEvent> audio;
    std::optional<OperationEvent> source;

    bool empty() const { return changes.empty() && audio.empty() && !source; }
    friend bool operator==(const StateDelta&, const StateDelta&) = default;
};

nlohmann::json delta_to_json(const StateDelta& d);
StateDelta delta_from_json(const nlohmann::json& j);
nlohmann::json operation_to_json(const OperationEvent& ev);
OperationEvent operation_from_json(const nlohmann::json& j);

// Visible phase of a flickering light: lit during even half-periods.
bool flicker_lit(double t, double period_s);

// Applies every rule matching (ev.widget, ev.kind) in listed order. Knobs and
// switches also take the operated position themselves. Throws UnknownWidget.
std::pair<PanelState, StateDelta> apply(const PanelState& state, const OperationEvent& ev,
                                        const PanelModel& model);

// Advances the clock to `now`, updating flicker phases. Throws OrderingError
// when now < state.clock.
std::pair<PanelState, StateDelta> tick(const PanelState& state, double now, const PanelModel& model);

// Session-start delta at t = 0 carrying the environment sound.
StateDelta start_session(const PanelModel& model);

// Folds a delta into a state; folding a session's deltas over initial_state
// reproduces its final state.
PanelState apply_delta(PanelState state, const StateDelta& delta);

// Interleaves ticks on the 40 ms grid with the events by timestamp. The first
// delta is the session start; every event yields exactly one delta. Throws
// OrderingError for unordered or out-of-range events.
std::vector<StateDelta> run_session(const PanelModel& model, const std::vector<OperationEvent>& events,
                                    double duration);

// Stateful wrapper owning one PanelState.
class LogicEngine {
public:
    explicit LogicEngine(const PanelModel& model);

    StateDelta start();
    StateDelta apply(const OperationEvent& ev);
    StateDelta tick(double now);

    const PanelState& state() const { return state_; }
    const PanelModel& model() const { return model_; }

private:
    const PanelModel& model_;
    PanelState state_;
};

}  // namespace vrpanel
