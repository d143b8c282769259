#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vrpanel/geometry.hpp"
#include "vrpanel/operation.hpp"

namespace vrpanel {

enum class WidgetKind { Button, Knob, Switch, Light, Meter, Screen };

// Buttons, knobs and switches have interaction zones; the rest are display-only.
constexpr bool is_operable(WidgetKind k) {
    return k == WidgetKind::Button || k == WidgetKind::Knob || k == WidgetKind::Switch;
}

std::string to_string(WidgetKind k);
WidgetKind parse_widget_kind(std::string_view text);

// Closed axis-aligned rectangle in panel meters; edges belong to the zone.
struct Rect {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool contains(double px, double py) const {
        return px >= x && px <= x + w && py >= y && py <= y + h;
    }
    bool intersects(const Rect& o) const {
        return x <= o.x + o.w && o.x <= x + w && y <= o.y + o.h && o.y <= y + h;
    }
    friend bool operator==(const Rect&, const Rect&) = default;
};

inline constexpr int kDefaultSlideCount = 8;

struct Widget {
    std::string id;
    WidgetKind kind = WidgetKind::Button;
    Rect zone;
    std::string label;
    int slide_count = kDefaultSlideCount;  // screens only

    friend bool operator==(const Widget&, const Widget&) = default;
};

enum class EffectAction {
    LightOn,
    LightOff,
    LightFlicker,
    MeterOn,
    MeterOff,
    ScreenNextSlide,
    ScreenOff,
    PlayAudio,
};

std::string to_string(EffectAction a);
EffectAction parse_effect_action(std::string_view text);

struct Effect {
    EffectAction action = EffectAction::PlayAudio;
    std::string target;  // empty for PlayAudio
    std::string audio;   // PlayAudio only

    friend bool operator==(const Effect&, const Effect&) = default;
};

// One row of the relation matrix: trigger -> ordered effects.
struct LogicRule {
    std::string trigger_widget;
    OperationKind trigger_kind;
    std::vector<Effect> effects;

    friend bool operator==(const LogicRule&, const LogicRule&) = default;
};

inline constexpr double kDefaultFlickerPeriod = 1.0;

struct DefaultBehavior {
    std::string env_audio;
    std::vector<std::string> flicker_lights;
    double flicker_period_s = kDefaultFlickerPeriod;

    friend bool operator==(const DefaultBehavior&, const DefaultBehavior&) = default;
};

// Geometric model plus control-logic model of a 2D panel. Immutable after load.
class PanelModel {
public:
    double width_m = 0.0;
    double height_m = 0.0;
    std::vector<Widget> widgets;
    std::vector<LogicRule> rules;
    DefaultBehavior defaults;

    const Widget* find(std::string_view id) const;
    const Widget& at(std::string_view id) const;  // throws UnknownWidget
    std::vector<const Widget*> of_kind(WidgetKind k) const;
    std::size_t count(WidgetKind k) const;

    // Throws ValidationError naming the offending element.
    void validate() const;

    friend bool operator==(const PanelModel&, const PanelModel&) = default;
};

PanelModel panel_from_json(const nlohmann::json& j);
nlohmann::json panel_to_json(const PanelModel& model);

PanelModel load_panel(const std::filesystem::path& path);
void save_panel(const PanelModel& model, const std::filesystem::path& path);

// The operable widget whose zone contains (p.x, p.y); z is ignored.
std::optional<std::string> hit_test(const PanelModel& model, const WorldPoint& p);
const Widget* operable_at(const PanelModel& model, double x, double y);

// ---- live state ----

enum class LightMode { Off, On, Flicker };

std::string to_string(LightMode m);
LightMode parse_light_mode(std::string_view text);

// `lit` is the visible output: On -> true, Off -> false, Flicker -> current phase.
struct LightState {
    LightMode mode = LightMode::Off;
    bool lit = false;
    friend bool operator==(const LightState&, const LightState&) = default;
};

struct MeterState {
    bool on = false;
    friend bool operator==(const MeterState&, const MeterState&) = default;
};

struct ScreenState {
    bool on = true;
    int slide = 0;
    friend bool operator==(const ScreenState&, const ScreenState&) = default;
};

struct KnobState {
    int value = 0;
    friend bool operator==(const KnobState&, const KnobState&) = default;
};

struct SwitchState {
    bool on = false;
    friend bool operator==(const SwitchState&, const SwitchState&) = default;
};

struct PanelState {
    std::map<std::string, LightState> lights;
    std::map<std::string, MeterState> meters;
    std::map<std::string, ScreenState> screens;
    std::map<std::string, KnobState> knobs;
    std::map<std::string, SwitchState> switches;
    double clock = 0.0;

    friend bool operator==(const PanelState&, const PanelState&) = default;
};

PanelState initial_state(const PanelModel& model);

nlohmann::json state_to_json(const PanelState& state);

}  // namespace vrpanel
