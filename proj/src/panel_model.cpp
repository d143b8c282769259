#include "vrpanel/panel_model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

namespace {

struct KindName {
    WidgetKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {WidgetKind::Button, "button"}, {WidgetKind::Knob, "knob"},   {WidgetKind::Switch, "switch"},
    {WidgetKind::Light, "light"},   {WidgetKind::Meter, "meter"}, {WidgetKind::Screen, "screen"},
};

struct ActionName {
    EffectAction action;
    const char* name;
};

constexpr ActionName kActionNames[] = {
    {EffectAction::LightOn, "light_on"},
    {EffectAction::LightOff, "light_off"},
    {EffectAction::LightFlicker, "light_flicker"},
    {EffectAction::MeterOn, "meter_on"},
    {EffectAction::MeterOff, "meter_off"},
    {EffectAction::ScreenNextSlide, "screen_next_slide"},
    {EffectAction::ScreenOff, "screen_off"},
    {EffectAction::PlayAudio, "play_audio"},
};

std::optional<WidgetKind> target_kind(EffectAction a) {
    switch (a) {
    case EffectAction::LightOn:
    case EffectAction::LightOff:
    case EffectAction::LightFlicker:
        return WidgetKind::Light;
    case EffectAction::MeterOn:
    case EffectAction::MeterOff:
        return WidgetKind::Meter;
    case EffectAction::ScreenNextSlide:
    case EffectAction::ScreenOff:
        return WidgetKind::Screen;
    case EffectAction::PlayAudio:
        return std::nullopt;
    }
    return std::nullopt;
}

bool kind_accepts(WidgetKind widget, OperationType op) {
    switch (op) {
    case OperationType::PushButton:
        return widget == WidgetKind::Button;
    case OperationType::TuneKnob:
        return widget == WidgetKind::Knob;
    case OperationType::TurnSwitch:
        return widget == WidgetKind::Switch;
    }
    return false;
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw ParseError(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": bad value for '" + key + "': " + e.what());
    }
}

}  // namespace

std::string to_string(WidgetKind k) {
    for (const auto& [kind, name] : kKindNames)
        if (kind == k) return name;
    return "?";
}

WidgetKind parse_widget_kind(std::string_view text) {
    for (const auto& [kind, name] : kKindNames)
        if (text == name) return kind;
    throw ParseError("unknown widget kind '" + std::string(text) + "'");
}

std::string to_string(EffectAction a) {
    for (const auto& [action, name] : kActionNames)
        if (action == a) return name;
    return "?";
}

EffectAction parse_effect_action(std::string_view text) {
    for (const auto& [action, name] : kActionNames)
        if (text == name) return action;
    throw ParseError("unknown effect action '" + std::string(text) + "'");
}

std::string to_string(LightMode m) {
    switch (m) {
    case LightMode::Off:
        return "off";
    case LightMode::On:
        return "on";
    case LightMode::Flicker:
        return "flicker";
    }
    return "?";
}

LightMode parse_light_mode(std::string_view text) {
    if (text == "off") return LightMode::Off;
    if (text == "on") return LightMode::On;
    if (text == "flicker") return LightMode::Flicker;
    throw ParseError("unknown light mode '" + std::string(text) + "'");
}

const Widget* PanelModel::find(std::string_view id) const {
    for (const auto& w : widgets)
        if (w.id == id) return &w;
    return nullptr;
}

const Widget& PanelModel::at(std::string_view id) const {
    if (const Widget* w = find(id)) return *w;
    throw UnknownWidget(std::string(id));
}

std::vector<const Widget*> PanelModel::of_kind(WidgetKind k) const {
    std::vector<const Widget*> out;
    for (const auto& w : widgets)
        if (w.kind == k) out.push_back(&w);
    return out;
}

std::size_t PanelModel::count(WidgetKind k) const {
    std::size_t n = 0;
    for (const auto& w : widgets)
        if (w.kind == k) ++n;
    return n;
}

void PanelModel::validate() const {
    if (!(width_m > 0.0) || !(height_m > 0.0))
        throw ValidationError("panel dimensions must be positive");

    std::set<std::string> ids;
    for (const auto& w : widgets) {
        if (w.id.empty()) throw ValidationError("widget with empty id");
        if (!ids.insert(w.id).second) throw ValidationError("duplicate widget id '" + w.id + "'");
        const Rect& z = w.zone;
        if (!(z.w > 0.0) || !(z.h > 0.0))
            throw ValidationError("widget '" + w.id + "' has an empty zone");
        if (z.x < 0.0 || z.y < 0.0 || z.x + z.w > width_m || z.y + z.h > height_m) {
            std::ostringstream os;
            os << "widget '" << w.id << "' zone x=[" << z.x << ", " << z.x + z.w << "] y=[" << z.y
               << ", " << z.y + z.h << "] lies outside the " << width_m << " x " << height_m
               << " m panel";
            throw ValidationError(os.str());
        }
        if (w.kind == WidgetKind::Screen && w.slide_count < 1)
            throw ValidationError("screen '" + w.id + "' needs at least one slide");
    }

    for (std::size_t a = 0; a < widgets.size(); ++a) {
        if (!is_operable(widgets[a].kind)) continue;
        for (std::size_t b = a + 1; b < widgets.size(); ++b) {
            if (!is_operable(widgets[b].kind)) continue;
            if (widgets[a].zone.intersects(widgets[b].zone))
                throw ValidationError("operable zones of '" + widgets[a].id + "' and '" +
                                      widgets[b].id + "' overlap");
        }
    }

    for (std::size_t r = 0; r < rules.size(); ++r) {
        const auto& rule = rules[r];
        const std::string where = "rule " + std::to_string(r);
        const Widget* trigger = find(rule.trigger_widget);
        if (!trigger)
            throw ValidationError(where + ": trigger references unknown widget '" +
                                  rule.trigger_widget + "'");
        if (!rule.trigger_kind.valid())
            throw ValidationError(where + ": invalid trigger operation");
        if (!kind_accepts(trigger->kind, rule.trigger_kind.type))
            throw ValidationError(where + ": operation '" + to_string(rule.trigger_kind) +
                                  "' cannot trigger " + to_string(trigger->kind) + " '" +
                                  trigger->id + "'");
        for (const auto& e : rule.effects) {
            auto expected = target_kind(e.action);
            if (!expected) {
                if (e.audio.empty())
                    throw ValidationError(where + ": play_audio effect without a name");
                continue;
            }
            const Widget* target = find(e.target);
            if (!target)
                throw ValidationError(where + ": effect references unknown widget '" + e.target +
                                      "'");
            if (target->kind != *expected)
                throw ValidationError(where + ": effect '" + to_string(e.action) +
                                      "' does not apply to " + to_string(target->kind) + " '" +
                                      target->id + "'");
        }
    }

    for (const auto& id : defaults.flicker_lights) {
        const Widget* w = find(id);
        if (!w || w->kind != WidgetKind::Light)
            throw ValidationError("default flicker entry '" + id + "' is not a light");
    }
    if (!(defaults.flicker_period_s > 0.0))
        throw ValidationError("flicker_period_s must be positive");
}

PanelModel panel_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("panel definition must be a JSON object");
    PanelModel m;
    m.width_m = required<double>(j, "width_m", "panel");
    m.height_m = required<double>(j, "height_m", "panel");

    for (const auto& wj : required<json>(j, "widgets", "panel")) {
        Widget w;
        w.id = required<std::string>(wj, "id", "widget");
        const std::string where = "widget '" + w.id + "'";
        w.kind = parse_widget_kind(required<std::string>(wj, "kind", where));
        const json zone = required<json>(wj, "zone", where);
        w.zone = {required<double>(zone, "x", where), required<double>(zone, "y", where),
                  required<double>(zone, "w", where), required<double>(zone, "h", where)};
        w.label = wj.value("label", w.id);
        if (w.kind == WidgetKind::Screen) w.slide_count = wj.value("slides", kDefaultSlideCount);
        m.widgets.push_back(std::move(w));
    }

    if (j.contains("rules")) {
        for (const auto& rj : j.at("rules")) {
            LogicRule rule;
            const json trig = required<json>(rj, "trigger", "rule");
            rule.trigger_widget = required<std::string>(trig, "widget", "rule trigger");
            rule.trigger_kind = parse_operation_kind(required<std::string>(trig, "op", "rule trigger"));
            for (const auto& ej : required<json>(rj, "effects", "rule")) {
                Effect e;
                e.action = parse_effect_action(required<std::string>(ej, "action", "effect"));
                e.target = ej.value("target", "");
                e.audio = ej.value("name", "");
                rule.effects.push_back(std::move(e));
            }
            m.rules.push_back(std::move(rule));
        }
    }

    if (j.contains("defaults")) {
        const json& d = j.at("defaults");
        m.defaults.env_audio = d.value("env_audio", "");
        m.defaults.flicker_lights = d.value("flicker_lights", std::vector<std::string>{});
        m.defaults.flicker_period_s = d.value("flicker_period_s", kDefaultFlickerPeriod);
    }

    m.validate();
    return m;
}

json panel_to_json(const PanelModel& m) {
    json widgets = json::array();
    for (const auto& w : m.widgets) {
        json wj = {{"id", w.id},
                   {"kind", to_string(w.kind)},
                   {"zone", {{"x", w.zone.x}, {"y", w.zone.y}, {"w", w.zone.w}, {"h", w.zone.h}}},
                   {"label", w.label}};
        if (w.kind == WidgetKind::Screen) wj["slides"] = w.slide_count;
        widgets.push_back(std::move(wj));
    }
    json rules = json::array();
    for (const auto& r : m.rules) {
        json effects = json::array();
        for (const auto& e : r.effects) {
            json ej = {{"action", to_string(e.action)}};
            if (!e.target.empty()) ej["target"] = e.target;
            if (!e.audio.empty()) ej["name"] = e.audio;
            effects.push_back(std::move(ej));
        }
        rules.push_back({{"trigger", {{"widget", r.trigger_widget}, {"op", to_string(r.trigger_kind)}}},
                         {"effects", std::move(effects)}});
    }
    return {{"width_m", m.width_m},
            {"height_m", m.height_m},
            {"widgets", std::move(widgets)},
            {"rules", std::move(rules)},
            {"defaults",
             {{"env_audio", m.defaults.env_audio},
              {"flicker_lights", m.defaults.flicker_lights},
              {"flicker_period_s", m.defaults.flicker_period_s}}}};
}

PanelModel load_panel(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open panel file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return panel_from_json(j);
}

void save_panel(const PanelModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Runtime, "cannot write panel file " + path.string());
    out << panel_to_json(model).dump(2) << '\n';
}

const Widget* operable_at(const PanelModel& model, double x, double y) {
    for (const auto& w : model.widgets)
        if (is_operable(w.kind) && w.zone.contains(x, y)) return &w;
    return nullptr;
}

std::optional<std::string> hit_test(const PanelModel& model, const WorldPoint& p) {
    if (const Widget* w = operable_at(model, p.x, p.y)) return w->id;
    return std::nullopt;
}

PanelState initial_state(const PanelModel& model) {
    PanelState s;
    for (const auto& w : model.widgets) {
        switch (w.kind) {
        case WidgetKind::Light:
            s.lights[w.id] = {};
            break;
        case WidgetKind::Meter:
            s.meters[w.id] = {};
            break;
        case WidgetKind::Screen:
            s.screens[w.id] = {true, 0};
            break;
        case WidgetKind::Knob:
            s.knobs[w.id] = {};
            break;
        case WidgetKind::Switch:
            s.switches[w.id] = {};
            break;
        case WidgetKind::Button:
            break;
        }
    }
    // Flicker phase is "lit" at t = 0.
    for (const auto& id : model.defaults.flicker_lights) s.lights[id] = {LightMode::Flicker, true};
    return s;
}

json state_to_json(const PanelState& s) {
    json lights = json::object();
    for (const auto& [id, l] : s.lights) lights[id] = {{"mode", to_string(l.mode)}, {"lit", l.lit}};
    json meters = json::object();
    for (const auto& [id, m] : s.meters) meters[id] = m.on;
    json screens = json::object();
    for (const auto& [id, sc] : s.screens) screens[id] = {{"on", sc.on}, {"slide", sc.slide}};
    json knobs = json::object();
    for (const auto& [id, k] : s.knobs) knobs[id] = k.value;
    json switches = json::object();
    for (const auto& [id, sw] : s.switches) switches[id] = sw.on;
    return {{"clock", s.clock}, {"lights", lights},   {"meters", meters},
            {"screens", screens}, {"knobs", knobs}, {"switches", switches}};
}

}  // namespace vrpanel
