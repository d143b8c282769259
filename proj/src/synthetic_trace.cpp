#include "vrpanel/synthetic_trace.hpp"

#include <algorithm>
#include <cmath>

#include "vrpanel/errors.hpp"

namespace vrpanel {

namespace {

constexpr double kApproachAccel = 3.0;  // m/s^2, well under the default push threshold
constexpr int kDecelTicks = 3;
constexpr double kDwell = 0.2;

std::int64_t ticks_for(double seconds) { return std::max<std::int64_t>(0, std::llround(seconds / kTick)); }

}  // namespace

TraceBuilder::TraceBuilder(const WorldPoint& start, std::array<int, 5> glove, std::int64_t start_tick)
    : pos_(start), glove_(glove), tick_(start_tick) {}

void TraceBuilder::emit() {
    InputFrame f;
    f.time = tick_time(tick_);
    f.glove = {f.time, glove_};
    if (!occluded_) f.position = FusedPosition{f.time, pos_, 1};
    frames_.push_back(f);
    ++tick_;
}

TraceBuilder& TraceBuilder::wait(double seconds) {
    for (std::int64_t k = ticks_for(seconds); k > 0; --k) emit();
    return *this;
}

TraceBuilder& TraceBuilder::glove(const std::array<int, 5>& fingers) {
    glove_ = fingers;
    return *this;
}

TraceBuilder& TraceBuilder::occlude(double seconds) {
    occluded_ = true;
    wait(seconds);
    occluded_ = false;
    return *this;
}

TraceBuilder& TraceBuilder::move_to(const WorldPoint& target, double max_accel) {
    const WorldPoint from = pos_;
    const double dist = distance(from, target);
    if (dist == 0.0) return *this;
    // Minimum-jerk peak acceleration is 10/sqrt(3) * d / T^2.
    const double duration = std::sqrt(10.0 / std::sqrt(3.0) * dist / max_accel);
    const std::int64_t n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(duration / kTick)));
    for (std::int64_t k = 1; k <= n; ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(n);
        const double s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        pos_ = from + (target - from) * s;
        emit();
    }
    pos_ = target;
    return *this;
}

void TraceBuilder::stroke(const WorldPoint& axis, double decel) {
    const double peak = decel * kDecelTicks * kTick;
    const std::int64_t n_in = std::max<std::int64_t>(1, std::llround(peak / (kApproachAccel * kTick)));
    const double accel_in = peak / (static_cast<double>(n_in) * kTick);
    const double t_in = static_cast<double>(n_in) * kTick;
    const double s_in = 0.5 * accel_in * t_in * t_in;
    const WorldPoint origin = pos_;
    for (std::int64_t k = 1; k <= n_in + kDecelTicks; ++k) {
        const double t = static_cast<double>(k) * kTick;
        double s;
        if (k <= n_in) {
            s = 0.5 * accel_in * t * t;
        } else {
            const double u = t - t_in;
            s = s_in + peak * u - 0.5 * decel * u * u;
        }
        pos_ = origin + axis * s;
        emit();
    }
}

TraceBuilder& TraceBuilder::press(double decel) {
    const WorldPoint start = pos_;
    stroke({0.0, 0.0, -1.0}, decel);
    wait(kDwell);
    return move_to(start);
}

TraceBuilder& TraceBuilder::flick(Direction dir, double decel) {
    stroke({0.0, dir == Direction::Off ? -1.0 : 1.0, 0.0}, decel);
    return *this;
}

TraceBuilder& TraceBuilder::twist(Direction dir, int units_per_frame, int frames) {
    const int delta = dir == Direction::CounterClockwise ? -units_per_frame : units_per_frame;
    for (int k = 0; k < frames; ++k) {
        for (int f = Index; f <= Little; ++f) glove_[f] = std::clamp(glove_[f] + delta, 0, 255);
        emit();
    }
    return *this;
}

namespace {

std::array<int, 5> glove_preset(const nlohmann::json& j) {
    if (j.is_array()) return j.get<std::array<int, 5>>();
    const auto name = j.get<std::string>();
    if (name == "relaxed") return gloves::kRelaxed;
    if (name == "pointing") return gloves::kPointing;
    if (name == "hold") return gloves::kHold;
    throw ValidationError("unknown glove preset '" + name + "'");
}

Direction parse_direction(const std::string& s) {
    if (s == "cw") return Direction::Clockwise;
    if (s == "ccw") return Direction::CounterClockwise;
    if (s == "on") return Direction::On;
    if (s == "off") return Direction::Off;
    throw ValidationError("unknown direction '" + s + "'");
}

}  // namespace

std::vector<InputFrame> scripted_trace(const nlohmann::json& script, const PanelModel& model) {
    try {
        const auto start = script.value("start", std::array<double, 3>{0.5, 0.5, 0.3});
        TraceBuilder b({start[0], start[1], start[2]},
                       script.contains("glove") ? glove_preset(script.at("glove")) : gloves::kRelaxed);
        for (const auto& step : script.value("steps", nlohmann::json::array())) {
            if (step.contains("wait")) {
                b.wait(step.at("wait").get<double>());
            } else if (step.contains("glove")) {
                b.glove(glove_preset(step.at("glove")));
            } else if (step.contains("occlude")) {
                b.occlude(step.at("occlude").get<double>());
            } else if (step.contains("move_to")) {
                const auto& t = step.at("move_to");
                WorldPoint target = b.position();
                if (t.is_string()) {
                    const Rect& z = model.at(t.get<std::string>()).zone;
                    target.x = z.x + z.w / 2.0;
                    target.y = z.y + z.h / 2.0;
                } else {
                    target.x = t.at(0).get<double>();
                    target.y = t.at(1).get<double>();
                    if (t.size() > 2) target.z = t.at(2).get<double>();
                }
                b.move_to(target, step.value("max_accel", 2.0));
            } else if (step.contains("press")) {
                b.press(step.at("press").is_number() ? step.at("press").get<double>() : 8.0);
            } else if (step.contains("flick")) {
                b.flick(parse_direction(step.at("flick").get<std::string>()), step.value("decel", 8.0));
            } else if (step.contains("twist")) {
                const auto& t = step.at("twist");
                b.twist(parse_direction(t.at("dir").get<std::string>()), t.value("units", 12), t.value("frames", 5));
            } else {
                throw ValidationError("unknown trace step " + step.dump());
            }
        }
        return b.build();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trace script: ") + e.what());
    }
}

}  // namespace vrpanel
