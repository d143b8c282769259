#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "vrpanel/panel_model.hpp"
#include "vrpanel/recognizer.hpp"

namespace vrpanel {

// Glove presets on the flexion scale (HighIsFlexed).
namespace gloves {
inline constexpr std::array<int, 5> kPointing{200, 40, 200, 200, 200};  // index extended
inline constexpr std::array<int, 5> kHold{210, 210, 210, 210, 210};
inline constexpr std::array<int, 5> kRelaxed{120, 120, 120, 120, 120};
}  // namespace gloves

// Scripts an operator's marker track and glove readings on the 40 ms grid.
// Motions are piecewise-quadratic in time so second differences reproduce the
// scripted accelerations exactly.
class TraceBuilder {
public:
    explicit TraceBuilder(const WorldPoint& start, std::array<int, 5> glove = gloves::kRelaxed,
                          std::int64_t start_tick = 0);

    TraceBuilder& wait(double seconds);
    TraceBuilder& glove(const std::array<int, 5>& fingers);
    TraceBuilder& occlude(double seconds);

    // Minimum-jerk move; duration chosen so peak acceleration stays at max_accel.
    TraceBuilder& move_to(const WorldPoint& target, double max_accel = 2.0);

    // Finger push toward the screen (-z): gentle acceleration, then a
    // deceleration at `decel` lasting three ticks down to contact, a short
    // dwell, and a slow retract to the starting depth.
    TraceBuilder& press(double decel = 8.0);

    // Same velocity profile along +y (On) or -y (Off); the marker stays at the
    // end of the stroke.
    TraceBuilder& flick(Direction dir, double decel = 8.0);

    // Changes each non-thumb finger by `units_per_frame` per frame (positive for
    // Clockwise) for `frames` frames.
    TraceBuilder& twist(Direction dir, int units_per_frame, int frames);

    double now() const { return tick_time(tick_); }
    const WorldPoint& position() const { return pos_; }
    const std::vector<InputFrame>& frames() const { return frames_; }
    std::vector<InputFrame> build() const { return frames_; }

private:
    void emit();
    void stroke(const WorldPoint& axis, double decel);

    WorldPoint pos_;
    std::array<int, 5> glove_;
    std::int64_t tick_;
    bool occluded_ = false;
    std::vector<InputFrame> frames_;
};

// Builds a trace from a JSON step list:
//   {"start": [x, y, z], "glove": "relaxed",
//    "steps": [{"move_to": "Red"}, {"glove": "pointing"}, {"press": 8.0},
//              {"wait": 0.5}, {"flick": "on"}, {"twist": {"dir": "cw", "units": 12, "frames": 5}},
//              {"occlude": 0.2}, {"move_to": [x, y]}]}
// Widget targets resolve to the zone center at the current depth.
std::vector<InputFrame> scripted_trace(const nlohmann::json& script, const PanelModel& model);

}  // namespace vrpanel
