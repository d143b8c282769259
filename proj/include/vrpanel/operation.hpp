#pragma once

#include <string>
#include <string_view>

namespace vrpanel {

enum class OperationType { PushButton, TuneKnob, TurnSwitch };

enum class Direction { None, Clockwise, CounterClockwise, On, Off };

// Recognized operation kind. Direction is None for pushes, CW/CCW for knobs and
// On/Off for switches.
struct OperationKind {
    OperationType type = OperationType::PushButton;
    Direction direction = Direction::None;

    static OperationKind push() { return {OperationType::PushButton, Direction::None}; }
    static OperationKind tune(Direction d) { return {OperationType::TuneKnob, d}; }
    static OperationKind turn(Direction d) { return {OperationType::TurnSwitch, d}; }

    bool valid() const;

    friend bool operator==(const OperationKind&, const OperationKind&) = default;
};

// "push", "tune_cw", "tune_ccw", "switch_on", "switch_off"
std::string to_string(const OperationKind& kind);
OperationKind parse_operation_kind(std::string_view text);

struct OperationEvent {
    double time = 0.0;
    std::string widget;
    OperationKind kind;

    friend bool operator==(const OperationEvent&, const OperationEvent&) = default;
};

}  // namespace vrpanel
