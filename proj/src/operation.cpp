#include "vrpanel/operation.hpp"

#include "vrpanel/errors.hpp"

namespace vrpanel {

bool OperationKind::valid() const {
    switch (type) {
    case OperationType::PushButton:
        return direction == Direction::None;
    case OperationType::TuneKnob:
        return direction == Direction::Clockwise || direction == Direction::CounterClockwise;
    case OperationType::TurnSwitch:
        return direction == Direction::On || direction == Direction::Off;
    }
    return false;
}

std::string to_string(const OperationKind& kind) {
    switch (kind.type) {
    case OperationType::PushButton:
        return "push";
    case OperationType::TuneKnob:
        return kind.direction == Direction::Clockwise ? "tune_cw" : "tune_ccw";
    case OperationType::TurnSwitch:
        return kind.direction == Direction::On ? "switch_on" : "switch_off";
    }
    return "?";
}

OperationKind parse_operation_kind(std::string_view text) {
    if (text == "push") return OperationKind::push();
    if (text == "tune_cw") return OperationKind::tune(Direction::Clockwise);
    if (text == "tune_ccw") return OperationKind::tune(Direction::CounterClockwise);
    if (text == "switch_on") return OperationKind::turn(Direction::On);
    if (text == "switch_off") return OperationKind::turn(Direction::Off);
    throw ParseError("unknown operation kind '" + std::string(text) + "'");
}

}  // namespace vrpanel
