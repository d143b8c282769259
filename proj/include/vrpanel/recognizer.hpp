#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrpanel/calibration.hpp"
#include "vrpanel/operation.hpp"
#include "vrpanel/panel_model.hpp"

namespace vrpanel {

// Acquisition period of the detection side (25 Hz).
inline constexpr double kTick = 0.040;

// Tick index of a tick-aligned time, or nullopt when t is off the grid.
std::optional<std::int64_t> tick_index(double t);
inline double tick_time(std::int64_t k) { return static_cast<double>(k) * kTick; }

enum Finger { Thumb = 0, Index = 1, Middle = 2, Ring = 3, Little = 4 };

// One data-glove sample; each finger reads 0..255.
struct GloveFrame {
    double time = 0.0;
    std::array<int, 5> fingers{};

    bool valid() const;
    friend bool operator==(const GloveFrame&, const GloveFrame&) = default;
};

struct InputFrame {
    double time = 0.0;
    std::optional<FusedPosition> position;  // nullopt: marker occluded
    GloveFrame glove;

    friend bool operator==(const InputFrame&, const InputFrame&) = default;
};

enum class GestureClass { Open, Hold, Neutral };
std::string to_string(GestureClass g);

enum class GlovePolarity { HighIsFlexed, HighIsOpen };

struct RecognizerConfig {
    int open_threshold = 100;     // index below this (flexion) -> pointing finger open
    int hold_threshold = 180;     // all five at or above this -> hold grip
    double accel_threshold = 5.0; // m/s^2
    int tune_delta_threshold = 40;
    int window = 5;               // frames
    double refractory_s = 0.2;
    GlovePolarity polarity = GlovePolarity::HighIsFlexed;

    // Throws ValidationError.
    void validate() const;
};

nlohmann::json recognizer_config_to_json(const RecognizerConfig& cfg);
RecognizerConfig recognizer_config_from_json(const nlohmann::json& j);
RecognizerConfig load_recognizer_config(const std::filesystem::path& path);

// Finger value on the flexion scale (0 open .. 255 fully flexed).
int flexion(const GloveFrame& g, Finger f, GlovePolarity polarity);

GestureClass classify_gesture(const GloveFrame& g, const RecognizerConfig& cfg);

struct Kinematics {
    WorldPoint velocity;      // central difference at the middle sample
    WorldPoint acceleration;  // second difference

    double speed() const { return velocity.norm(); }
    double accel() const { return acceleration.norm(); }
};

// Finite differences over the last three samples of `window`. Throws
// InsufficientData with fewer than three samples.
Kinematics estimate_kinematics(std::span<const FusedPosition> window);

// Trailing history the detectors look at.
struct RecognizerState {
    std::deque<FusedPosition> positions;  // consecutive visible samples only
    std::deque<GloveFrame> gloves;
    std::map<std::string, double> last_fired;
    std::optional<std::int64_t> last_tick;
};

// Each detector inspects the state after `frame` has been ingested.
std::optional<OperationEvent> detect_push(const RecognizerState& state, const InputFrame& frame,
                                          const PanelModel& model, const RecognizerConfig& cfg);
std::optional<OperationEvent> detect_tune(const RecognizerState& state, const InputFrame& frame,
                                          const PanelModel& model, const RecognizerConfig& cfg);
std::optional<OperationEvent> detect_switch(const RecognizerState& state, const InputFrame& frame,
                                            const PanelModel& model, const RecognizerConfig& cfg);

// Ingests one frame and runs all detectors. Throws OrderingError for frames that
// are off the tick grid or not exactly one tick after the previous one.
std::vector<OperationEvent> step(RecognizerState& state, const InputFrame& frame,
                                 const PanelModel& model, const RecognizerConfig& cfg);

class Recognizer {
public:
    Recognizer(const PanelModel& model, RecognizerConfig cfg);

    std::vector<OperationEvent> step(const InputFrame& frame);
    const RecognizerState& state() const { return state_; }
    const RecognizerConfig& config() const { return cfg_; }

private:
    const PanelModel& model_;
    RecognizerConfig cfg_;
    RecognizerState state_;
};

}  // namespace vrpanel
