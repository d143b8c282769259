#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrpanel/geometry.hpp"

namespace vrpanel {

// Linear32 is the bare 3x2 pixel->world map (no offset); Affine33 applies a
// 3x3 matrix to the homogeneous pixel [i, j, 1].
enum class CalibrationMode { Linear32, Affine33 };

std::string to_string(CalibrationMode m);
CalibrationMode parse_calibration_mode(std::string_view text);

struct CalibrationMatrix {
    CalibrationMode mode = CalibrationMode::Affine33;
    // rows[r][c]; for Linear32 column 2 is unused and kept at zero.
    std::array<std::array<double, 3>, 3> rows{};

    static CalibrationMatrix linear(const std::array<std::array<double, 2>, 3>& a);
    static CalibrationMatrix affine(const std::array<std::array<double, 3>, 3>& a);

    int columns() const { return mode == CalibrationMode::Linear32 ? 2 : 3; }
    double max_abs_difference(const CalibrationMatrix& other) const;

    friend bool operator==(const CalibrationMatrix&, const CalibrationMatrix&) = default;
};

WorldPoint project_pixel(const CalibrationMatrix& a, const PixelCoord& p);

struct Correspondence {
    PixelCoord pixel;
    WorldPoint world;
};

// Least-squares fit of each world coordinate against the pixel design matrix.
// Throws InsufficientData (too few pairs) or DegenerateConfiguration (rank
// deficient pixel layout).
CalibrationMatrix calibrate_camera(std::span<const Correspondence> pairs, CalibrationMode mode);

// Root mean square of the world-space error |A p - w| over the pairs, meters.
double residual(const CalibrationMatrix& a, std::span<const Correspondence> pairs);

struct MarkerObservation {
    double time = 0.0;
    std::string camera;
    PixelCoord pixel;
    bool visible = true;
};

struct FusedPosition {
    double time = 0.0;
    WorldPoint point;
    int cameras_used = 0;

    friend bool operator==(const FusedPosition&, const FusedPosition&) = default;
};

using CalibrationSet = std::map<std::string, CalibrationMatrix>;

inline constexpr double kDefaultRejectThreshold = 0.10;

struct FusionConfig {
    // Cameras whose estimate lies farther than this from the componentwise
    // median are dropped before averaging.
    double reject_threshold_m = kDefaultRejectThreshold;
};

// Combines the visible observations of one instant into a single world point.
// Throws NoVisibleMarker when nothing is visible.
FusedPosition fuse(std::span<const MarkerObservation> obs, const CalibrationSet& cals,
                   const FusionConfig& cfg = {});

nlohmann::json calibration_to_json(const CalibrationSet& cals);
CalibrationSet calibration_from_json(const nlohmann::json& j);
CalibrationSet load_calibration(const std::filesystem::path& path);
void save_calibration(const CalibrationSet& cals, const std::filesystem::path& path);

}  // namespace vrpanel
