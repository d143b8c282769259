#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrpanel/calibration.hpp"

namespace vrpanel {

// Ideal pinhole camera aimed at `target`, no lens distortion.
struct PinholeCamera {
    WorldPoint position;
    WorldPoint target;
    double focal_px = 700.0;

    // Image of a world point, or nullopt when it is behind the camera.
    std::optional<PixelCoord> project(const WorldPoint& p, int width, int height) const;
};

// Camera whose ground truth is itself an Affine33 pixel->world map (for the
// recover-the-generating-matrix checks). Only points on the plane it images
// are meaningful.
struct AffineCamera {
    CalibrationMatrix truth;
    std::optional<PixelCoord> project(const WorldPoint& p) const;
};

struct RigCamera {
    std::string id;
    std::optional<PinholeCamera> pinhole;
    std::optional<AffineCamera> affine;

    std::optional<PixelCoord> project(const WorldPoint& p, int width, int height) const;
};

// Simulated multi-camera tracking rig viewing the screen plane z = 0.
struct SyntheticRig {
    int sensor_width = kSensorWidth;
    int sensor_height = kSensorHeight;
    double screen_width_m = 7.6;
    double screen_height_m = 2.0;
    double noise_sigma_px = 0.0;  // Gaussian pixel noise
    bool quantize = true;         // round to whole pixels (+-0.5 px)
    std::uint64_t seed = 1;
    int grid_cols = 4;
    int grid_rows = 3;
    double grid_margin_m = 0.2;
    std::vector<RigCamera> cameras;

    // Four cameras 8 m in front of the screen at the corners of a 3 m x 2 m
    // frame, all aimed at the screen center.
    static SyntheticRig paper_default();

    std::vector<WorldPoint> calibration_grid() const;
};

class RigSimulator {
public:
    explicit RigSimulator(SyntheticRig rig);

    const SyntheticRig& rig() const { return rig_; }

    // Pixel image of p in one camera with noise and quantization applied, or
    // nullopt when it falls outside the sensor.
    std::optional<PixelCoord> observe_pixel(const RigCamera& cam, const WorldPoint& p);

    std::vector<MarkerObservation> observe(const WorldPoint& p, double time);

    // Grid correspondences per camera for calibration.
    std::map<std::string, std::vector<Correspondence>> calibration_pairs();

private:
    SyntheticRig rig_;
    std::mt19937_64 rng_;
};

struct FusionAccuracy {
    double rms_m = 0.0;
    double max_m = 0.0;
    std::size_t samples = 0;
};

// Fused-position error over `samples` uniformly random screen points.
FusionAccuracy measure_fusion_accuracy(RigSimulator& sim, const CalibrationSet& cals,
                                       std::size_t samples, const FusionConfig& cfg = {});

nlohmann::json rig_to_json(const SyntheticRig& rig);
SyntheticRig rig_from_json(const nlohmann::json& j);
SyntheticRig load_rig(const std::filesystem::path& path);

// Pairs file: {"camera-id": [{"pixel":[i,j], "world":[x,y,z]}, ...], ...}
nlohmann::json pairs_to_json(const std::map<std::string, std::vector<Correspondence>>& pairs);
std::map<std::string, std::vector<Correspondence>> pairs_from_json(const nlohmann::json& j);

}  // namespace vrpanel
