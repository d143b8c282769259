#pragma once

#include <cmath>

namespace vrpanel {

// Position in the global (screen) frame, meters. x runs along the screen width,
// y up the screen height, z away from the screen surface toward the operator.
struct WorldPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const WorldPoint&, const WorldPoint&) = default;

    WorldPoint operator+(const WorldPoint& o) const { return {x + o.x, y + o.y, z + o.z}; }
    WorldPoint operator-(const WorldPoint& o) const { return {x - o.x, y - o.y, z - o.z}; }
    WorldPoint operator*(double s) const { return {x * s, y * s, z * s}; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const WorldPoint& a, const WorldPoint& b) { return (a - b).norm(); }

// Marker location in one camera image. Real-valued so sub-pixel centroids survive.
struct PixelCoord {
    double i = 0.0;
    double j = 0.0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
    bool finite() const { return std::isfinite(i) && std::isfinite(j); }
};

// Nominal CCD sensor.
inline constexpr int kSensorWidth = 768;
inline constexpr int kSensorHeight = 576;

}  // namespace vrpanel
