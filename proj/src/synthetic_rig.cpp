#include "vrpanel/synthetic_rig.hpp"

#include <cmath>
#include <fstream>

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

namespace {

WorldPoint cross(const WorldPoint& a, const WorldPoint& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double dot(const WorldPoint& a, const WorldPoint& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

WorldPoint normalized(const WorldPoint& v) { return v * (1.0 / v.norm()); }

WorldPoint point_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json point_to_json(const WorldPoint& p) { return json::array({p.x, p.y, p.z}); }

}  // namespace

std::optional<PixelCoord> PinholeCamera::project(const WorldPoint& p, int width, int height) const {
    const WorldPoint forward = normalized(target - position);
    const WorldPoint right = normalized(cross(forward, {0.0, 1.0, 0.0}));
    const WorldPoint up = cross(right, forward);
    const WorldPoint d = p - position;
    const double depth = dot(forward, d);
    if (depth <= 0.0) return std::nullopt;
    return PixelCoord{0.5 * width + focal_px * dot(right, d) / depth,
                      0.5 * height - focal_px * dot(up, d) / depth};
}

std::optional<PixelCoord> AffineCamera::project(const WorldPoint& p) const {
    // Invert the x/y rows: [x - a13, y - a23] = [[a11 a12] [a21 a22]] [i j].
    const auto& r = truth.rows;
    const double off = truth.mode == CalibrationMode::Affine33 ? 1.0 : 0.0;
    const double det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    if (std::abs(det) < 1e-300) return std::nullopt;
    const double bx = p.x - r[0][2] * off;
    const double by = p.y - r[1][2] * off;
    return PixelCoord{(bx * r[1][1] - by * r[0][1]) / det, (r[0][0] * by - r[1][0] * bx) / det};
}

std::optional<PixelCoord> RigCamera::project(const WorldPoint& p, int width, int height) const {
    if (pinhole) return pinhole->project(p, width, height);
    if (affine) return affine->project(p);
    return std::nullopt;
}

SyntheticRig SyntheticRig::paper_default() {
    SyntheticRig rig;
    const double distance = 8.0;
    const double spread = 1.5;
    const double focal = 700.0 * distance / rig.screen_width_m;
    const WorldPoint center{rig.screen_width_m / 2, rig.screen_height_m / 2, 0.0};
    const double xs[] = {center.x - spread, center.x + spread};
    const double ys[] = {0.0, rig.screen_height_m};
    int n = 0;
    for (double y : ys) {
        for (double x : xs) {
            RigCamera cam;
            cam.id = "cam" + std::to_string(n++);
            cam.pinhole = PinholeCamera{{x, y, distance}, center, focal};
            rig.cameras.push_back(std::move(cam));
        }
    }
    return rig;
}

std::vector<WorldPoint> SyntheticRig::calibration_grid() const {
    std::vector<WorldPoint> pts;
    const double x0 = grid_margin_m, x1 = screen_width_m - grid_margin_m;
    const double y0 = grid_margin_m, y1 = screen_height_m - grid_margin_m;
    for (int r = 0; r < grid_rows; ++r) {
        for (int c = 0; c < grid_cols; ++c) {
            const double u = grid_cols > 1 ? static_cast<double>(c) / (grid_cols - 1) : 0.5;
            const double v = grid_rows > 1 ? static_cast<double>(r) / (grid_rows - 1) : 0.5;
            pts.push_back({x0 + u * (x1 - x0), y0 + v * (y1 - y0), 0.0});
        }
    }
    return pts;
}

RigSimulator::RigSimulator(SyntheticRig rig) : rig_(std::move(rig)), rng_(rig_.seed) {}

std::optional<PixelCoord> RigSimulator::observe_pixel(const RigCamera& cam, const WorldPoint& p) {
    auto px = cam.project(p, rig_.sensor_width, rig_.sensor_height);
    if (!px) return std::nullopt;
    if (rig_.noise_sigma_px > 0.0) {
        std::normal_distribution<double> noise(0.0, rig_.noise_sigma_px);
        px->i += noise(rng_);
        px->j += noise(rng_);
    }
    if (rig_.quantize) {
        px->i = std::round(px->i);
        px->j = std::round(px->j);
    }
    if (cam.pinhole && (px->i < 0.0 || px->i >= rig_.sensor_width || px->j < 0.0 ||
                        px->j >= rig_.sensor_height))
        return std::nullopt;
    return px;
}

std::vector<MarkerObservation> RigSimulator::observe(const WorldPoint& p, double time) {
    std::vector<MarkerObservation> out;
    for (const auto& cam : rig_.cameras) {
        auto px = observe_pixel(cam, p);
        out.push_back({time, cam.id, px.value_or(PixelCoord{}), px.has_value()});
    }
    return out;
}

std::map<std::string, std::vector<Correspondence>> RigSimulator::calibration_pairs() {
    std::map<std::string, std::vector<Correspondence>> out;
    const auto grid = rig_.calibration_grid();
    for (const auto& cam : rig_.cameras) {
        auto& pairs = out[cam.id];
        for (const auto& w : grid)
            if (auto px = observe_pixel(cam, w)) pairs.push_back({*px, w});
    }
    return out;
}

FusionAccuracy measure_fusion_accuracy(RigSimulator& sim, const CalibrationSet& cals,
                                       std::size_t samples, const FusionConfig& cfg) {
    std::mt19937_64 rng(sim.rig().seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> ux(0.0, sim.rig().screen_width_m);
    std::uniform_real_distribution<double> uy(0.0, sim.rig().screen_height_m);
    FusionAccuracy acc;
    double ss = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const WorldPoint truth{ux(rng), uy(rng), 0.0};
        const auto obs = sim.observe(truth, 0.0);
        const double err = distance(fuse(obs, cals, cfg).point, truth);
        ss += err * err;
        acc.max_m = std::max(acc.max_m, err);
    }
    acc.samples = samples;
    acc.rms_m = samples ? std::sqrt(ss / static_cast<double>(samples)) : 0.0;
    return acc;
}

json rig_to_json(const SyntheticRig& rig) {
    json cams = json::array();
    for (const auto& c : rig.cameras) {
        json cj = {{"id", c.id}};
        if (c.pinhole) {
            cj["position"] = point_to_json(c.pinhole->position);
            cj["target"] = point_to_json(c.pinhole->target);
            cj["focal_px"] = c.pinhole->focal_px;
        } else if (c.affine) {
            cj["affine"] = calibration_to_json({{"m", c.affine->truth}})["m"]["rows"];
        }
        cams.push_back(std::move(cj));
    }
    return {{"sensor", {rig.sensor_width, rig.sensor_height}},
            {"screen", {rig.screen_width_m, rig.screen_height_m}},
            {"noise_sigma_px", rig.noise_sigma_px},
            {"quantize", rig.quantize},
            {"seed", rig.seed},
            {"grid", {{"cols", rig.grid_cols}, {"rows", rig.grid_rows}, {"margin_m", rig.grid_margin_m}}},
            {"cameras", std::move(cams)}};
}

SyntheticRig rig_from_json(const json& j) {
    SyntheticRig rig;
    try {
        if (j.contains("sensor")) {
            rig.sensor_width = j.at("sensor").at(0).get<int>();
            rig.sensor_height = j.at("sensor").at(1).get<int>();
        }
        if (j.contains("screen")) {
            rig.screen_width_m = j.at("screen").at(0).get<double>();
            rig.screen_height_m = j.at("screen").at(1).get<double>();
        }
        rig.noise_sigma_px = j.value("noise_sigma_px", 0.0);
        rig.quantize = j.value("quantize", true);
        rig.seed = j.value("seed", std::uint64_t{1});
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            rig.grid_cols = g.value("cols", rig.grid_cols);
            rig.grid_rows = g.value("rows", rig.grid_rows);
            rig.grid_margin_m = g.value("margin_m", rig.grid_margin_m);
        }
        if (!j.contains("cameras")) {
            rig.cameras = SyntheticRig::paper_default().cameras;
        } else {
            for (const auto& cj : j.at("cameras")) {
                RigCamera cam;
                cam.id = cj.at("id").get<std::string>();
                if (cj.contains("affine")) {
                    json wrapped = {{"m", {{"mode", "affine33"}, {"rows", cj.at("affine")}}}};
                    cam.affine = AffineCamera{calibration_from_json(wrapped).at("m")};
                } else {
                    cam.pinhole = PinholeCamera{point_from_json(cj.at("position")),
                                                point_from_json(cj.at("target")),
                                                cj.at("focal_px").get<double>()};
                }
                rig.cameras.push_back(std::move(cam));
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("rig config: ") + e.what());
    }
    if (rig.sensor_width <= 0 || rig.sensor_height <= 0)
        throw ValidationError("rig sensor dimensions must be positive");
    if (rig.noise_sigma_px < 0.0) throw ValidationError("rig noise sigma must be >= 0");
    return rig;
}

SyntheticRig load_rig(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open rig config " + path.string());
    try {
        return rig_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

json pairs_to_json(const std::map<std::string, std::vector<Correspondence>>& pairs) {
    json out = json::object();
    for (const auto& [id, list] : pairs) {
        json arr = json::array();
        for (const auto& c : list)
            arr.push_back({{"pixel", {c.pixel.i, c.pixel.j}}, {"world", point_to_json(c.world)}});
        out[id] = std::move(arr);
    }
    return out;
}

std::map<std::string, std::vector<Correspondence>> pairs_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("pairs file must map camera ids to correspondence lists");
    std::map<std::string, std::vector<Correspondence>> out;
    try {
        for (const auto& [id, arr] : j.items()) {
            auto& list = out[id];
            for (const auto& c : arr)
                list.push_back({{c.at("pixel").at(0).get<double>(), c.at("pixel").at(1).get<double>()},
                                point_from_json(c.at("world"))});
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("pairs file: ") + e.what());
    }
    return out;
}

}  // namespace vrpanel
