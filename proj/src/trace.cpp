#include "vrpanel/trace.hpp"

#include <fstream>
#include <istream>
#include <string>

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

json frame_to_json(const InputFrame& f) {
    json j = {{"t", f.time}};
    if (f.position) {
        const auto& p = f.position->point;
        j["pos"] = {p.x, p.y, p.z};
        if (f.position->cameras_used != 1) j["cams"] = f.position->cameras_used;
    } else {
        j["pos"] = nullptr;
    }
    j["glove"] = f.glove.fingers;
    return j;
}

InputFrame frame_from_json(const json& j, const CalibrationSet* cals, const FusionConfig& fusion) {
    if (!j.is_object()) throw ParseError("trace frame must be a JSON object");
    InputFrame f;
    f.time = j.at("t").get<double>();
    f.glove.time = f.time;
    const auto& glove = j.at("glove");
    if (!glove.is_array() || glove.size() != 5) throw ParseError("glove must hold 5 finger values");
    for (int k = 0; k < 5; ++k) f.glove.fingers[k] = glove.at(k).get<int>();
    if (!f.glove.valid()) throw ParseError("glove values must lie in [0, 255]");

    if (j.contains("pos") && !j.at("pos").is_null()) {
        const auto& p = j.at("pos");
        if (!p.is_array() || p.size() != 3) throw ParseError("pos must be [x, y, z] or null");
        f.position = FusedPosition{f.time, {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()},
                                   j.value("cams", 1)};
        if (!f.position->point.finite()) throw ParseError("pos must be finite");
    } else if (j.contains("obs")) {
        if (!cals) throw ParseError("frame carries camera observations but no calibration was given");
        std::vector<MarkerObservation> obs;
        for (const auto& o : j.at("obs"))
            obs.push_back({f.time, o.at("camera").get<std::string>(),
                           {o.at("i").get<double>(), o.at("j").get<double>()}, o.value("visible", true)});
        try {
            f.position = fuse(obs, *cals, fusion);
        } catch (const NoVisibleMarker&) {
            f.position.reset();
        }
    }
    return f;
}

std::vector<InputFrame> read_trace(std::istream& in, const CalibrationSet* cals,
                                   const FusionConfig& fusion) {
    std::vector<InputFrame> frames;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            frames.push_back(frame_from_json(json::parse(line), cals, fusion));
        } catch (const json::exception& e) {
            throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return frames;
}

std::vector<InputFrame> load_trace(const std::filesystem::path& path, const CalibrationSet* cals,
                                   const FusionConfig& fusion) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace " + path.string());
    return read_trace(in, cals, fusion);
}

void save_trace(const std::vector<InputFrame>& frames, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Runtime, "cannot write trace " + path.string());
    for (const auto& f : frames) out << frame_to_json(f).dump() << '\n';
}

}  // namespace vrpanel
