#include "vrpanel/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "vrpanel/errors.hpp"
#include "vrpanel/recognizer.hpp"

namespace vrpanel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    const fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
}

json read_json(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ValidationError(std::string("cannot open ") + what + " " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace

fs::path RunConfig::log_dir() const {
    if (const char* env = std::getenv(kLogDirEnv); env && *env) return env;
    return output_dir / "logs";
}

void RunConfig::validate() const {
    const auto must_exist = [](const fs::path& p, const char* what, bool required) {
        if (p.empty()) {
            if (required) throw ValidationError(std::string("run config: ") + what + " is required");
            return;
        }
        if (!fs::exists(p)) throw ValidationError(std::string("run config: ") + what + " " + p.string() + " does not exist");
    };
    must_exist(panel, "panel", true);
    must_exist(recognizer, "recognizer", false);
    must_exist(calibration, "calibration", false);
    must_exist(trace, "trace", false);
    must_exist(script, "script", false);
    if (duration_s && !(*duration_s > 0.0)) throw ValidationError("run config: duration must be positive");
    if (std::abs(tick_s - kTick) > 1e-12) throw ValidationError("run config: tick must be 0.040 s");
    if (channels.count < 1) throw ValidationError("run config: channel count must be at least 1");
    if (channels.overlap_m < 0.0) throw ValidationError("run config: negative overlap");
    if (session_id.empty()) throw ValidationError("run config: empty session id");
}

RunConfig run_config_from_json(const json& j, const fs::path& base) {
    RunConfig c;
    try {
        c.panel = resolve(j, "panel", base);
        c.recognizer = resolve(j, "recognizer", base);
        c.calibration = resolve(j, "calibration", base);
        c.trace = resolve(j, "trace", base);
        c.script = resolve(j, "script", base);
        if (j.contains("output_dir")) c.output_dir = resolve(j, "output_dir", base);
        if (j.contains("channels")) {
            const auto& ch = j.at("channels");
            c.channels.count = ch.value("count", 1);
            c.channels.overlap_m = ch.value("overlap_m", 0.4);
            c.channels.raster.pixels_per_meter = ch.value("pixels_per_meter", kDefaultPixelsPerMeter);
            const std::string blend = ch.value("blend", std::string{"linear"});
            if (blend == "linear")
                c.channels.blend = BlendProfile::linear();
            else if (blend == "gamma")
                c.channels.blend = BlendProfile::gamma_ramp(ch.value("gamma", 2.2));
            else if (blend == "none")
                c.channels.blend = BlendProfile::disabled();
            else
                throw ValidationError("run config: unknown blend '" + blend + "'");
        }
        c.tick_s = j.value("tick_s", kTick);
        if (j.contains("duration_s")) c.duration_s = j.at("duration_s").get<double>();
        c.seed = j.value("seed", std::uint64_t{1});
        c.session_id = j.value("session_id", std::string{"session"});
        if (j.contains("stimuli"))
            for (const auto& s : j.at("stimuli")) c.stimuli.push_back(stimulus_rule_from_json(s));
        if (j.contains("server")) {
            const auto& s = j.at("server");
            c.host = s.value("host", c.host);
            c.port = s.value("port", c.port);
            c.timeout_ms = s.value("timeout_ms", c.timeout_ms);
        }
        c.dump_every = j.value("dump_every", 0);
        c.pace = j.value("pace", false);
    } catch (const json::exception& e) {
        throw ParseError(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(read_json(path, "run config"), path.parent_path());
}

AnalysisScript script_from_json(const json& j) {
    AnalysisScript s;
    try {
        if (j.contains("operations"))
            for (const auto& op : j.at("operations")) s.operations.push_back(operation_from_json(op));
        s.tolerance = j.value("tolerance", 0.5);
        if (j.contains("responses")) {
            for (const auto& r : j.at("responses")) {
                ResponseSpec spec;
                spec.stimulus = r.at("stimulus").get<std::string>();
                spec.name = r.value("name", spec.stimulus);
                spec.widget = r.value("widget", std::string{});
                if (r.contains("op")) spec.kind = parse_operation_kind(r.at("op").get<std::string>());
                spec.window = r.value("window", 5.0);
                s.responses.push_back(spec);
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("analysis script: ") + e.what());
    }
    for (std::size_t i = 1; i < s.operations.size(); ++i)
        if (s.operations[i].time < s.operations[i - 1].time)
            throw ValidationError("analysis script: operations out of time order");
    return s;
}

AnalysisScript load_script(const fs::path& path) { return script_from_json(read_json(path, "analysis script")); }

}  // namespace vrpanel
