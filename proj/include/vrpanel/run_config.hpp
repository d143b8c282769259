#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrpanel/blend.hpp"
#include "vrpanel/render.hpp"
#include "vrpanel/session_log.hpp"

namespace vrpanel {

inline constexpr const char* kLogDirEnv = "VRPANEL_LOG_DIR";

struct ChannelLayout {
    int count = 1;
    double overlap_m = 0.4;
    RasterSpec raster;
    BlendProfile blend;
};

// Paths are resolved against the config file's directory.
struct RunConfig {
    std::filesystem::path panel;
    std::filesystem::path recognizer;   // empty: defaults
    std::filesystem::path calibration;  // needed only for traces with raw observations
    std::filesystem::path trace;        // default trace for run/serve
    std::filesystem::path script;       // analysis script for the run report
    ChannelLayout channels;
    double tick_s = 0.040;
    std::optional<double> duration_s;  // truncate the trace
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    std::string session_id = "session";
    std::vector<StimulusRule> stimuli;
    std::string host = "127.0.0.1";
    std::uint16_t port = 7400;
    int timeout_ms = 5000;
    int dump_every = 0;
    bool pace = false;  // hold frames to the wall-clock tick

    // VRPANEL_LOG_DIR when set, else <output_dir>/logs.
    std::filesystem::path log_dir() const;
    std::filesystem::path frames_dir() const { return output_dir / "frames"; }

    // Throws ValidationError: missing files, duration <= 0, tick != 40 ms.
    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base);
RunConfig load_run_config(const std::filesystem::path& path);

struct ResponseSpec {
    std::string name;
    std::string stimulus;
    std::string widget;  // empty: any widget
    std::optional<OperationKind> kind;
    double window = 5.0;
};

// Expected operator behavior for error counting plus stimulus/response pairs.
struct AnalysisScript {
    std::vector<OperationEvent> operations;
    double tolerance = 0.5;
    std::vector<ResponseSpec> responses;
};

AnalysisScript script_from_json(const nlohmann::json& j);
AnalysisScript load_script(const std::filesystem::path& path);

}  // namespace vrpanel
