#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "vrpanel/calibration.hpp"
#include "vrpanel/recognizer.hpp"

namespace vrpanel {

// One trace line: {"t": 0.04, "pos": [x, y, z] | null, "glove": [5 ints]}.
// Lines may carry raw camera observations instead of "pos":
//   "obs": [{"camera": "cam0", "i": 310.0, "j": 200.0, "visible": true}, ...]
// which are fused with the supplied calibration.
nlohmann::json frame_to_json(const InputFrame& frame);
InputFrame frame_from_json(const nlohmann::json& j, const CalibrationSet* cals = nullptr,
                           const FusionConfig& fusion = {});

// Throws ParseError naming the 1-based line number on malformed input.
std::vector<InputFrame> read_trace(std::istream& in, const CalibrationSet* cals = nullptr,
                                   const FusionConfig& fusion = {});
std::vector<InputFrame> load_trace(const std::filesystem::path& path,
                                   const CalibrationSet* cals = nullptr,
                                   const FusionConfig& fusion = {});
void save_trace(const std::vector<InputFrame>& frames, const std::filesystem::path& path);

}  // namespace vrpanel
