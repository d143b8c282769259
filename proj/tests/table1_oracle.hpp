#pragma once

// Hand transcription of the control-logic relation matrix for the figure2
// panel, written without looking at the panel file. Deliberately uses its own
// plain types so it shares nothing with the engine.

#include <array>
#include <map>
#include <string>
#include <tuple>

namespace oracle {

// 'o' off, 'O' on, 'F' flicker
struct Coarse {
    std::map<std::string, char> lights;
    std::map<std::string, bool> meters;
    std::map<std::string, std::pair<bool, int>> screens;  // on, slide

    auto key() const { return std::tie(lights, meters, screens); }
    friend bool operator<(const Coarse& a, const Coarse& b) { return a.key() < b.key(); }
    friend bool operator==(const Coarse& a, const Coarse& b) { return a.key() == b.key(); }
};

inline const std::array<std::string, 8> kLights{"R-1", "R-2", "R-3", "Y-1", "Y-2", "Y-3", "G-1", "G-2"};
inline const std::array<std::string, 6> kMeters{"M-1", "M-2", "M-3", "M-4", "M-5", "M-6"};
inline const std::array<std::string, 6> kButtons{"Red", "Yellow", "White", "Black", "Left", "Right"};
inline constexpr int kSlides = 8;

// Default row: R-3 and Y-3 flicker; screens show their first slide.
inline Coarse initial() {
    Coarse s;
    for (const auto& l : kLights) s.lights[l] = 'o';
    s.lights["R-3"] = 'F';
    s.lights["Y-3"] = 'F';
    for (const auto& m : kMeters) s.meters[m] = false;
    s.screens["screen-left"] = {true, 0};
    s.screens["screen-right"] = {true, 0};
    return s;
}

// Returns the audio cue; mutates s.
inline std::string press(Coarse& s, const std::string& button) {
    auto next_slide = [&](const std::string& id) {
        auto& sc = s.screens[id];
        sc.first = true;
        sc.second = (sc.second + 1) % kSlides;
    };
    if (button == "Red") {
        s.lights["R-1"] = s.lights["R-2"] = 'O';
        return "alarm";
    }
    if (button == "Yellow") {
        s.lights["Y-1"] = s.lights["Y-2"] = 'O';
        return "caution";
    }
    if (button == "White") {
        s.lights["R-1"] = s.lights["R-2"] = s.lights["Y-1"] = s.lights["Y-2"] = 'O';
        s.meters["M-6"] = true;  // the single meter column, bound to the rightmost meter
        return "audio_a";
    }
    if (button == "Black") {
        for (const char* l : {"R-1", "R-2", "Y-1", "Y-2", "G-1", "G-2"}) s.lights[l] = 'o';
        s.screens["screen-left"].first = false;
        s.screens["screen-right"].first = false;
        for (const auto& m : kMeters) s.meters[m] = false;
        return "audio_b";
    }
    if (button == "Left") {
        s.lights["G-1"] = 'O';
        next_slide("screen-left");
        return "audio_c";
    }
    if (button == "Right") {
        s.lights["G-2"] = 'O';
        next_slide("screen-right");
        return "audio_d";
    }
    return "";
}

}  // namespace oracle
