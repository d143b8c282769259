#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "vrpanel/panel_model.hpp"
#include "vrpanel/recognizer.hpp"

namespace test {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(VRPANEL_DATA_DIR) / name; }

inline const vrpanel::PanelModel& figure2() {
    static const vrpanel::PanelModel m = vrpanel::load_panel(data("figure2.panel.json"));
    return m;
}

inline const vrpanel::PanelModel& console() {
    static const vrpanel::PanelModel m = vrpanel::load_panel(data("console.panel.json"));
    return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("vrpanel-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline vrpanel::WorldPoint center_of(const vrpanel::PanelModel& m, const std::string& id, double z = 0.3) {
    const auto& zone = m.at(id).zone;
    return {zone.x + zone.w / 2.0, zone.y + zone.h / 2.0, z};
}

}  // namespace test
