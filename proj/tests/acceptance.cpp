// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "support.hpp"
#include "table1_oracle.hpp"
#include "vrpanel/blend.hpp"
#include "vrpanel/calibration.hpp"
#include "vrpanel/errors.hpp"
#include "vrpanel/lockstep.hpp"
#include "vrpanel/logic_engine.hpp"
#include "vrpanel/render.hpp"
#include "vrpanel/run_config.hpp"
#include "vrpanel/session.hpp"
#include "vrpanel/session_log.hpp"
#include "vrpanel/synthetic_rig.hpp"
#include "vrpanel/synthetic_trace.hpp"
#include "vrpanel/trace.hpp"

extern char** environ;

using namespace vrpanel;
using Clock = std::chrono::steady_clock;

namespace {

// tolerances
constexpr double kFusionRmsLo = 0.005, kFusionRmsHi = 0.02;  // meters
constexpr double kRoundtripTol = 1e-9;
constexpr double kCalibrationBudget = 5.0;  // seconds
constexpr int kSessionSeconds = 60;
constexpr int kRecognitionRepeats = 100;
constexpr double kRateTol = 0.05;
constexpr double kLockstepBudget = 30.0;
constexpr double kWeightSumTol = 1e-9;
constexpr double kUniformTol = 1e-6;
constexpr double kMetricsTol = 1e-9;

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---- 1: calibration ----

Outcome calibration() {
    const auto t0 = Clock::now();
    Outcome o;
    std::ostringstream d;

    RigSimulator sim(load_rig(test::data("rig.json")));
    CalibrationSet cals;
    for (const auto& [id, pairs] : sim.calibration_pairs()) cals[id] = calibrate_camera(pairs, CalibrationMode::Affine33);
    const auto acc = measure_fusion_accuracy(sim, cals, 2000);
    const bool in_band = acc.rms_m >= kFusionRmsLo && acc.rms_m <= kFusionRmsHi;
    d << "fused rms " << acc.rms_m * 100.0 << " cm";

    // noise-free pairs from random generating matrices
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.02, 0.02), off(-3.0, 3.0), pi(0.0, 768.0), pj(0.0, 576.0);
    double worst = 0.0;
    for (auto mode : {CalibrationMode::Linear32, CalibrationMode::Affine33}) {
        for (int trial = 0; trial < 100; ++trial) {
            CalibrationMatrix a;
            a.mode = mode;
            for (auto& row : a.rows) row = {u(rng), u(rng), mode == CalibrationMode::Affine33 ? off(rng) : 0.0};
            std::vector<Correspondence> pairs;
            for (int k = 0; k < 12; ++k) {
                const PixelCoord p{pi(rng), pj(rng)};
                pairs.push_back({p, project_pixel(a, p)});
            }
            worst = std::max(worst, calibrate_camera(pairs, mode).max_abs_difference(a));
        }
    }
    d << ", roundtrip max diff " << worst;
    const double elapsed = seconds_since(t0);
    d << ", " << elapsed << " s";
    o.pass = in_band && worst < kRoundtripTol && elapsed < kCalibrationBudget;
    o.detail = d.str();
    return o;
}

// ---- 2: temporal contract ----

std::vector<InputFrame> minute_trace(const PanelModel& m) {
    TraceBuilder b(test::center_of(m, "Red"), gloves::kPointing);
    const char* order[] = {"Red", "White", "Left", "Right", "Yellow", "Black"};
    for (int round = 0; b.now() < kSessionSeconds - 5.0; ++round) {
        b.move_to(test::center_of(m, order[round % 6])).wait(0.3).press().wait(0.5);
        if (round % 4 == 3) b.occlude(0.2);
    }
    const auto want = static_cast<std::size_t>(kSessionSeconds * 25);
    while (b.frames().size() < want) b.wait(kTick);
    auto frames = b.build();
    frames.resize(want);
    return frames;
}

Outcome temporal() {
    const auto& m = test::figure2();
    const auto trace = minute_trace(m);
    SessionRunner runner(m, RecognizerConfig{}, "minute");
    runner.start();
    for (const auto& f : trace) runner.step(f);

    std::vector<double> times;
    for (const auto& r : runner.detection_log().records)
        if (std::holds_alternative<InputFrame>(r.payload)) times.push_back(r.time);
    std::vector<int> per_second(kSessionSeconds, 0);
    bool on_grid = true;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (std::abs(times[k] - tick_time(static_cast<std::int64_t>(k))) > 1e-9) on_grid = false;
        const auto s = static_cast<int>(std::floor(times[k] + 1e-9));
        if (s >= 0 && s < kSessionSeconds) ++per_second[s];
    }
    const bool steady = std::all_of(per_second.begin(), per_second.end(), [](int n) { return n == 25; });

    // a frame off the grid is refused
    bool refused = false;
    try {
        Recognizer r(m, {});
        InputFrame f{0.013, std::nullopt, {0.013, gloves::kRelaxed}};
        r.step(f);
    } catch (const OrderingError&) {
        refused = true;
    }

    std::ostringstream d;
    d << times.size() << " input records, " << runner.operations().size() << " operations, per-second counts "
      << (steady ? "all 25" : "uneven") << ", grid " << (on_grid ? "exact" : "violated") << ", off-grid frame "
      << (refused ? "refused" : "accepted");
    return {times.size() == static_cast<std::size_t>(kSessionSeconds * 25) && steady && on_grid && refused, d.str()};
}

// ---- 3: recognition ----

struct RecognitionCase {
    std::string name;
    const PanelModel* model;
    std::vector<InputFrame> trace;
    std::vector<std::pair<std::string, OperationKind>> expect;
};

std::vector<OperationEvent> recognize(const PanelModel& m, const std::vector<InputFrame>& frames) {
    Recognizer r(m, {});
    std::vector<OperationEvent> out;
    for (const auto& f : frames)
        for (auto& e : r.step(f)) out.push_back(std::move(e));
    return out;
}

std::vector<RecognitionCase> recognition_cases() {
    const auto& fig = test::figure2();
    const auto& con = test::console();
    const auto red = test::center_of(fig, "Red");
    auto gap = red;
    gap.x = 3.35;  // between Red and Yellow
    const auto knob = test::center_of(con, "K-1");
    const WorldPoint low{5.15, 0.35, 0.3}, high{5.15, 0.85, 0.3}, blank{2.5, 0.6, 0.3};
    auto press = [](WorldPoint at, std::array<int, 5> hand, double decel) {
        return TraceBuilder(at, hand).wait(0.2).press(decel).wait(0.4).build();
    };
    auto twist = [](WorldPoint at, std::array<int, 5> hand, Direction dir, int units) {
        return TraceBuilder(at, hand).wait(0.2).twist(dir, units, 5).wait(0.2).build();
    };
    auto flick = [](WorldPoint at, std::array<int, 5> hand, Direction dir, double decel) {
        return TraceBuilder(at, hand).wait(0.2).flick(dir, decel).wait(0.4).build();
    };
    const auto P = OperationKind::push();
    return {
        {"push ok", &fig, press(red, gloves::kPointing, 8.0), {{"Red", P}}},
        {"push outside zone", &fig, press(gap, gloves::kPointing, 8.0), {}},
        {"push without open hand", &fig, press(red, gloves::kHold, 8.0), {}},
        {"push below accel threshold", &fig, press(red, gloves::kPointing, 3.0), {}},
        {"tune cw ok", &con, twist(knob, gloves::kHold, Direction::Clockwise, 4),
         {{"K-1", OperationKind::tune(Direction::Clockwise)}}},
        {"tune ccw ok", &con, twist(knob, gloves::kHold, Direction::CounterClockwise, 4),
         {{"K-1", OperationKind::tune(Direction::CounterClockwise)}}},
        {"tune outside zone", &con, twist(blank, gloves::kHold, Direction::Clockwise, 4), {}},
        {"tune without hold", &con, twist(knob, gloves::kRelaxed, Direction::Clockwise, 4), {}},
        {"tune below glove threshold", &con, twist(knob, gloves::kHold, Direction::Clockwise, 2), {}},
        {"switch on ok", &con, flick(low, gloves::kHold, Direction::On, 8.0),
         {{"SW-1", OperationKind::turn(Direction::On)}}},
        {"switch off ok", &con, flick(high, gloves::kHold, Direction::Off, 8.0),
         {{"SW-1", OperationKind::turn(Direction::Off)}}},
        {"switch outside zone", &con, flick(blank, gloves::kHold, Direction::On, 8.0), {}},
        {"switch without hold", &con, flick(low, gloves::kPointing, Direction::On, 8.0), {}},
        {"switch below accel threshold", &con, flick(low, gloves::kHold, Direction::On, 3.0), {}},
    };
}

Outcome recognition() {
    const auto cases = recognition_cases();
    std::vector<std::string> bad;
    for (const auto& c : cases) {
        const auto first = recognize(*c.model, c.trace);
        bool ok = first.size() == c.expect.size();
        for (std::size_t i = 0; ok && i < first.size(); ++i)
            ok = first[i].widget == c.expect[i].first && first[i].kind == c.expect[i].second;
        for (int rep = 1; ok && rep < kRecognitionRepeats; ++rep) ok = recognize(*c.model, c.trace) == first;
        if (!ok) bad.push_back(c.name);
    }
    std::ostringstream d;
    d << cases.size() - bad.size() << "/" << cases.size() << " traces as expected over " << kRecognitionRepeats
      << " runs each";
    for (const auto& b : bad) d << "; wrong: " << b;
    return {bad.empty() && cases.size() >= 12, d.str()};
}

// ---- 4: logic table ----

oracle::Coarse coarse_of(const PanelState& s) {
    oracle::Coarse c;
    for (const auto& [id, l] : s.lights) c.lights[id] = l.mode == LightMode::On ? 'O' : l.mode == LightMode::Off ? 'o' : 'F';
    for (const auto& [id, m] : s.meters) c.meters[id] = m.on;
    for (const auto& [id, sc] : s.screens) c.screens[id] = {sc.on, sc.slide};
    return c;
}

Outcome logic_table() {
    const auto& m = test::figure2();
    std::set<oracle::Coarse> seen;
    std::deque<std::pair<PanelState, oracle::Coarse>> queue;
    queue.push_back({initial_state(m), oracle::initial()});
    seen.insert(queue.front().second);
    std::size_t transitions = 0, matches = 0;
    const bool initial_ok = coarse_of(queue.front().first) == queue.front().second;
    while (!queue.empty()) {
        auto [state, expect] = queue.front();
        queue.pop_front();
        for (const auto& b : oracle::kButtons) {
            auto want = expect;
            const auto cue = oracle::press(want, b);
            const auto [next, d] = apply(state, OperationEvent{0.0, b, OperationKind::push()}, m);
            ++transitions;
            const bool audio_ok = d.audio.size() == 1 && d.audio[0].name == cue;
            if (coarse_of(next) == want && audio_ok) ++matches;
            if (seen.insert(want).second) queue.push_back({next, want});
        }
    }
    std::ostringstream d;
    d << matches << "/" << transitions << " transitions match over " << seen.size() << " reachable states";
    return {initial_ok && matches == transitions, d.str()};
}

// ---- 5: lockstep ----

Outcome lockstep() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    const double base[3] = {u(rng), u(rng), u(rng)};

    SimulationSpec spec;
    spec.channels = 3;
    spec.frames = 500;
    spec.render_latency = [&](int c, std::int64_t) { return base[c]; };
    const auto r = simulate_lockstep(spec);
    const double slowest = *std::max_element(std::begin(base), std::end(base));
    const double expected = 1.0 / std::max(slowest, spec.tick_s);
    const bool rate_ok = std::abs(r.steady_rate_hz - expected) <= kRateTol * expected;

    // per-frame random latencies: skew only
    std::vector<std::vector<double>> lat(3, std::vector<double>(500));
    for (auto& row : lat)
        for (auto& v : row) v = u(rng);
    spec.render_latency = [&](int c, std::int64_t k) { return lat[c][k]; };
    const auto jitter = simulate_lockstep(spec);
    const auto again = simulate_lockstep(spec);

    const double elapsed = seconds_since(t0);
    std::ostringstream d;
    d << "latencies " << base[0] * 1000 << "/" << base[1] * 1000 << "/" << base[2] * 1000 << " ms, skew " << r.max_skew
      << ", rate " << r.steady_rate_hz << " Hz vs " << expected << " Hz; jittered skew " << jitter.max_skew << ", "
      << elapsed << " s";
    const bool ok = r.frames == 500 && r.max_skew <= 1 && rate_ok && jitter.frames == 500 && jitter.max_skew <= 1 &&
                    jitter.completion_times == again.completion_times && elapsed < kLockstepBudget;
    return {ok, d.str()};
}

// ---- 6: blending ----

Outcome blending() {
    std::mt19937_64 rng(99);
    const double width = 7.6;
    const RasterSpec raster{150.0, 2.0};
    double worst_sum = 0.0, worst_spread = 0.0;
    for (int n : {1, 2, 3, 5}) {
        const double core = width / n;
        const int max_px = static_cast<int>(std::floor(core / 2.0 * raster.pixels_per_meter));
        std::uniform_int_distribution<int> px(n == 1 ? 0 : 1, std::max(1, max_px));
        for (const auto& profile : {BlendProfile::linear(), BlendProfile::gamma_ramp(2.2)}) {
            for (int trial = 0; trial < 5; ++trial) {
                const double overlap = px(rng) / raster.pixels_per_meter;
                const auto cfgs = partition_screen(width, n, overlap);
                std::uniform_real_distribution<double> x(0.0, width);
                for (int k = 0; k < 10000; ++k) {
                    const double at = x(rng);
                    double sum = 0.0;
                    for (const auto& c : cfgs) sum += blend_weight(c, profile, at);
                    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
                }
                std::vector<Framebuffer> fbs;
                for (const auto& c : cfgs) fbs.push_back(uniform_channel(c, raster, profile, 1.0));
                const auto comp = composite(fbs, cfgs, raster);
                const auto [lo, hi] = std::minmax_element(comp.pixels.begin(), comp.pixels.end());
                worst_spread = std::max(worst_spread, *hi - *lo);
            }
        }
    }
    std::ostringstream d;
    d << "max |sum-1| " << worst_sum << ", composite max-min " << worst_spread;
    return {worst_sum <= kWeightSumTol && worst_spread < kUniformTol, d.str()};
}

// ---- 7: cross-process ----

struct Child {
    pid_t pid = -1;
    int out_fd = -1;
};

Child spawn(const std::vector<std::string>& args, bool capture) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    int fds[2] = {-1, -1};
    if (capture) {
        if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
        posix_spawn_file_actions_adddup2(&fa, fds[1], STDOUT_FILENO);
        posix_spawn_file_actions_addclose(&fa, fds[0]);
        posix_spawn_file_actions_addclose(&fa, fds[1]);
    } else {
        posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    }
    Child c;
    const int rc = posix_spawn(&c.pid, argv[0], &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    if (capture) {
        close(fds[1]);
        c.out_fd = fds[0];
    }
    if (rc != 0) throw std::runtime_error("cannot start " + args[0]);
    return c;
}

std::string read_line(int fd) {
    std::string line;
    char ch;
    while (read(fd, &ch, 1) == 1 && ch != '\n') line.push_back(ch);
    return line;
}

// Exit status, or -1 after killing it at the deadline.
int wait_for(pid_t pid, Clock::time_point deadline) {
    int status = 0;
    while (Clock::now() < deadline) {
        if (waitpid(pid, &status, WNOHANG) == pid) return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
    return -1;
}

std::filesystem::path config_in(const test::TempDir& dir, const std::string& name) {
    auto j = nlohmann::json::parse(std::ifstream(test::data("demo.run.json")));
    for (const char* key : {"panel", "recognizer", "trace", "script"})
        j[key] = test::data(j[key].get<std::string>()).string();
    j["output_dir"] = (dir / name).string();
    const auto path = dir / (name + ".json");
    std::ofstream(path) << j.dump(2);
    return path;
}

std::vector<std::string> deltas_of(const std::filesystem::path& log) {
    std::vector<std::string> out;
    for (const auto& r : load_log(log).records)
        if (const auto* d = std::get_if<StateDelta>(&r.payload)) out.push_back(delta_to_json(*d).dump());
    return out;
}

Outcome cross_process() {
    test::TempDir dir("accept");
    const std::string cli = VRPANEL_CLI;
    const auto run_cfg = config_in(dir, "single");
    const auto net_cfg = config_in(dir, "net");
    const auto deadline = Clock::now() + std::chrono::seconds(60);

    const auto single = spawn({cli, "run", "--config", run_cfg.string()}, false);
    const int run_rc = wait_for(single.pid, deadline);

    auto server = spawn({cli, "serve", "--config", net_cfg.string(), "--port", "0"}, true);
    const std::string banner = read_line(server.out_fd);
    const auto at = banner.rfind("listening on ", 0) == 0 ? banner.substr(13) : std::string{};
    if (at.empty()) {
        kill(server.pid, SIGKILL);
        waitpid(server.pid, nullptr, 0);
        close(server.out_fd);
        return {false, "serve printed '" + banner + "' instead of its address"};
    }
    std::vector<Child> channels;
    for (int id : {1, 2})
        channels.push_back(spawn({cli, "channel", "--config", net_cfg.string(), "--channel", std::to_string(id),
                                  "--connect", at},
                                 false));
    const int serve_rc = wait_for(server.pid, deadline);
    close(server.out_fd);
    int channel_rc = 0;
    for (auto& c : channels) channel_rc |= wait_for(c.pid, deadline) == 0 ? 0 : 1;
    if (run_rc != 0 || serve_rc != 0 || channel_rc != 0) {
        std::ostringstream d;
        d << "exit codes run " << run_rc << ", serve " << serve_rc << ", channels " << (channel_rc ? "failed" : "0");
        return {false, d.str()};
    }

    const auto a = deltas_of(dir / "single" / "logs" / "demo.server.jsonl");
    const auto b = deltas_of(dir / "net" / "logs" / "demo.server.jsonl");
    int equal_cores = 0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = ChannelRenderer::core_path(dir / "single" / "frames", c);
        const auto pb = ChannelRenderer::core_path(dir / "net" / "frames", c);
        const auto x = slurp(pa), y = slurp(pb);
        if (!x.empty() && x == y) ++equal_cores;
    }
    std::ostringstream d;
    d << "server at " << at << ", " << b.size() << " deltas (" << (a == b ? "equal to" : "differ from") << " run's "
      << a.size() << "), " << equal_cores << "/3 core PGMs byte-equal";
    return {!a.empty() && a == b && equal_cores == 3, d.str()};
}

// ---- 8: metrics ----

LogRecord stim(double t, const std::string& name) { return {t, Stimulus{name, ""}}; }
LogRecord op(double t, const std::string& widget) { return {t, OperationEvent{t, widget, OperationKind::push()}}; }

Outcome metrics() {
    std::ostringstream d;
    bool ok = true;

    // by hand: alarms at 1.0 and 5.0 answered at 1.48 and 5.9; the third alarm
    // at 9.0 never is. Average (0.48 + 0.9) / 2 = 0.69.
    SessionLog log{"m", LogSide::Server, {}};
    for (auto r : {stim(1.0, "alarm"), op(1.48, "Black"), stim(5.0, "alarm"), op(5.9, "Black"), stim(9.0, "alarm")})
        log.append(r);
    const auto st = response_times(log, is_stimulus("alarm"), is_operation("Black"), 3.0);
    const bool hand = st.count == 2 && st.misses == 1 && std::abs(st.average - 0.69) < kMetricsTol &&
                      std::abs(st.shortest - 0.48) < kMetricsTol && std::abs(st.longest - 0.9) < kMetricsTol;
    d << "hand example " << (hand ? "matches" : "differs") << " (avg " << st.average << ")";
    ok = ok && hand;

    // demo run: a session scored against its own operations, and its two logs
    const auto& m = test::figure2();
    const auto trace = load_trace(test::data("demo.trace.jsonl"));
    SessionRunner runner(m, RecognizerConfig{}, "demo");
    runner.start();
    for (const auto& f : trace) runner.step(f);
    const auto self = error_count(runner.detection_log(), runner.operations(), 1e-9);
    const auto disc = cross_check(runner.detection_log(), runner.server_log());
    d << "; self errors " << self.total() << "; cross-check discrepancies " << disc.size() << " over "
      << runner.operations().size() << " operations";
    ok = ok && self.total() == 0 && disc.empty() && !runner.operations().empty();
    return {ok, d.str()};
}

}  // namespace

int main() {
    ::unsetenv(kLogDirEnv);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"calibration accuracy and roundtrip", calibration},
        {"40 ms temporal contract over 60 s", temporal},
        {"recognition conditions and determinism", recognition},
        {"logic table over every reachable state", logic_table},
        {"lockstep skew and rate, 3 channels x 500 frames", lockstep},
        {"edge blend partition of unity", blending},
        {"cross-process run matches single-process run", cross_process},
        {"session metrics against hand-computed values", metrics},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
