#include "vrpanel/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "vrpanel/calibration.hpp"
#include "vrpanel/errors.hpp"
#include "vrpanel/lockstep.hpp"
#include "vrpanel/run_config.hpp"
#include "vrpanel/session.hpp"
#include "vrpanel/synthetic_rig.hpp"
#include "vrpanel/synthetic_trace.hpp"
#include "vrpanel/trace.hpp"
#include "vrpanel/transport.hpp"
#include "vrpanel/ui_bridge.hpp"

namespace vrpanel {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->kind()) {
        case ErrorKind::BadInput:
            return kExitBadInput;
        case ErrorKind::Network:
            return kExitNetwork;
        case ErrorKind::Runtime:
            return kExitRuntime;
        }
    }
    if (dynamic_cast<const json::exception*>(&e)) return kExitBadInput;
    return kExitRuntime;
}

std::atomic<bool>& interrupt_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

struct Session {
    RunConfig cfg;
    PanelModel model;
    RecognizerConfig recognizer;
    std::optional<CalibrationSet> calibration;
};

Session load_session(const fs::path& config_path) {
    Session s;
    s.cfg = load_run_config(config_path);
    s.model = load_panel(s.cfg.panel);
    if (!s.cfg.recognizer.empty()) s.recognizer = load_recognizer_config(s.cfg.recognizer);
    if (!s.cfg.calibration.empty()) s.calibration = load_calibration(s.cfg.calibration);
    return s;
}

std::vector<InputFrame> session_trace(const Session& s, const std::string& override_path) {
    const fs::path path = override_path.empty() ? s.cfg.trace : fs::path(override_path);
    if (path.empty()) throw ValidationError("no trace given (--trace or \"trace\" in the run config)");
    auto frames = load_trace(path, s.calibration ? &*s.calibration : nullptr);
    if (s.cfg.duration_s) {
        const double limit = *s.cfg.duration_s - kTick / 2.0;
        std::erase_if(frames, [limit](const InputFrame& f) { return f.time > limit; });
    }
    return frames;
}

std::vector<std::unique_ptr<ChannelRenderer>> make_renderers(const Session& s, const std::vector<ChannelConfig>& configs) {
    std::vector<std::unique_ptr<ChannelRenderer>> out;
    for (const auto& c : configs)
        out.push_back(std::make_unique<ChannelRenderer>(s.model, c, s.cfg.channels.raster, s.cfg.channels.blend,
                                                        s.cfg.frames_dir(), s.cfg.dump_every));
    return out;
}

json stats_json(const std::string& name, const ResponseStats& st) {
    json j{{"name", name}, {"count", st.count}, {"misses", st.misses}, {"defined", st.defined}};
    if (st.defined) {
        j["shortest"] = st.shortest;
        j["average"] = st.average;
        j["longest"] = st.longest;
    }
    return j;
}

json analysis_json(const SessionLog& detection, const SessionLog& server, const AnalysisScript* script) {
    json j;
    json responses = json::array();
    if (script) {
        for (const auto& r : script->responses)
            responses.push_back(stats_json(
                r.name, response_times(server, detection, is_stimulus(r.stimulus), is_operation(r.widget, r.kind), r.window)));
        if (!script->operations.empty()) {
            const auto rep = error_count(detection, script->operations, script->tolerance);
            json missed = json::array(), extra = json::array();
            for (const auto& op : rep.missed) missed.push_back(operation_to_json(op));
            for (const auto& op : rep.extraneous) extra.push_back(operation_to_json(op));
            j["errors"] = {{"total", rep.total()}, {"missed", missed}, {"extraneous", extra}};
        }
    }
    j["responses"] = responses;
    return j;
}

json session_report(const SessionRunner& runner, std::int64_t frames, const AnalysisScript* script) {
    json ops = json::array();
    for (const auto& op : runner.operations()) ops.push_back(operation_to_json(op));
    json lights_on = json::array(), meters_on = json::array(), screens_on = json::array();
    const auto& st = runner.state();
    for (const auto& [id, l] : st.lights)
        if (l.mode != LightMode::Off) lights_on.push_back(id);
    for (const auto& [id, m] : st.meters)
        if (m.on) meters_on.push_back(id);
    for (const auto& [id, sc] : st.screens)
        if (sc.on) screens_on.push_back(id);
    json j{{"session_id", runner.server_log().session_id},
           {"frames", frames},
           {"operation_count", runner.operations().size()},
           {"operations", ops},
           {"lights_on", lights_on},
           {"meters_on", meters_on},
           {"screens_on", screens_on},
           {"state_hash", state_hash(st)}};
    j.update(analysis_json(runner.detection_log(), runner.server_log(), script));
    return j;
}

std::string list_or_none(const json& arr) {
    if (arr.empty()) return "none";
    std::string s;
    for (const auto& v : arr) s += (s.empty() ? "" : " ") + v.get<std::string>();
    return s;
}

void print_analysis(const json& j, std::ostream& out) {
    for (const auto& r : j.at("responses")) {
        out << "response " << r.at("name").get<std::string>() << ": count " << r.at("count") << ", misses "
            << r.at("misses");
        if (r.at("defined").get<bool>())
            out << std::fixed << std::setprecision(3) << ", shortest " << r.at("shortest").get<double>() << " s, average "
                << r.at("average").get<double>() << " s, longest " << r.at("longest").get<double>() << " s"
                << std::defaultfloat;
        out << '\n';
    }
    if (j.contains("errors")) {
        const auto& e = j.at("errors");
        out << "errors: " << e.at("total") << " (" << e.at("missed").size() << " missed, " << e.at("extraneous").size()
            << " extraneous)\n";
    }
    if (j.contains("discrepancies")) {
        out << "discrepancies: " << j.at("discrepancies").size() << '\n';
        for (const auto& d : j.at("discrepancies")) out << "  " << d.get<std::string>() << '\n';
    }
}

void print_report(const json& j, std::ostream& out) {
    out << "session " << j.at("session_id").get<std::string>() << ": " << j.at("frames") << " frames, "
        << j.at("operation_count") << " operations\n";
    for (const auto& op : j.at("operations"))
        out << "  t=" << std::fixed << std::setprecision(3) << op.at("t").get<double>() << std::defaultfloat << ' '
            << op.at("op").get<std::string>() << ' ' << op.at("widget").get<std::string>() << '\n';
    out << "lights on: " << list_or_none(j.at("lights_on")) << '\n'
        << "meters on: " << list_or_none(j.at("meters_on")) << '\n'
        << "screens on: " << list_or_none(j.at("screens_on")) << '\n'
        << "state hash: " << j.at("state_hash").get<std::string>() << '\n';
    print_analysis(j, out);
}

void emit_report(const json& j, bool as_json, std::ostream& out) {
    if (as_json)
        out << j.dump(2) << '\n';
    else
        print_report(j, out);
}

std::optional<AnalysisScript> optional_script(const fs::path& path) {
    if (path.empty()) return std::nullopt;
    return load_script(path);
}

// Runs the lockstep loop with the given slave links, the server rendering
// channel 0 itself. Returns the number of frames.
std::int64_t serve_frames(SessionRunner& runner, const std::vector<InputFrame>& trace,
                          std::vector<std::unique_ptr<Connection>> links, ChannelRenderer& local, const RunConfig& cfg,
                          const std::set<int>& expected_ids) {
    LockstepServer server(std::move(links), {Millis{cfg.timeout_ms}, cfg.pace, kTick});
    server.handshake();
    for (int id : server.channel_ids())
        if (!expected_ids.count(id))
            throw ProtocolViolation("channel " + std::to_string(id) + " is not part of the " +
                                    std::to_string(cfg.channels.count) + "-channel layout");
    runner.start();
    return server.run(session_hooks(runner, trace, &local), &interrupt_flag());
}

// ---- subcommands ----

struct CalibrateArgs {
    std::string rig, pairs, out, write_pairs, mode = "affine33";
    std::size_t samples = 0;
    bool json = false;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
    RigSimulator sim(load_rig(a.rig));
    const auto pairs = a.pairs.empty() ? sim.calibration_pairs() : pairs_from_json(read_json_file(a.pairs));
    if (!a.write_pairs.empty()) std::ofstream(a.write_pairs) << pairs_to_json(pairs).dump(2) << '\n';
    const auto mode = parse_calibration_mode(a.mode);

    CalibrationSet cals;
    json report{{"mode", a.mode}, {"cameras", json::object()}};
    for (const auto& [cam, list] : pairs) {
        cals[cam] = calibrate_camera(list, mode);
        report["cameras"][cam] = {{"points", list.size()}, {"residual_rms_m", residual(cals[cam], list)}};
    }
    if (!a.out.empty()) save_calibration(cals, a.out);
    if (a.samples > 0) {
        const auto acc = measure_fusion_accuracy(sim, cals, a.samples);
        report["fusion"] = {{"samples", acc.samples}, {"rms_m", acc.rms_m}, {"max_m", acc.max_m}};
    }
    if (a.json) {
        out << report.dump(2) << '\n';
        return kExitOk;
    }
    for (const auto& [cam, r] : report["cameras"].items())
        out << cam << ": " << r.at("points") << " points, residual rms " << std::fixed << std::setprecision(6)
            << r.at("residual_rms_m").get<double>() << " m\n"
            << std::defaultfloat;
    if (report.contains("fusion"))
        out << "fusion over " << report["fusion"]["samples"] << " points: rms " << std::fixed << std::setprecision(4)
            << report["fusion"]["rms_m"].get<double>() * 100.0 << " cm, max "
            << report["fusion"]["max_m"].get<double>() * 100.0 << " cm\n"
            << std::defaultfloat;
    return kExitOk;
}

struct RunArgs {
    std::string config, trace;
    bool json = false;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
    const Session s = load_session(a.config);
    const auto trace = session_trace(s, a.trace);
    const auto script = optional_script(s.cfg.script);

    SessionRunner runner(s.model, s.recognizer, s.cfg.session_id, s.cfg.stimuli);
    runner.write_logs_to(s.cfg.log_dir());
    const auto configs = partition_screen(s.model.width_m, s.cfg.channels.count, s.cfg.channels.overlap_m);
    auto renderers = make_renderers(s, configs);

    std::vector<std::unique_ptr<Connection>> server_ends;
    std::vector<std::thread> slaves;
    std::vector<std::exception_ptr> failures(configs.size());
    std::set<int> ids;
    for (std::size_t c = 1; c < configs.size(); ++c) {
        auto [server_end, slave_end] = make_in_process_link();
        server_ends.push_back(std::move(server_end));
        ids.insert(static_cast<int>(c));
        slaves.emplace_back([&, c, link = std::move(slave_end)]() mutable {
            try {
                auto& r = *renderers[c];
                run_slave(*link, static_cast<int>(c), [&r](std::int64_t k, const FrameUpdate& u) { r.on_frame(k, u); },
                          Millis{s.cfg.timeout_ms + 10000});
            } catch (...) {
                failures[c] = std::current_exception();
            }
        });
    }

    std::int64_t frames = 0;
    std::exception_ptr server_failure;
    try {
        frames = serve_frames(runner, trace, std::move(server_ends), *renderers[0], s.cfg, ids);
    } catch (...) {
        server_failure = std::current_exception();
    }
    for (auto& t : slaves) t.join();
    if (server_failure) std::rethrow_exception(server_failure);
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
    for (auto& r : renderers) r->finish();

    emit_report(session_report(runner, frames, script ? &*script : nullptr), a.json, out);
    return kExitOk;
}

struct ServeArgs {
    std::string config, trace;
    int port = -1;
    bool json = false;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    Session s = load_session(a.config);
    if (a.port >= 0) s.cfg.port = static_cast<std::uint16_t>(a.port);
    const auto trace = session_trace(s, a.trace);
    const auto script = optional_script(s.cfg.script);
    const auto configs = partition_screen(s.model.width_m, s.cfg.channels.count, s.cfg.channels.overlap_m);

    TcpListener listener(s.cfg.port, s.cfg.host);
    out << "listening on " << s.cfg.host << ':' << listener.port() << std::endl;

    std::vector<std::unique_ptr<Connection>> links;
    std::set<int> ids;
    for (std::size_t c = 1; c < configs.size(); ++c) {
        ids.insert(static_cast<int>(c));
        links.push_back(listener.accept(Millis{s.cfg.timeout_ms * 6}));
    }

    SessionRunner runner(s.model, s.recognizer, s.cfg.session_id, s.cfg.stimuli);
    runner.write_logs_to(s.cfg.log_dir());
    ChannelRenderer local(s.model, configs[0], s.cfg.channels.raster, s.cfg.channels.blend, s.cfg.frames_dir(),
                          s.cfg.dump_every);
    const auto frames = serve_frames(runner, trace, std::move(links), local, s.cfg, ids);
    local.finish();
    if (interrupt_flag().load()) out << "interrupted after " << frames << " frames; shutdown sent\n";
    emit_report(session_report(runner, frames, script ? &*script : nullptr), a.json, out);
    return kExitOk;
}

struct ChannelArgs {
    std::string config, connect;
    int channel = 1;
};

int cmd_channel(const ChannelArgs& a, std::ostream& out) {
    const Session s = load_session(a.config);
    const auto configs = partition_screen(s.model.width_m, s.cfg.channels.count, s.cfg.channels.overlap_m);
    if (a.channel < 1 || a.channel >= static_cast<int>(configs.size()))
        throw ValidationError("channel " + std::to_string(a.channel) + " is not a slave of the " +
                              std::to_string(configs.size()) + "-channel layout");
    std::string host = s.cfg.host;
    std::uint16_t port = s.cfg.port;
    if (!a.connect.empty()) {
        const auto colon = a.connect.rfind(':');
        if (colon == std::string::npos) throw ValidationError("--connect expects host:port");
        host = a.connect.substr(0, colon);
        try {
            port = static_cast<std::uint16_t>(std::stoi(a.connect.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ValidationError("bad port in --connect " + a.connect);
        }
    }
    auto link = connect_tcp(host, port, Millis{s.cfg.timeout_ms});
    ChannelRenderer r(s.model, configs[static_cast<std::size_t>(a.channel)], s.cfg.channels.raster,
                      s.cfg.channels.blend, s.cfg.frames_dir(), s.cfg.dump_every);
    const auto frames = run_slave(*link, a.channel, [&r](std::int64_t k, const FrameUpdate& u) { r.on_frame(k, u); },
                                  Millis{s.cfg.timeout_ms * 6 + 10000});
    r.finish();
    out << "channel " << a.channel << ": " << frames << " frames, state hash " << state_hash(r.state()) << '\n';
    return kExitOk;
}

struct AnalyzeArgs {
    std::string detection, server, script;
    bool json = false;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    const SessionLog detection = load_log(a.detection);
    const SessionLog server = load_log(a.server);
    if (detection.side != LogSide::Detection) throw ValidationError(a.detection + " is not a detection-side log");
    if (server.side != LogSide::Server) throw ValidationError(a.server + " is not a server-side log");
    const auto script = optional_script(a.script);

    json j = analysis_json(detection, server, script ? &*script : nullptr);
    j["session_id"] = detection.session_id;
    j["operations"] = operations_of(detection).size();
    json disc = json::array();
    for (const auto& d : cross_check(detection, server)) disc.push_back(d.describe());
    j["discrepancies"] = disc;
    if (a.json) {
        out << j.dump(2) << '\n';
    } else {
        out << "session " << detection.session_id << ": " << j["operations"] << " operations\n";
        print_analysis(j, out);
    }
    return kExitOk;
}

struct BridgeArgs {
    std::string config, host = "127.0.0.1";
    int port = 7410;
    double duration = 0.0;
};

int cmd_ui_bridge(const BridgeArgs& a, std::ostream& out) {
    const Session s = load_session(a.config);
    BridgeOptions opts;
    opts.host = a.host;
    opts.port = static_cast<std::uint16_t>(a.port);
    opts.log_dir = s.cfg.log_dir();
    UiBridge bridge(s.model, s.recognizer, s.cfg.session_id, s.cfg.stimuli, opts);
    bridge.start();
    out << "ui-bridge on http://" << a.host << ':' << bridge.port() << " (GET /panel, GET /state, ws /ws)" << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    while (!interrupt_flag().load()) {
        if (a.duration > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= a.duration)
            break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    bridge.stop();
    out << "ui-bridge stopped after " << bridge.ticks() << " ticks, state hash " << bridge.state_hash() << '\n';
    return kExitOk;
}

struct ReplayArgs {
    std::string config, log, out_dir;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out) {
    Session s = load_session(a.config);
    const SessionLog log = load_log(a.log);
    if (log.side != LogSide::Server) throw ValidationError(a.log + " is not a server-side log");
    if (!a.out_dir.empty()) s.cfg.output_dir = a.out_dir;
    s.cfg.dump_every = 0;
    const auto configs = partition_screen(s.model.width_m, s.cfg.channels.count, s.cfg.channels.overlap_m);
    auto renderers = make_renderers(s, configs);
    std::int64_t k = 0;
    std::size_t operations = 0;
    for (const auto& rec : log.records) {
        const auto* d = std::get_if<StateDelta>(&rec.payload);
        if (!d) continue;
        if (d->source) ++operations;
        const FrameUpdate u{d->time, {*d}};
        for (auto& r : renderers) r->on_frame(k, u);
        ++k;
    }
    for (auto& r : renderers) r->finish();
    out << "replayed " << k << " deltas (" << operations << " operations) into " << renderers.size()
        << " channels; state hash " << state_hash(renderers[0]->state()) << '\n';
    return kExitOk;
}

struct SynthArgs {
    std::string panel, script, out, rig;
    std::uint64_t seed = 1;
};

int cmd_synth_trace(const SynthArgs& a, std::ostream& out) {
    const PanelModel model = load_panel(a.panel);
    const auto frames = scripted_trace(read_json_file(a.script), model);
    std::optional<RigSimulator> sim;
    if (!a.rig.empty()) {
        auto rig = load_rig(a.rig);
        rig.seed = a.seed;
        sim.emplace(rig);
    }
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    std::ofstream f(a.out);
    if (!f) throw ValidationError("cannot write " + a.out);
    for (const auto& fr : frames) {
        json j = frame_to_json(fr);
        if (sim) {
            json obs = json::array();
            if (fr.position)
                for (const auto& o : sim->observe(fr.position->point, fr.time))
                    obs.push_back({{"camera", o.camera}, {"i", o.pixel.i}, {"j", o.pixel.j}, {"visible", o.visible}});
            j.erase("pos");
            j.erase("cams");
            j["obs"] = obs;
        }
        f << j.dump() << '\n';
    }
    out << "wrote " << frames.size() << " frames (" << std::fixed << std::setprecision(2)
        << (frames.empty() ? 0.0 : frames.back().time + kTick) << " s) to " << a.out << '\n'
        << std::defaultfloat;
    return kExitOk;
}

}  // namespace

int vrpanel_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Virtual control panel: tracking, recognition, panel logic and multi-channel rendering"};
    app.require_subcommand(1);

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Fit per-camera pixel-to-world matrices");
    c->add_option("--rig", cal.rig, "Rig description (JSON)")->required();
    c->add_option("--pairs", cal.pairs, "Correspondence file; synthesized from the rig when absent");
    c->add_option("--mode", cal.mode, "affine33 or linear32");
    c->add_option("--out", cal.out, "Write the calibration here");
    c->add_option("--write-pairs", cal.write_pairs, "Save the correspondences used");
    c->add_option("--samples", cal.samples, "Measure fused accuracy over this many random points");
    c->add_flag("--json", cal.json);

    RunArgs run;
    auto* r = app.add_subcommand("run", "Replay a trace through the whole pipeline in one process");
    r->add_option("--config", run.config)->required();
    r->add_option("--trace", run.trace);
    r->add_flag("--json", run.json);

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "Lockstep server: pipeline, logic, logs and channel 0");
    sv->add_option("--config", serve.config)->required();
    sv->add_option("--trace", serve.trace);
    sv->add_option("--port", serve.port, "Overrides the config; 0 picks a free port");
    sv->add_flag("--json", serve.json);

    ChannelArgs chan;
    auto* ch = app.add_subcommand("channel", "Lockstep slave rendering one channel");
    ch->add_option("--config", chan.config)->required();
    ch->add_option("--channel", chan.channel)->required();
    ch->add_option("--connect", chan.connect, "host:port of the server");

    AnalyzeArgs an;
    auto* az = app.add_subcommand("analyze", "Error counts, response times and log cross-check");
    az->add_option("--detection", an.detection)->required();
    az->add_option("--server", an.server)->required();
    az->add_option("--script", an.script);
    az->add_flag("--json", an.json);

    BridgeArgs br;
    auto* ub = app.add_subcommand("ui-bridge", "Serve the panel to a browser UI over HTTP and WebSocket");
    ub->add_option("--config", br.config)->required();
    ub->add_option("--host", br.host);
    ub->add_option("--port", br.port);
    ub->add_option("--duration", br.duration, "Seconds to run; 0 runs until interrupted");

    ReplayArgs rp;
    auto* re = app.add_subcommand("replay", "Re-render a server log's deltas");
    re->add_option("--config", rp.config)->required();
    re->add_option("--log", rp.log)->required();
    re->add_option("--out", rp.out_dir, "Output root; frames go to <out>/frames");

    SynthArgs sy;
    auto* st = app.add_subcommand("synth-trace", "Generate an input trace from a step script");
    st->add_option("--panel", sy.panel)->required();
    st->add_option("--script", sy.script)->required();
    st->add_option("--out", sy.out)->required();
    st->add_option("--rig", sy.rig, "Emit raw camera observations from this rig instead of positions");
    st->add_option("--seed", sy.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitBadInput;
    }

    try {
        if (*c) return cmd_calibrate(cal, out);
        if (*r) return cmd_run(run, out);
        if (*sv) return cmd_serve(serve, out);
        if (*ch) return cmd_channel(chan, out);
        if (*az) return cmd_analyze(an, out);
        if (*ub) return cmd_ui_bridge(br, out);
        if (*re) return cmd_replay(rp, out);
        if (*st) return cmd_synth_trace(sy, out);
    } catch (const std::exception& e) {
        err << "vrpanel: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitRuntime;
}

}  // namespace vrpanel
