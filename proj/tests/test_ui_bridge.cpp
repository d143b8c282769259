#include <doctest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <fstream>
#include <map>
#include <thread>

#include "support.hpp"
#include "vrpanel/session.hpp"
#include "vrpanel/synthetic_trace.hpp"
#include "vrpanel/ui_bridge.hpp"

using namespace vrpanel;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::vector<StimulusRule> demo_stimuli() { return {{"alarm", "", "", "alarm"}, {"red-lights", "R-1", "on", ""}}; }

std::pair<int, std::string> http_get(std::uint16_t port, const std::string& target) {
    net::io_context io;
    beast::tcp_stream stream(io);
    stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    http::request<http::string_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    return {res.result_int(), res.body()};
}

struct WsClient {
    net::io_context io;
    websocket::stream<tcp::socket> ws{io};

    explicit WsClient(std::uint16_t port) {
        ws.next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
        ws.handshake("127.0.0.1", "/ws");
    }
    json read() {
        beast::flat_buffer buf;
        ws.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }
    void send(const json& j) { ws.write(net::buffer(j.dump())); }
};

json input_message(const InputFrame& f) {
    json j{{"type", "input"}, {"glove", f.glove.fingers}};
    if (f.position)
        j["pos"] = {f.position->point.x, f.position->point.y, f.position->point.z};
    else
        j["pos"] = nullptr;
    return j;
}

// Required keys per message type, straight from the shipped schema.
std::map<std::string, std::vector<std::string>> schema_required() {
    const auto schema = json::parse(std::ifstream(test::data("ui_messages.schema.json")));
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& alt : schema.at("oneOf"))
        out[alt.at("properties").at("type").at("const").get<std::string>()] = alt.at("required");
    return out;
}

void check_against_schema(const json& msg) {
    static const auto required = schema_required();
    const auto it = required.find(msg.at("type").get<std::string>());
    REQUIRE(it != required.end());
    for (const auto& key : it->second) CHECK(msg.contains(key));
    if (msg.at("type") == "delta")
        for (const auto& c : msg.at("delta").at("changes")) CHECK(c.size() == 2);
    if (msg.contains("hash")) CHECK(msg.at("hash").get<std::string>().size() == 16);
}

}  // namespace

TEST_SUITE("ui_bridge") {

TEST_CASE("panel and state over HTTP") {
    const auto& m = test::figure2();
    UiBridge bridge(m, {}, "ui-http", {}, {"127.0.0.1", 0});
    bridge.start();
    REQUIRE(bridge.port() != 0);
    const auto [code, body] = http_get(bridge.port(), "/panel");
    CHECK(code == 200);
    CHECK(json::parse(body) == panel_to_json(m));
    const auto [scode, sbody] = http_get(bridge.port(), "/state");
    CHECK(scode == 200);
    CHECK(json::parse(sbody).contains("hash"));
    CHECK(http_get(bridge.port(), "/nope").first == 404);
    bridge.stop();
}

TEST_CASE("a push on Red reaches the UI") {
    const auto& m = test::figure2();
    UiBridge bridge(m, {}, "ui-red", demo_stimuli(), {"127.0.0.1", 0});
    bridge.start();
    WsClient client(bridge.port());
    const auto hello = client.read();
    CHECK(hello.at("type") == "hello");
    CHECK(hello.at("session_id") == "ui-red");
    CHECK(hello.at("state").at("lights").at("R-1").at("mode") == "off");

    TraceBuilder b(test::center_of(m, "Red"), gloves::kPointing);
    auto frames = b.wait(0.12).press().build();
    frames.resize(std::min<std::size_t>(frames.size(), 30));
    for (const auto& f : frames) {
        check_against_schema(input_message(f));
        client.send(input_message(f));
    }

    bool r1 = false, r2 = false, alarm = false;
    std::int64_t on_frame = -1, alarm_frame = -1;
    std::string last_hash;
    const auto deadline = std::chrono::steady_clock::now() + 10s;
    while (!(r1 && r2 && alarm) && std::chrono::steady_clock::now() < deadline) {
        const auto msg = client.read();
        check_against_schema(msg);
        if (msg.at("type") == "delta") {
            for (const auto& c : msg.at("delta").at("changes")) {
                if (c.at("widget") == "R-1" && c.at("light").at("mode") == "on") r1 = true, on_frame = msg.at("frame");
                if (c.at("widget") == "R-2" && c.at("light").at("mode") == "on") r2 = true;
            }
        } else if (msg.at("type") == "audio" && msg.at("name") == "alarm") {
            alarm = true;
            alarm_frame = msg.at("frame");
        } else if (msg.at("type") == "state_hash") {
            last_hash = msg.at("hash");
        }
    }
    CHECK(r1);
    CHECK(r2);
    CHECK(alarm);
    CHECK(std::abs(alarm_frame - on_frame) <= 2);

    // at quiescence the hash the UI hears matches the bridge's
    std::this_thread::sleep_for(1200ms);
    client.send(json{{"type", "resync"}});
    json h;
    do h = client.read();
    while (h.at("type") != "hello");
    CHECK(h.at("hash") == bridge.state_hash());
    CHECK(h.at("state").at("lights").at("R-2").at("mode") == "on");

    const auto det = bridge.detection_log();
    const auto ops = operations_of(det);
    REQUIRE(ops.size() == 1);
    CHECK(ops[0].widget == "Red");
    bool stim = false;
    for (const auto& r : bridge.server_log().records)
        if (const auto* s = std::get_if<Stimulus>(&r.payload); s && s->name == "red-lights") stim = true;
    CHECK(stim);
    CHECK(cross_check(det, bridge.server_log()).empty());
    client.ws.close(websocket::close_code::normal);
    bridge.stop();
}

TEST_CASE("malformed messages close the connection and leave a note") {
    const auto& m = test::figure2();
    UiBridge bridge(m, {}, "ui-bad", {}, {"127.0.0.1", 0});
    bridge.start();
    WsClient client(bridge.port());
    CHECK(client.read().at("type") == "hello");
    client.ws.write(net::buffer(std::string("{not json")));
    beast::error_code ec;
    for (int k = 0; k < 200 && !ec; ++k) {
        beast::flat_buffer buf;
        client.ws.read(buf, ec);
    }
    CHECK(ec == websocket::error::closed);
    CHECK(client.ws.reason().code == websocket::close_code::policy_error);

    std::this_thread::sleep_for(100ms);
    bool noted = false;
    for (const auto& r : bridge.server_log().records)
        if (const auto* n = std::get_if<Note>(&r.payload); n && n->text.find("malformed") != std::string::npos)
            noted = true;
    CHECK(noted);

    // a second client with a bad glove is dropped the same way
    WsClient other(bridge.port());
    other.read();
    other.send(json{{"type", "input"}, {"pos", nullptr}, {"glove", {1, 2, 3}}});
    ec = {};
    for (int k = 0; k < 200 && !ec; ++k) {
        beast::flat_buffer buf;
        other.ws.read(buf, ec);
    }
    CHECK(other.ws.reason().code == websocket::close_code::policy_error);
    bridge.stop();
}

TEST_CASE("idle bridge keeps ticking and logging") {
    test::TempDir dir("ui-idle");
    const auto& m = test::figure2();
    UiBridge bridge(m, {}, "ui-idle", {}, {"127.0.0.1", 0, dir.path()});
    bridge.start();
    std::this_thread::sleep_for(600ms);
    bridge.stop();
    const auto ticks = bridge.ticks();
    CHECK(ticks >= 8);
    std::size_t tick_deltas = 0;
    for (const auto& r : bridge.server_log().records)
        if (const auto* d = std::get_if<StateDelta>(&r.payload); d && !d->source) ++tick_deltas;
    CHECK(tick_deltas >= static_cast<std::size_t>(ticks) - 1);
    std::size_t inputs = 0;
    for (const auto& r : bridge.detection_log().records) inputs += std::holds_alternative<InputFrame>(r.payload);
    CHECK(inputs == static_cast<std::size_t>(ticks));
    // the on-disk logs mirror memory
    CHECK(load_log(dir / "ui-idle.server.jsonl") == bridge.server_log());
}

}  // TEST_SUITE
