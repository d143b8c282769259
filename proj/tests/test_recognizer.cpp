#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "vrpanel/errors.hpp"
#include "vrpanel/synthetic_trace.hpp"
#include "vrpanel/trace.hpp"

using namespace vrpanel;

namespace {

std::vector<OperationEvent> recognize(const PanelModel& model, const std::vector<InputFrame>& frames,
                                      RecognizerConfig cfg = {}) {
    Recognizer r(model, cfg);
    std::vector<OperationEvent> out;
    for (const auto& f : frames)
        for (auto& e : r.step(f)) out.push_back(std::move(e));
    return out;
}

GloveFrame glove(std::array<int, 5> v) { return {0.0, v}; }

std::vector<InputFrame> push_trace(const WorldPoint& at, std::array<int, 5> hand = gloves::kPointing,
                                   double decel = 8.0) {
    return TraceBuilder(at, hand).wait(0.2).press(decel).wait(0.4).build();
}

}  // namespace

TEST_SUITE("recognizer") {

TEST_CASE("classify_gesture") {
    const RecognizerConfig cfg;
    CHECK(classify_gesture(glove({200, 40, 200, 200, 200}), cfg) == GestureClass::Open);
    CHECK(classify_gesture(glove({220, 220, 220, 220, 220}), cfg) == GestureClass::Hold);
    CHECK(classify_gesture(glove({0, 0, 0, 0, 0}), cfg) == GestureClass::Open);
    CHECK(classify_gesture(glove({120, 120, 120, 120, 120}), cfg) == GestureClass::Neutral);
    CHECK(classify_gesture(glove({179, 220, 220, 220, 220}), cfg) == GestureClass::Neutral);
    CHECK(classify_gesture(glove({180, 180, 180, 180, 180}), cfg) == GestureClass::Hold);

    // With the index below the open threshold the hand can never be Hold, so
    // the classes are exclusive whenever open <= hold.
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> v(0, 255);
    for (int k = 0; k < 2000; ++k) {
        const GloveFrame g = glove({v(rng), v(rng), v(rng), v(rng), v(rng)});
        const bool open = g.fingers[Index] < cfg.open_threshold;
        bool hold = true;
        for (int f : g.fingers) hold = hold && f >= cfg.hold_threshold;
        const auto expect = open ? GestureClass::Open : hold ? GestureClass::Hold : GestureClass::Neutral;
        CHECK(classify_gesture(g, cfg) == expect);
    }

    RecognizerConfig inverted;
    inverted.polarity = GlovePolarity::HighIsOpen;
    CHECK(classify_gesture(glove({255 - 200, 255 - 40, 55, 55, 55}), inverted) == GestureClass::Open);
    CHECK(classify_gesture(glove({0, 0, 0, 0, 0}), inverted) == GestureClass::Hold);
}

TEST_CASE("config validation") {
    RecognizerConfig c;
    CHECK_NOTHROW(c.validate());
    c.window = 2;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.open_threshold = 200;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.hold_threshold = 300;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.accel_threshold = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(recognizer_config_from_json({{"polarity", "sideways"}}), ParseError);
    const auto loaded = load_recognizer_config(test::data("recognizer.json"));
    CHECK(recognizer_config_to_json(loaded) == recognizer_config_to_json(RecognizerConfig{}));
}

TEST_CASE("kinematics") {
    std::vector<FusedPosition> still{{0.0, {1, 1, 0.3}, 4}, {0.04, {1, 1, 0.3}, 4}, {0.08, {1, 1, 0.3}, 4}};
    auto k = estimate_kinematics(still);
    CHECK(k.speed() == 0.0);
    CHECK(k.accel() == 0.0);

    std::vector<FusedPosition> quad;
    for (int i = 0; i < 3; ++i) {
        const double t = i * kTick;
        quad.push_back({t, {0.5 * 5.0 * t * t, 0, 0}, 4});
    }
    CHECK(estimate_kinematics(quad).accel() == doctest::Approx(5.0).epsilon(1e-9));

    std::vector<FusedPosition> line;
    for (int i = 0; i < 3; ++i) line.push_back({i * kTick, {i * kTick * 1.0, 0, 0}, 4});
    k = estimate_kinematics(line);
    CHECK(k.speed() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.accel() < 1e-9);

    CHECK_THROWS_AS(estimate_kinematics(std::vector<FusedPosition>(still.begin(), still.begin() + 2)),
                    InsufficientData);
}

TEST_CASE("kinematics are exact on random quadratics") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<int> start(0, 1000);
    for (int trial = 0; trial < 500; ++trial) {
        const WorldPoint p0{u(rng), u(rng), u(rng)}, v0{u(rng), u(rng), u(rng)}, a{u(rng), u(rng), u(rng)};
        const int k0 = start(rng);
        std::vector<FusedPosition> w;
        for (int i = 0; i < 3; ++i) {
            const double t = tick_time(k0 + i);
            const double s = tick_time(i);  // local time keeps the numbers small
            w.push_back({t, p0 + v0 * s + a * (0.5 * s * s), 4});
        }
        const auto kin = estimate_kinematics(w);
        CHECK(distance(kin.acceleration, a) < 1e-6);
        CHECK(distance(kin.velocity, v0 + a * kTick) < 1e-6);
    }
}

TEST_CASE("push: all three conditions") {
    const auto& m = test::figure2();
    const auto events = recognize(m, push_trace(test::center_of(m, "Red")));
    REQUIRE(events.size() == 1);
    CHECK(events[0].widget == "Red");
    CHECK(events[0].kind == OperationKind::push());
}

TEST_CASE("push: each condition violated") {
    const auto& m = test::figure2();
    // 1: same press between Red and Yellow, outside every zone
    auto gap = test::center_of(m, "Red");
    gap.x = 3.35;
    CHECK(recognize(m, push_trace(gap)).empty());
    // 2: hold instead of an open index
    CHECK(recognize(m, push_trace(test::center_of(m, "Red"), gloves::kHold)).empty());
    CHECK(recognize(m, push_trace(test::center_of(m, "Red"), gloves::kRelaxed)).empty());
    // 3: deceleration below threshold
    CHECK(recognize(m, push_trace(test::center_of(m, "Red"), gloves::kPointing, 3.0)).empty());
}

TEST_CASE("push fires at the peak deceleration, within one tick of contact") {
    const auto& m = test::figure2();
    TraceBuilder b(test::center_of(m, "Red"), gloves::kPointing);
    b.wait(0.2);
    const double before = b.now();
    const auto frames = b.press(8.0).build();
    // contact is the deepest z sample
    double contact = 0.0, zmin = 1e9;
    for (const auto& f : frames)
        if (f.position && f.position->point.z < zmin) {
            zmin = f.position->point.z;
            contact = f.time;
        }
    const auto ev = recognize(m, frames);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].time > before);
    CHECK(std::abs(ev[0].time - contact) <= 3 * kTick + 1e-9);
}

TEST_CASE("tune") {
    const auto& m = test::console();
    const auto at = test::center_of(m, "K-1");
    // each non-thumb finger +4 per frame: 16 across a 5-frame window, sum 64
    auto cw = recognize(m, TraceBuilder(at, gloves::kHold).wait(0.2).twist(Direction::Clockwise, 4, 5).build());
    REQUIRE(cw.size() == 1);
    CHECK(cw[0].widget == "K-1");
    CHECK(cw[0].kind == OperationKind::tune(Direction::Clockwise));

    auto ccw = recognize(m, TraceBuilder(at, gloves::kHold).wait(0.2).twist(Direction::CounterClockwise, 4, 5).build());
    REQUIRE(ccw.size() == 1);
    CHECK(ccw[0].kind == OperationKind::tune(Direction::CounterClockwise));

    CHECK(recognize(m, TraceBuilder(at, gloves::kHold).wait(1.0).build()).empty());
    // 2 per frame: 8 per finger, sum 32, under the threshold
    CHECK(recognize(m, TraceBuilder(at, gloves::kHold).wait(0.2).twist(Direction::Clockwise, 2, 5).build()).empty());
    // not a hold
    CHECK(recognize(m, TraceBuilder(at, gloves::kRelaxed).wait(0.2).twist(Direction::Clockwise, 4, 5).build()).empty());
    // outside the knob
    CHECK(recognize(m, TraceBuilder({2.5, 0.6, 0.3}, gloves::kHold).wait(0.2).twist(Direction::Clockwise, 4, 5).build())
              .empty());
}

TEST_CASE("tune sum over the window, direct state") {
    const auto& m = test::console();
    const RecognizerConfig cfg;
    RecognizerState st;
    for (int k = 0; k < 5; ++k) {
        const int v = 200 + 15 * k / 4;  // ends at +15 per finger
        st.gloves.push_back({k * kTick, {200, v, v, v, v}});
    }
    InputFrame f{4 * kTick, FusedPosition{4 * kTick, test::center_of(m, "K-2"), 4}, st.gloves.back()};
    auto ev = detect_tune(st, f, m, cfg);
    REQUIRE(ev);
    CHECK(ev->kind == OperationKind::tune(Direction::Clockwise));
    for (auto& g : st.gloves)
        for (int i = Index; i <= Little; ++i) g.fingers[i] = 430 - g.fingers[i];
    f.glove = st.gloves.back();
    ev = detect_tune(st, f, m, cfg);
    REQUIRE(ev);
    CHECK(ev->kind == OperationKind::tune(Direction::CounterClockwise));
}

TEST_CASE("switch") {
    const auto& m = test::console();
    const WorldPoint low{5.15, 0.35, 0.3}, high{5.15, 0.85, 0.3};
    auto on = recognize(m, TraceBuilder(low, gloves::kHold).wait(0.2).flick(Direction::On).wait(0.4).build());
    REQUIRE(on.size() == 1);
    CHECK(on[0].widget == "SW-1");
    CHECK(on[0].kind == OperationKind::turn(Direction::On));

    auto off = recognize(m, TraceBuilder(high, gloves::kHold).wait(0.2).flick(Direction::Off).wait(0.4).build());
    REQUIRE(off.size() == 1);
    CHECK(off[0].kind == OperationKind::turn(Direction::Off));

    CHECK(recognize(m, TraceBuilder(low, gloves::kPointing).wait(0.2).flick(Direction::On).wait(0.4).build()).empty());
    CHECK(recognize(m, TraceBuilder(low, gloves::kHold).wait(0.2).flick(Direction::On, 3.0).wait(0.4).build()).empty());
}

TEST_CASE("refractory suppresses repeats on the same widget") {
    const auto& m = test::figure2();
    RecognizerState st;
    const RecognizerConfig cfg;
    const auto red = test::center_of(m, "Red");
    std::vector<OperationEvent> fired;
    // constant 10 m/s^2 deceleration for many ticks: every frame qualifies
    for (int k = 0; k < 12; ++k) {
        const double t = k * kTick;
        WorldPoint p = red;
        p.z = 0.3 - 0.5 * 10.0 * t * t;
        InputFrame f{t, FusedPosition{t, p, 4}, {t, gloves::kPointing}};
        for (auto& e : step(st, f, m, cfg)) fired.push_back(e);
    }
    // qualifying frames from t=0.08 to 0.44: fires at 0.08, 0.28
    REQUIRE(fired.size() >= 2);
    for (std::size_t i = 1; i < fired.size(); ++i) CHECK(fired[i].time - fired[i - 1].time >= cfg.refractory_s - 1e-9);
    CHECK(fired.size() == 2);
}

TEST_CASE("occlusion clears the kinematics window") {
    const auto& m = test::figure2();
    const auto red = test::center_of(m, "Red");
    // occlusion right before the press: the decel frames still see three samples
    auto ok = recognize(m, TraceBuilder(red, gloves::kPointing).occlude(0.2).wait(0.2).press().build());
    CHECK(ok.size() == 1);
    // occlude in the middle of the deceleration: the detector never gets three
    // consecutive visible samples with the spike
    auto frames = push_trace(red);
    const auto clean = recognize(m, frames);
    REQUIRE(clean.size() == 1);
    for (auto& f : frames)
        if (std::abs(f.time - clean[0].time) < 1e-9 || std::abs(f.time - clean[0].time + kTick) < 1e-9 ||
            std::abs(f.time - clean[0].time - kTick) < 1e-9 || std::abs(f.time - clean[0].time - 2 * kTick) < 1e-9)
            f.position.reset();
    CHECK(recognize(m, frames).empty());
}

TEST_CASE("ordering errors") {
    const auto& m = test::figure2();
    Recognizer r(m, {});
    const GloveFrame g{0.0, gloves::kRelaxed};
    CHECK_NOTHROW(r.step({0.0, std::nullopt, g}));
    CHECK_THROWS_AS(r.step({0.0, std::nullopt, g}), OrderingError);
    CHECK_THROWS_AS(r.step({0.12, std::nullopt, g}), OrderingError);
    CHECK_THROWS_AS(r.step({0.05, std::nullopt, g}), OrderingError);
    CHECK_NOTHROW(r.step({0.04, std::nullopt, g}));
    CHECK_THROWS_AS(r.step({0.08, std::nullopt, {0.08, {0, 0, 0, 0, 300}}}), ValidationError);
    CHECK(tick_index(0.12).value() == 3);
    CHECK_FALSE(tick_index(0.1).has_value());
}

TEST_CASE("empty session") {
    CHECK(recognize(test::figure2(), {}).empty());
}

TEST_CASE("zone and kind soundness on random wandering") {
    const auto& m = test::console();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ux(0.2, 7.4), uy(0.2, 1.0), acc(1.0, 20.0);
    std::uniform_int_distribution<int> pick(0, 2), dir(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        TraceBuilder b({ux(rng), uy(rng), 0.3});
        for (int s = 0; s < 15; ++s) {
            const std::array<std::array<int, 5>, 3> hands{gloves::kPointing, gloves::kHold, gloves::kRelaxed};
            b.glove(hands[pick(rng)]);
            b.move_to({ux(rng), uy(rng), 0.3}, acc(rng));
            if (dir(rng)) b.press(acc(rng));
            else b.flick(dir(rng) ? Direction::On : Direction::Off, acc(rng));
            b.move_to({b.position().x, 0.6, 0.3});
        }
        const auto frames = b.build();
        Recognizer r(m, {});
        std::map<std::string, double> last;
        for (const auto& f : frames) {
            for (const auto& e : r.step(f)) {
                REQUIRE(f.position);
                const auto hit = hit_test(m, f.position->point);
                REQUIRE(hit);
                CHECK(*hit == e.widget);
                const auto kind = m.at(e.widget).kind;
                const auto t = e.kind.type;
                CHECK(((t == OperationType::PushButton && kind == WidgetKind::Button) ||
                       (t == OperationType::TuneKnob && kind == WidgetKind::Knob) ||
                       (t == OperationType::TurnSwitch && kind == WidgetKind::Switch)));
                if (last.count(e.widget)) CHECK(e.time - last[e.widget] >= 0.2 - kTick);
                last[e.widget] = e.time;
            }
        }
    }
}

TEST_CASE("determinism") {
    const auto& m = test::figure2();
    const auto frames = scripted_trace(nlohmann::json::parse(std::ifstream(test::data("demo.steps.json"))), m);
    const auto first = recognize(m, frames);
    for (int k = 0; k < 20; ++k) CHECK(recognize(m, frames) == first);
}

TEST_CASE("scripted demo trace") {
    const auto& m = test::figure2();
    const auto frames = scripted_trace(nlohmann::json::parse(std::ifstream(test::data("demo.steps.json"))), m);
    CHECK(frames == load_trace(test::data("demo.trace.jsonl")));
    const auto ev = recognize(m, frames);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].widget == "Red");
    CHECK(ev[1].widget == "Black");
    CHECK(ev[0].time == doctest::Approx(2.88));
    CHECK(ev[1].time == doctest::Approx(7.40));
    for (std::size_t i = 0; i < frames.size(); ++i) CHECK(tick_index(frames[i].time) == std::int64_t(i));
}

TEST_CASE("trace files") {
    test::TempDir dir("trace");
    const auto frames = TraceBuilder({1, 1, 0.3}).wait(0.2).occlude(0.08).wait(0.08).build();
    save_trace(frames, dir / "t.jsonl");
    CHECK(load_trace(dir / "t.jsonl") == frames);

    std::istringstream bad("{\"t\":0,\"pos\":null,\"glove\":[1,2,3,4,5]}\n{\"t\":0.04,\"glove\":[1,2]}\n");
    CHECK_THROWS_WITH_AS(read_trace(bad), doctest::Contains("line 2"), ParseError);
    std::istringstream junk("\n{not json\n");
    CHECK_THROWS_WITH_AS(read_trace(junk), doctest::Contains("line 2"), ParseError);
    std::istringstream range("{\"t\":0,\"pos\":null,\"glove\":[1,2,3,4,256]}\n");
    CHECK_THROWS_AS(read_trace(range), ParseError);

    // raw observations are fused with a calibration
    const auto unit = CalibrationMatrix::affine({{{0.01, 0.0, 0.0}, {0.0, 0.01, 0.0}, {0.0, 0.0, 0.3}}});
    const CalibrationSet cals{{"a", unit}, {"b", unit}};
    std::istringstream obs(
        R"({"t":0,"glove":[0,0,0,0,0],"obs":[{"camera":"a","i":100,"j":50},{"camera":"b","i":100,"j":50}]})"
        "\n"
        R"({"t":0.04,"glove":[0,0,0,0,0],"obs":[{"camera":"a","i":1,"j":1,"visible":false}]})");
    const auto fused = read_trace(obs, &cals);
    REQUIRE(fused.size() == 2);
    REQUIRE(fused[0].position);
    CHECK(distance(fused[0].position->point, {1.0, 0.5, 0.3}) < 1e-12);
    CHECK_FALSE(fused[1].position);
    std::istringstream obs2(R"({"t":0,"glove":[0,0,0,0,0],"obs":[]})");
    CHECK_THROWS_AS(read_trace(obs2), ParseError);
}

}  // TEST_SUITE
