#include "vrpanel/ui_bridge.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "vrpanel/errors.hpp"
#include "vrpanel/session.hpp"

namespace vrpanel {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

struct UiInput {
    std::optional<WorldPoint> position;
    std::array<int, 5> glove{};
};

// Returns an error description, or empty when the message is well formed.
std::string parse_input(const json& j, UiInput& out) {
    if (!j.contains("glove") || !j.at("glove").is_array() || j.at("glove").size() != 5) return "glove must hold 5 values";
    for (std::size_t f = 0; f < 5; ++f) {
        const auto& v = j.at("glove").at(f);
        if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > 255) return "glove values must be integers 0..255";
        out.glove[f] = v.get<int>();
    }
    const auto it = j.find("pos");
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_array() || it->size() != 3) return "pos must be [x, y, z] or null";
    for (const auto& v : *it)
        if (!v.is_number()) return "pos must be numeric";
    WorldPoint p{(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>()};
    if (!p.finite()) return "pos must be finite";
    out.position = p;
    return {};
}

}  // namespace

class WsSession;

struct UiBridge::Impl {
    Impl(const PanelModel& m, RecognizerConfig cfg, std::string session_id, std::vector<StimulusRule> stimuli,
         BridgeOptions o)
        : model(m), runner(m, cfg, std::move(session_id), std::move(stimuli)), opts(std::move(o)), acceptor(ioc) {}

    const PanelModel& model;
    SessionRunner runner;
    BridgeOptions opts;

    net::io_context ioc;
    tcp::acceptor acceptor;
    std::uint16_t port = 0;
    std::thread net_thread;
    std::thread tick_thread;
    std::atomic<bool> running{false};

    mutable std::mutex state_mu;  // runner, frame
    std::int64_t frame = -1;
    std::atomic<std::int64_t> ticks{0};

    std::mutex inbox_mu;
    std::deque<UiInput> inbox;
    std::array<int, 5> last_glove{120, 120, 120, 120, 120};

    std::mutex sessions_mu;
    std::map<int, std::weak_ptr<WsSession>> sessions;
    int next_session = 1;

    void accept_loop();
    void tick_loop();
    void broadcast(const std::vector<std::shared_ptr<const std::string>>& msgs);
    std::string hello_message() const;
    std::string state_document() const;
    void attach(const std::shared_ptr<WsSession>& s, int id);
    void detach(int id);
    bool on_client_message(int id, const std::string& text, std::string& reason);
    void note(const std::string& text) {
        std::lock_guard lock(state_mu);
        runner.note(text);
    }
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, UiBridge::Impl& bridge, int id)
        : ws_(std::move(socket)), bridge_(bridge), id_(id) {}

    void run(http::request<http::string_body> req) {
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->bridge_.attach(self, self->id_);
            self->do_read();
        });
    }

    void send(std::shared_ptr<const std::string> msg) {
        net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)] {
            if (self->closing_) return;
            self->queue_.push_back(msg);
            if (self->queue_.size() == 1) self->do_write();
        });
    }

private:
    void do_read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->bridge_.detach(self->id_);
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            std::string reason;
            if (!self->bridge_.on_client_message(self->id_, text, reason)) {
                self->bridge_.note("ui connection " + std::to_string(self->id_) + " closed: " + reason);
                self->bridge_.detach(self->id_);
                self->closing_ = true;
                self->ws_.async_close(websocket::close_reason(websocket::close_code::policy_error, reason.substr(0, 120)),
                                      [self](beast::error_code) {});
                return;
            }
            self->do_read();
        });
    }

    void do_write() {
        ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->bridge_.detach(self->id_);
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty() && !self->closing_) self->do_write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    UiBridge::Impl& bridge_;
    int id_;
    bool closing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, UiBridge::Impl& bridge) : stream_(std::move(socket)), bridge_(bridge) {}

    void run() {
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (!ec) self->respond();
        });
    }

private:
    void respond() {
        const std::string target(req_.target());
        if (websocket::is_upgrade(req_) && target == "/ws") {
            int id;
            {
                std::lock_guard lock(bridge_.sessions_mu);
                id = bridge_.next_session++;
            }
            std::make_shared<WsSession>(stream_.release_socket(), bridge_, id)->run(std::move(req_));
            return;
        }
        auto res = std::make_shared<http::response<http::string_body>>(http::status::ok, req_.version());
        res->set(http::field::access_control_allow_origin, "*");
        res->set(http::field::content_type, "application/json");
        if (req_.method() != http::verb::get) {
            res->result(http::status::method_not_allowed);
            res->body() = R"({"error":"method not allowed"})";
        } else if (target == "/panel") {
            res->body() = panel_to_json(bridge_.model).dump();
        } else if (target == "/state") {
            res->body() = bridge_.state_document();
        } else {
            res->result(http::status::not_found);
            res->body() = R"({"error":"not found"})";
        }
        res->keep_alive(false);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    UiBridge::Impl& bridge_;
};

void UiBridge::Impl::accept_loop() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<HttpSession>(std::move(socket), *this)->run();
        accept_loop();
    });
}

std::string UiBridge::Impl::hello_message() const {
    std::lock_guard lock(state_mu);
    return json{{"type", "hello"},
                {"session_id", runner.server_log().session_id},
                {"frame", frame},
                {"t", runner.state().clock},
                {"state", state_to_json(runner.state())},
                {"hash", vrpanel::state_hash(runner.state())}}
        .dump();
}

std::string UiBridge::Impl::state_document() const {
    std::lock_guard lock(state_mu);
    return json{{"frame", frame},
                {"t", runner.state().clock},
                {"state", state_to_json(runner.state())},
                {"hash", vrpanel::state_hash(runner.state())}}
        .dump();
}

void UiBridge::Impl::attach(const std::shared_ptr<WsSession>& s, int id) {
    {
        std::lock_guard lock(sessions_mu);
        sessions[id] = s;
    }
    s->send(std::make_shared<const std::string>(hello_message()));
}

void UiBridge::Impl::detach(int id) {
    std::lock_guard lock(sessions_mu);
    sessions.erase(id);
}

bool UiBridge::Impl::on_client_message(int id, const std::string& text, std::string& reason) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        reason = "malformed JSON";
        return false;
    }
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        reason = "message without a type";
        return false;
    }
    const auto type = j.at("type").get<std::string>();
    if (type == "input") {
        UiInput in;
        reason = parse_input(j, in);
        if (!reason.empty()) return false;
        std::lock_guard lock(inbox_mu);
        inbox.push_back(in);
        while (inbox.size() > opts.inbox_limit) inbox.pop_front();
        return true;
    }
    if (type == "resync") {
        std::shared_ptr<WsSession> s;
        {
            std::lock_guard lock(sessions_mu);
            if (auto it = sessions.find(id); it != sessions.end()) s = it->second.lock();
        }
        if (s) s->send(std::make_shared<const std::string>(hello_message()));
        return true;
    }
    reason = "unknown message type '" + type + "'";
    return false;
}

void UiBridge::Impl::broadcast(const std::vector<std::shared_ptr<const std::string>>& msgs) {
    std::vector<std::shared_ptr<WsSession>> live;
    {
        std::lock_guard lock(sessions_mu);
        for (auto& [id, w] : sessions)
            if (auto s = w.lock()) live.push_back(std::move(s));
    }
    for (auto& s : live)
        for (const auto& m : msgs) s->send(m);
}

void UiBridge::Impl::tick_loop() {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    for (std::int64_t k = 0; running.load(); ++k) {
        std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(
                                               std::chrono::duration<double>(kTick * static_cast<double>(k))));
        if (!running.load()) break;

        UiInput in{std::nullopt, last_glove};
        {
            std::lock_guard lock(inbox_mu);
            if (!inbox.empty()) {
                in = inbox.front();
                inbox.pop_front();
            }
        }
        last_glove = in.glove;

        const double t = tick_time(k);
        InputFrame f;
        f.time = t;
        f.glove = {t, in.glove};
        if (in.position) f.position = FusedPosition{t, *in.position, 0};

        std::vector<std::shared_ptr<const std::string>> msgs;
        {
            std::lock_guard lock(state_mu);
            FrameUpdate update;
            try {
                update = runner.step(f);
            } catch (const Error& e) {
                runner.note(std::string("tick ") + std::to_string(k) + " failed: " + e.what());
                continue;
            }
            frame = k;
            bool changed = false;
            for (const auto& d : update.deltas) {
                if (d.empty()) continue;
                changed = true;
                msgs.push_back(std::make_shared<const std::string>(
                    json{{"type", "delta"}, {"frame", k}, {"delta", delta_to_json(d)}}.dump()));
                for (const auto& a : d.audio)
                    msgs.push_back(std::make_shared<const std::string>(
                        json{{"type", "audio"}, {"frame", k}, {"t", a.time}, {"name", a.name}}.dump()));
            }
            if (changed || k % 25 == 0)
                msgs.push_back(std::make_shared<const std::string>(
                    json{{"type", "state_hash"}, {"frame", k}, {"hash", vrpanel::state_hash(runner.state())}}.dump()));
        }
        ticks.store(k + 1);
        if (!msgs.empty()) broadcast(msgs);
    }
}

UiBridge::UiBridge(const PanelModel& model, RecognizerConfig cfg, std::string session_id,
                   std::vector<StimulusRule> stimuli, BridgeOptions opts)
    : impl_(std::make_unique<Impl>(model, cfg, std::move(session_id), std::move(stimuli), std::move(opts))) {}

UiBridge::~UiBridge() { stop(); }

void UiBridge::start() {
    auto& d = *impl_;
    if (d.running.load()) return;
    try {
        const tcp::endpoint ep(net::ip::make_address(d.opts.host), d.opts.port);
        d.acceptor.open(ep.protocol());
        d.acceptor.set_option(net::socket_base::reuse_address(true));
        d.acceptor.bind(ep);
        d.acceptor.listen();
        d.port = d.acceptor.local_endpoint().port();
    } catch (const boost::system::system_error& e) {
        throw NetworkError("ui-bridge cannot listen on " + d.opts.host + ":" + std::to_string(d.opts.port) + ": " +
                           e.what());
    }
    if (!d.opts.log_dir.empty()) d.runner.write_logs_to(d.opts.log_dir);
    d.runner.start();
    d.running.store(true);
    d.accept_loop();
    d.net_thread = std::thread([&d] { d.ioc.run(); });
    d.tick_thread = std::thread([&d] { d.tick_loop(); });
}

void UiBridge::stop() {
    auto& d = *impl_;
    if (!d.running.exchange(false)) return;
    if (d.tick_thread.joinable()) d.tick_thread.join();
    net::post(d.ioc, [&d] {
        beast::error_code ignored;
        d.acceptor.close(ignored);
    });
    d.ioc.stop();
    if (d.net_thread.joinable()) d.net_thread.join();
}

std::uint16_t UiBridge::port() const { return impl_->port; }

std::int64_t UiBridge::ticks() const { return impl_->ticks.load(); }

std::string UiBridge::state_hash() const {
    std::lock_guard lock(impl_->state_mu);
    return vrpanel::state_hash(impl_->runner.state());
}

SessionLog UiBridge::server_log() const {
    std::lock_guard lock(impl_->state_mu);
    return impl_->runner.server_log();
}

SessionLog UiBridge::detection_log() const {
    std::lock_guard lock(impl_->state_mu);
    return impl_->runner.detection_log();
}

}  // namespace vrpanel
