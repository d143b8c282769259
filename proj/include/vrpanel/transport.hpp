#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "vrpanel/protocol.hpp"

namespace vrpanel {

using Millis = std::chrono::milliseconds;

// Bidirectional, ordered message pipe between two lockstep participants.
class Connection {
public:
    virtual ~Connection() = default;

    virtual void send(const FrameMessage& m) = 0;
    // nullopt on timeout. Throws NetworkError once the peer has closed and
    // every pending message was consumed.
    virtual std::optional<FrameMessage> receive(Millis timeout) = 0;
    virtual void close() = 0;
};

struct LinkOptions {
    // Added to every message's delivery time.
    std::chrono::microseconds latency{0};
};

// Two connected endpoints backed by in-memory queues; messages still travel
// as encoded wire frames.
std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>> make_in_process_link(LinkOptions opts = {});

class TcpListener {
public:
    // Port 0 picks a free port. Throws NetworkError on bind failure.
    explicit TcpListener(std::uint16_t port, const std::string& host = "127.0.0.1");
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }
    // Throws NetworkError on timeout.
    std::unique_ptr<Connection> accept(Millis timeout);
    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// Throws NetworkError when the connection cannot be established.
std::unique_ptr<Connection> connect_tcp(const std::string& host, std::uint16_t port, Millis timeout = Millis{2000});

}  // namespace vrpanel
