#include "vrpanel/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fcntl.h>
#include <mutex>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

#include "vrpanel/errors.hpp"

namespace vrpanel {

namespace {

using Clock = std::chrono::steady_clock;

// One direction of an in-process link.
struct Pipe {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<Clock::time_point, std::string>> queue;
    bool closed = false;
};

class InProcessConnection final : public Connection {
public:
    InProcessConnection(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in, LinkOptions opts)
        : out_(std::move(out)), in_(std::move(in)), opts_(opts) {}
    ~InProcessConnection() override { close(); }

    void send(const FrameMessage& m) override {
        std::string bytes = encode_frame(m);
        std::lock_guard lock(out_->mu);
        if (out_->closed) throw NetworkError("send on closed in-process link");
        out_->queue.emplace_back(Clock::now() + opts_.latency, std::move(bytes));
        out_->cv.notify_all();
    }

    std::optional<FrameMessage> receive(Millis timeout) override {
        const auto deadline = Clock::now() + timeout;
        std::unique_lock lock(in_->mu);
        for (;;) {
            if (!in_->queue.empty()) {
                const auto due = in_->queue.front().first;
                if (due <= Clock::now()) {
                    std::string bytes = std::move(in_->queue.front().second);
                    in_->queue.pop_front();
                    lock.unlock();
                    auto msg = decode_frame(bytes);
                    if (!msg) throw ProtocolViolation("truncated in-process frame");
                    return msg;
                }
                if (due > deadline) {
                    in_->cv.wait_until(lock, deadline);
                    if (Clock::now() >= deadline) return std::nullopt;
                } else {
                    in_->cv.wait_until(lock, due);
                }
                continue;
            }
            if (in_->closed) throw NetworkError("peer closed the in-process link");
            if (in_->cv.wait_until(lock, deadline) == std::cv_status::timeout && in_->queue.empty() &&
                !in_->closed)
                return std::nullopt;
        }
    }

    void close() override {
        for (auto* pipe : {out_.get(), in_.get()}) {
            std::lock_guard lock(pipe->mu);
            pipe->closed = true;
            pipe->cv.notify_all();
        }
    }

private:
    std::shared_ptr<Pipe> out_;
    std::shared_ptr<Pipe> in_;
    LinkOptions opts_;
};

class TcpConnection final : public Connection {
public:
    explicit TcpConnection(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ~TcpConnection() override { close(); }

    void send(const FrameMessage& m) override {
        const std::string bytes = encode_frame(m);
        std::lock_guard lock(send_mu_);
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw NetworkError(std::string("send failed: ") + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    std::optional<FrameMessage> receive(Millis timeout) override {
        const auto deadline = Clock::now() + timeout;
        for (;;) {
            if (auto msg = decode_frame(buffer_)) return msg;
            if (eof_) throw NetworkError("peer closed the connection");
            const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
            if (left.count() < 0) return std::nullopt;
            pollfd p{fd_, POLLIN, 0};
            const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw NetworkError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) {
                if (Clock::now() >= deadline) return std::nullopt;
                continue;
            }
            char chunk[65536];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                throw NetworkError(std::string("recv failed: ") + std::strerror(errno));
            }
            if (n == 0)
                eof_ = true;
            else
                buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void close() override {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_;
    std::mutex send_mu_;
    std::string buffer_;
    bool eof_ = false;
};

sockaddr_in make_address(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &addr.sin_addr) != 1) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
            throw NetworkError("cannot resolve host '" + host + "'");
        addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
        ::freeaddrinfo(res);
    }
    return addr;
}

}  // namespace

std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>> make_in_process_link(LinkOptions opts) {
    auto a_to_b = std::make_shared<Pipe>();
    auto b_to_a = std::make_shared<Pipe>();
    return {std::make_unique<InProcessConnection>(a_to_b, b_to_a, opts),
            std::make_unique<InProcessConnection>(b_to_a, a_to_b, opts)};
}

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw NetworkError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = make_address(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
        const std::string why = std::strerror(errno);
        close();
        throw NetworkError("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::unique_ptr<Connection> TcpListener::accept(Millis timeout) {
    pollfd p{fd_, POLLIN, 0};
    int rc;
    do {
        rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc <= 0) throw NetworkError("no channel connected within " + std::to_string(timeout.count()) + " ms");
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw NetworkError(std::string("accept: ") + std::strerror(errno));
    return std::make_unique<TcpConnection>(fd);
}

std::unique_ptr<Connection> connect_tcp(const std::string& host, std::uint16_t port, Millis timeout) {
    const sockaddr_in addr = make_address(host, port);
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw NetworkError(std::string("socket: ") + std::strerror(errno));
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0)
            return std::make_unique<TcpConnection>(fd);
        const std::string why = std::strerror(errno);
        ::close(fd);
        if (Clock::now() >= deadline)
            throw NetworkError("cannot connect to " + host + ":" + std::to_string(port) + ": " + why);
        std::this_thread::sleep_for(Millis{50});
    }
}

}  // namespace vrpanel
