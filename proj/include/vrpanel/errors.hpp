#pragma once

#include <stdexcept>
#include <string>

namespace vrpanel {

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind {
    BadInput,  // malformed files, invalid configuration, degenerate data
    Runtime,   // protocol violations, time regressions, internal failures
    Network,   // bind/connect/timeouts on the channel transport
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(ErrorKind::BadInput, what) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::BadInput, what) {}
};

struct DegenerateConfiguration : Error {
    explicit DegenerateConfiguration(const std::string& what) : Error(ErrorKind::BadInput, what) {}
};

struct InsufficientData : Error {
    explicit InsufficientData(const std::string& what) : Error(ErrorKind::BadInput, what) {}
};

struct NoVisibleMarker : Error {
    explicit NoVisibleMarker(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

struct OrderingError : Error {
    explicit OrderingError(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

struct UnknownWidget : Error {
    explicit UnknownWidget(const std::string& id) : Error(ErrorKind::BadInput, "unknown widget '" + id + "'") {}
};

struct ProtocolViolation : Error {
    explicit ProtocolViolation(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

struct ChannelTimeout : Error {
    ChannelTimeout(int channel, const std::string& what)
        : Error(ErrorKind::Network, what), channel_(channel) {}
    int channel() const noexcept { return channel_; }

private:
    int channel_;
};

struct NetworkError : Error {
    explicit NetworkError(const std::string& what) : Error(ErrorKind::Network, what) {}
};

struct SessionMismatch : Error {
    explicit SessionMismatch(const std::string& what) : Error(ErrorKind::BadInput, what) {}
};

}  // namespace vrpanel
