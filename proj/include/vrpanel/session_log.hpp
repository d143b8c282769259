#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vrpanel/logic_engine.hpp"
#include "vrpanel/recognizer.hpp"

namespace vrpanel {

enum class LogSide { Detection, Server };
std::string to_string(LogSide side);
LogSide parse_log_side(const std::string& text);

struct Stimulus {
    std::string name;
    std::string widget;
    friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

// Free-form annotation, e.g. why a UI connection was dropped.
struct Note {
    std::string text;
    friend bool operator==(const Note&, const Note&) = default;
};

using LogPayload = std::variant<InputFrame, OperationEvent, StateDelta, Stimulus, Note>;

struct LogRecord {
    double time = 0.0;
    LogPayload payload;
    friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

nlohmann::json record_to_json(const LogRecord& r);
LogRecord record_from_json(const nlohmann::json& j);

inline constexpr int kLogVersion = 1;

struct SessionLog {
    std::string session_id;
    LogSide side = LogSide::Server;
    std::vector<LogRecord> records;

    // Throws OrderingError when r.time precedes the last record.
    void append(LogRecord r);
    friend bool operator==(const SessionLog&, const SessionLog&) = default;
};

// JSON lines; the first line is {"session_id", "side", "version"}.
void persist(const SessionLog& log, const std::filesystem::path& path);
// Throws ParseError naming the line; ValidationError when the file is missing.
SessionLog load_log(const std::filesystem::path& path);

// Append-only writer; every record is flushed as it is written.
class LogWriter {
public:
    LogWriter(const std::filesystem::path& path, std::string session_id, LogSide side);

    void append(const LogRecord& r);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::optional<double> last_;
};

// ---- analysis ----

using RecordPredicate = std::function<bool(const LogRecord&)>;

RecordPredicate is_stimulus(const std::string& name);
// Empty widget / kind match any operation.
RecordPredicate is_operation(const std::string& widget = {}, std::optional<OperationKind> kind = {});

struct ResponseStats {
    std::size_t count = 0;
    std::size_t misses = 0;
    double shortest = 0.0;
    double average = 0.0;
    double longest = 0.0;
    bool defined = false;  // false when nothing matched
};

// Each stimulus is paired with the first later, still unpaired response no
// more than `window` seconds after it.
ResponseStats response_times(const SessionLog& log, const RecordPredicate& stimulus,
                             const RecordPredicate& response, double window);
// Stimuli from one log, responses from another (server vs. detection side).
ResponseStats response_times(const SessionLog& stimuli, const SessionLog& responses,
                             const RecordPredicate& stimulus, const RecordPredicate& response,
                             double window);

struct ErrorReport {
    std::vector<OperationEvent> missed;      // scripted, never performed
    std::vector<OperationEvent> extraneous;  // performed, not scripted
    std::size_t total() const { return missed.size() + extraneous.size(); }
};

// Script entries match a logged operation of the same widget and kind within
// `tolerance` seconds, each operation at most once.
ErrorReport error_count(const SessionLog& log, const std::vector<OperationEvent>& script, double tolerance);

std::vector<OperationEvent> operations_of(const SessionLog& log);

struct Discrepancy {
    enum class Kind { OrphanOperation, UnexpectedDelta } kind;
    OperationEvent operation;
    std::string describe() const;
};

// Every detection-side operation must be the source of exactly one server
// delta, in order. Throws SessionMismatch on differing session ids.
std::vector<Discrepancy> cross_check(const SessionLog& detection, const SessionLog& server);

// ---- stimuli derived from deltas ----

// Fires when `widget` enters `state` ("on", "off", "flicker", or a slide
// number for screens), or, when `audio` is set, whenever that sound plays.
struct StimulusRule {
    std::string name;
    std::string widget;
    std::string state;
    std::string audio;
};

nlohmann::json stimulus_rule_to_json(const StimulusRule& r);
StimulusRule stimulus_rule_from_json(const nlohmann::json& j);

class StimulusDetector {
public:
    explicit StimulusDetector(std::vector<StimulusRule> rules) : rules_(std::move(rules)) {}
    std::vector<Stimulus> observe(const StateDelta& delta);

private:
    std::vector<StimulusRule> rules_;
    std::map<std::string, std::string> last_;
};

// Copy of a server log with Stimulus records inserted after the deltas that
// trigger them.
SessionLog with_stimuli(const SessionLog& server, const std::vector<StimulusRule>& rules);

}  // namespace vrpanel
