#include "vrpanel/session_log.hpp"

#include <algorithm>
#include <sstream>

#include "vrpanel/errors.hpp"
#include "vrpanel/trace.hpp"

namespace vrpanel {

using nlohmann::json;

std::string to_string(LogSide side) { return side == LogSide::Detection ? "detection" : "server"; }

LogSide parse_log_side(const std::string& text) {
    if (text == "detection") return LogSide::Detection;
    if (text == "server") return LogSide::Server;
    throw ParseError("unknown log side '" + text + "'");
}

json record_to_json(const LogRecord& r) {
    json j{{"t", r.time}};
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, InputFrame>) {
                j["input"] = frame_to_json(p);
            } else if constexpr (std::is_same_v<T, OperationEvent>) {
                j["operation"] = operation_to_json(p);
            } else if constexpr (std::is_same_v<T, StateDelta>) {
                j["delta"] = delta_to_json(p);
            } else if constexpr (std::is_same_v<T, Stimulus>) {
                j["stimulus"] = {{"name", p.name}, {"widget", p.widget}};
            } else {
                j["note"] = p.text;
            }
        },
        r.payload);
    return j;
}

LogRecord record_from_json(const json& j) {
    LogRecord r;
    r.time = j.at("t").get<double>();
    if (j.contains("input"))
        r.payload = frame_from_json(j.at("input"));
    else if (j.contains("operation"))
        r.payload = operation_from_json(j.at("operation"));
    else if (j.contains("delta"))
        r.payload = delta_from_json(j.at("delta"));
    else if (j.contains("stimulus"))
        r.payload = Stimulus{j.at("stimulus").at("name").get<std::string>(),
                             j.at("stimulus").value("widget", std::string{})};
    else if (j.contains("note"))
        r.payload = Note{j.at("note").get<std::string>()};
    else
        throw ParseError("log record without a payload");
    return r;
}

void SessionLog::append(LogRecord r) {
    if (!records.empty() && r.time < records.back().time) {
        std::ostringstream os;
        os << "log record at t=" << r.time << " precedes t=" << records.back().time;
        throw OrderingError(os.str());
    }
    records.push_back(std::move(r));
}

namespace {

json header(const std::string& session_id, LogSide side) {
    return {{"session_id", session_id}, {"side", to_string(side)}, {"version", kLogVersion}};
}

}  // namespace

LogWriter::LogWriter(const std::filesystem::path& path, std::string session_id, LogSide side)
    : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw ValidationError("cannot write log " + path.string());
    out_ << header(session_id, side).dump() << '\n';
    out_.flush();
}

void LogWriter::append(const LogRecord& r) {
    if (last_ && r.time < *last_)
        throw OrderingError("log record at t=" + std::to_string(r.time) + " precedes the previous record");
    last_ = r.time;
    out_ << record_to_json(r).dump() << '\n';
    out_.flush();
}

void persist(const SessionLog& log, const std::filesystem::path& path) {
    LogWriter w(path, log.session_id, log.side);
    for (const auto& r : log.records) w.append(r);
}

SessionLog load_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open log " + path.string());
    SessionLog log;
    std::string line;
    std::size_t n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (!have_header) {
                log.session_id = j.at("session_id").get<std::string>();
                log.side = parse_log_side(j.at("side").get<std::string>());
                if (j.value("version", 0) != kLogVersion) throw ParseError("unsupported log version");
                have_header = true;
            } else {
                log.append(record_from_json(j));
            }
        } catch (const json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    if (!have_header) throw ParseError(path.string() + ": missing log header");
    return log;
}

// ---- analysis ----

RecordPredicate is_stimulus(const std::string& name) {
    return [name](const LogRecord& r) {
        const auto* s = std::get_if<Stimulus>(&r.payload);
        return s && s->name == name;
    };
}

RecordPredicate is_operation(const std::string& widget, std::optional<OperationKind> kind) {
    return [widget, kind](const LogRecord& r) {
        const auto* op = std::get_if<OperationEvent>(&r.payload);
        return op && (widget.empty() || op->widget == widget) && (!kind || op->kind == *kind);
    };
}

namespace {

struct Mark {
    double time;
    std::size_t order;  // position in the merged record order
};

ResponseStats pair_up(const std::vector<Mark>& stimuli, const std::vector<Mark>& responses, double window) {
    ResponseStats st;
    std::vector<bool> used(responses.size(), false);
    double sum = 0.0;
    for (const Mark& s : stimuli) {
        bool matched = false;
        for (std::size_t i = 0; i < responses.size(); ++i) {
            const Mark& r = responses[i];
            if (used[i] || r.order <= s.order) continue;
            const double dt = r.time - s.time;
            if (dt > window) break;
            used[i] = true;
            matched = true;
            if (st.count == 0) {
                st.shortest = st.longest = dt;
            } else {
                st.shortest = std::min(st.shortest, dt);
                st.longest = std::max(st.longest, dt);
            }
            ++st.count;
            sum += dt;
            break;
        }
        if (!matched) ++st.misses;
    }
    if (st.count > 0) {
        st.defined = true;
        st.average = sum / static_cast<double>(st.count);
    }
    return st;
}

}  // namespace

ResponseStats response_times(const SessionLog& log, const RecordPredicate& stimulus,
                             const RecordPredicate& response, double window) {
    std::vector<Mark> s, r;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& rec = log.records[i];
        if (stimulus(rec)) s.push_back({rec.time, i});
        if (response(rec)) r.push_back({rec.time, i});
    }
    return pair_up(s, r, window);
}

ResponseStats response_times(const SessionLog& stimuli, const SessionLog& responses,
                             const RecordPredicate& stimulus, const RecordPredicate& response,
                             double window) {
    // Merge by time; at equal times the response counts as earlier, so a
    // response never pairs with a simultaneous stimulus from the other log.
    std::vector<Mark> s, r;
    for (const auto& rec : stimuli.records)
        if (stimulus(rec)) s.push_back({rec.time, 0});
    for (const auto& rec : responses.records)
        if (response(rec)) r.push_back({rec.time, 0});
    std::size_t order = 0, i = 0, k = 0;
    while (i < s.size() || k < r.size()) {
        if (k < r.size() && (i == s.size() || r[k].time <= s[i].time))
            r[k++].order = order++;
        else
            s[i++].order = order++;
    }
    return pair_up(s, r, window);
}

std::vector<OperationEvent> operations_of(const SessionLog& log) {
    std::vector<OperationEvent> out;
    for (const auto& rec : log.records)
        if (const auto* op = std::get_if<OperationEvent>(&rec.payload)) out.push_back(*op);
    return out;
}

ErrorReport error_count(const SessionLog& log, const std::vector<OperationEvent>& script, double tolerance) {
    const auto ops = operations_of(log);
    std::vector<bool> used(ops.size(), false);
    ErrorReport rep;
    for (const auto& want : script) {
        bool found = false;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            if (used[i] || ops[i].widget != want.widget || !(ops[i].kind == want.kind)) continue;
            if (std::abs(ops[i].time - want.time) > tolerance) continue;
            used[i] = true;
            found = true;
            break;
        }
        if (!found) rep.missed.push_back(want);
    }
    for (std::size_t i = 0; i < ops.size(); ++i)
        if (!used[i]) rep.extraneous.push_back(ops[i]);
    return rep;
}

std::string Discrepancy::describe() const {
    std::ostringstream os;
    os << (kind == Kind::OrphanOperation ? "orphan operation " : "unexpected delta for ") << to_string(operation.kind)
       << " '" << operation.widget << "' at t=" << operation.time;
    return os.str();
}

std::vector<Discrepancy> cross_check(const SessionLog& detection, const SessionLog& server) {
    if (detection.session_id != server.session_id)
        throw SessionMismatch("session ids differ: '" + detection.session_id + "' vs '" + server.session_id + "'");
    std::vector<OperationEvent> sources;
    for (const auto& rec : server.records)
        if (const auto* d = std::get_if<StateDelta>(&rec.payload); d && d->source) sources.push_back(*d->source);

    std::vector<Discrepancy> out;
    std::size_t j = 0;
    for (const auto& op : operations_of(detection)) {
        auto it = std::find(sources.begin() + static_cast<std::ptrdiff_t>(j), sources.end(), op);
        if (it == sources.end()) {
            out.push_back({Discrepancy::Kind::OrphanOperation, op});
            continue;
        }
        const auto k = static_cast<std::size_t>(it - sources.begin());
        for (; j < k; ++j) out.push_back({Discrepancy::Kind::UnexpectedDelta, sources[j]});
        j = k + 1;
    }
    for (; j < sources.size(); ++j) out.push_back({Discrepancy::Kind::UnexpectedDelta, sources[j]});
    return out;
}

// ---- stimuli ----

json stimulus_rule_to_json(const StimulusRule& r) {
    json j{{"name", r.name}};
    if (!r.widget.empty()) j["widget"] = r.widget;
    if (!r.state.empty()) j["state"] = r.state;
    if (!r.audio.empty()) j["audio"] = r.audio;
    return j;
}

StimulusRule stimulus_rule_from_json(const json& j) {
    StimulusRule r{j.at("name").get<std::string>(), j.value("widget", std::string{}), j.value("state", std::string{}),
                   j.value("audio", std::string{})};
    if (r.audio.empty() && (r.widget.empty() || r.state.empty()))
        throw ValidationError("stimulus '" + r.name + "' needs widget+state or audio");
    return r;
}

namespace {

std::string value_label(const WidgetValue& v) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LightState>) return to_string(s.mode);
            else if constexpr (std::is_same_v<T, MeterState>) return s.on ? "on" : "off";
            else if constexpr (std::is_same_v<T, ScreenState>) return s.on ? std::to_string(s.slide) : "off";
            else if constexpr (std::is_same_v<T, KnobState>) return std::to_string(s.value);
            else return s.on ? "on" : "off";
        },
        v);
}

}  // namespace

std::vector<Stimulus> StimulusDetector::observe(const StateDelta& delta) {
    std::vector<Stimulus> out;
    for (const auto& rule : rules_) {
        if (!rule.audio.empty()) {
            for (const auto& a : delta.audio)
                if (a.name == rule.audio) out.push_back({rule.name, rule.widget});
            continue;
        }
        for (const auto& c : delta.changes) {
            if (c.widget != rule.widget) continue;
            const std::string label = value_label(c.value);
            auto& last = last_[rule.name];
            if (label == rule.state && last != label) out.push_back({rule.name, rule.widget});
            last = label;
        }
    }
    return out;
}

SessionLog with_stimuli(const SessionLog& server, const std::vector<StimulusRule>& rules) {
    SessionLog out{server.session_id, server.side, {}};
    StimulusDetector det(rules);
    for (const auto& rec : server.records) {
        if (std::holds_alternative<Stimulus>(rec.payload)) continue;
        out.records.push_back(rec);
        if (const auto* d = std::get_if<StateDelta>(&rec.payload))
            for (auto& s : det.observe(*d)) out.records.push_back({rec.time, std::move(s)});
    }
    return out;
}

}  // namespace vrpanel
