#pragma once

// Flight log: one JSON object per line. A header line, one record per control cycle,
// and a closing summary line.

#include "dwa3d/dwa.hpp"
#include "dwa3d/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace dwa3d {

inline constexpr int kFlightLogSchema = 1;

enum class Outcome { Success, Collision, Timeout, Stall };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::Timeout: return "timeout";
    case Outcome::Stall: return "stall";
  }
  return "?";
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "success") return Outcome::Success;
  if (s == "collision") return Outcome::Collision;
  if (s == "timeout") return Outcome::Timeout;
  if (s == "stall") return Outcome::Stall;
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

/// Process exit status for a flight outcome.
inline int exit_code(Outcome o) {
  switch (o) {
    case Outcome::Success: return 0;
    case Outcome::Collision: return 2;
    case Outcome::Timeout: return 3;
    case Outcome::Stall: return 4;
  }
  return 1;
}
inline constexpr int kUsageExitCode = 64;

struct FlightRecord {
  double t = 0.0;
  DroneState state;
  VelocityCommand command;
  int subgoal = 0;
  bool planned = false;  // false on the terminal record
  double plan_ms = 0.0;  // wall time of the local planner call
  double map_ms = 0.0;   // wall time of scan integration
  std::size_t candidates = 0;
  std::size_t admissible = 0;
  bool no_admissible = false;
  double clearance = std::numeric_limits<double>::infinity();  // ground truth, drone center
  std::optional<std::size_t> stale_occupied;

  friend bool operator==(const FlightRecord& a, const FlightRecord& b) {
    auto st = [](const DroneState& s) { return std::tie(s.x, s.y, s.z, s.yaw, s.vx, s.vz, s.wz); };
    return a.t == b.t && st(a.state) == st(b.state) && a.command == b.command &&
           a.subgoal == b.subgoal && a.planned == b.planned && a.plan_ms == b.plan_ms &&
           a.map_ms == b.map_ms && a.candidates == b.candidates && a.admissible == b.admissible &&
           a.no_admissible == b.no_admissible && a.clearance == b.clearance &&
           a.stale_occupied == b.stale_occupied;
  }
};

struct FlightSummary {
  double flight_time = 0.0;
  double path_length = 0.0;
  double min_clearance = std::numeric_limits<double>::infinity();
  TimingStats plan_ms;
  std::size_t iterations = 0;
  friend bool operator==(const FlightSummary&, const FlightSummary&) = default;
};

struct FlightHeader {
  int schema_version = kFlightLogSchema;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string planner;
  std::string avoidance;
  nlohmann::json config = nlohmann::json::object();
  std::vector<Vec3> path;
  bool global_fallback = false;  // RRT* failed and the straight line was flown
  friend bool operator==(const FlightHeader&, const FlightHeader&) = default;
};

struct FlightLog {
  FlightHeader header;
  std::vector<FlightRecord> records;
  std::optional<Outcome> outcome;  // empty only for logs read leniently without a summary
  FlightSummary summary;
  friend bool operator==(const FlightLog&, const FlightLog&) = default;
};

/// Summary derived from the records alone.
inline FlightSummary compute_summary(const std::vector<FlightRecord>& records) {
  FlightSummary s;
  s.iterations = records.size();
  if (records.empty()) return s;
  s.flight_time = records.back().t;
  std::vector<double> times;
  for (std::size_t i = 0; i < records.size(); ++i) {
    s.min_clearance = std::min(s.min_clearance, records[i].clearance);
    if (i > 0) s.path_length += (records[i].state.position() - records[i - 1].state.position()).norm();
    if (records[i].planned) times.push_back(records[i].plan_ms);
  }
  s.plan_ms = timing_stats(std::move(times));
  return s;
}

class LogFormatError : public std::runtime_error {
 public:
  LogFormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

// Non-finite doubles are stored as strings so the JSON stays standard.
inline nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}
inline double num(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::invalid_argument("bad number '" + s + "'");
  }
  return j.get<double>();
}
inline nlohmann::json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
inline nlohmann::json stats_json(const TimingStats& t) {
  return {{"mean", t.mean}, {"median", t.median}, {"p95", t.p95}, {"max", t.max}, {"count", t.count}};
}
inline TimingStats stats_from(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("median").get<double>(), j.at("p95").get<double>(),
          j.at("max").get<double>(), j.at("count").get<std::size_t>()};
}

}  // namespace detail

inline nlohmann::json header_json(const FlightHeader& h) {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& w : h.path) path.push_back(detail::vec(w));
  return {{"type", "header"},   {"schema_version", h.schema_version}, {"scenario", h.scenario},
          {"seed", h.seed},     {"planner", h.planner},               {"avoidance", h.avoidance},
          {"config", h.config}, {"path", path},                       {"global_fallback", h.global_fallback}};
}

inline nlohmann::json record_json(const FlightRecord& r) {
  const auto& s = r.state;
  nlohmann::json j = {{"type", "record"},
                      {"t", r.t},
                      {"state", {s.x, s.y, s.z, s.yaw, s.vx, s.vz, s.wz}},
                      {"command", {r.command.vx, r.command.vz, r.command.wz}},
                      {"subgoal", r.subgoal},
                      {"planned", r.planned},
                      {"plan_ms", r.plan_ms},
                      {"map_ms", r.map_ms},
                      {"candidates", r.candidates},
                      {"admissible", r.admissible},
                      {"no_admissible", r.no_admissible},
                      {"clearance", detail::num(r.clearance)}};
  if (r.stale_occupied) j["stale_occupied"] = *r.stale_occupied;
  return j;
}

inline nlohmann::json summary_json(Outcome o, const FlightSummary& s) {
  return {{"type", "summary"},
          {"outcome", to_string(o)},
          {"flight_time", s.flight_time},
          {"path_length", s.path_length},
          {"min_clearance", detail::num(s.min_clearance)},
          {"plan_ms", detail::stats_json(s.plan_ms)},
          {"iterations", s.iterations}};
}

inline void write_log(std::ostream& os, const FlightLog& log) {
  if (!log.outcome) throw std::invalid_argument("cannot write a log without an outcome");
  os << header_json(log.header).dump() << '\n';
  for (const auto& r : log.records) os << record_json(r).dump() << '\n';
  os << summary_json(*log.outcome, log.summary).dump() << '\n';
}

inline void write_log(const std::string& path, const FlightLog& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_log(f, log);
  if (!f) throw std::runtime_error("failed writing " + path);
}

inline FlightRecord record_from(const nlohmann::json& j) {
  FlightRecord r;
  r.t = j.at("t").get<double>();
  const auto& s = j.at("state");
  if (!s.is_array() || s.size() != 7) throw std::invalid_argument("state must have 7 entries");
  r.state = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>(),
             s[4].get<double>(), s[5].get<double>(), s[6].get<double>()};
  const auto& c = j.at("command");
  if (!c.is_array() || c.size() != 3) throw std::invalid_argument("command must have 3 entries");
  r.command = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
  r.subgoal = j.at("subgoal").get<int>();
  r.planned = j.at("planned").get<bool>();
  r.plan_ms = j.at("plan_ms").get<double>();
  r.map_ms = j.at("map_ms").get<double>();
  r.candidates = j.at("candidates").get<std::size_t>();
  r.admissible = j.at("admissible").get<std::size_t>();
  r.no_admissible = j.at("no_admissible").get<bool>();
  r.clearance = detail::num(j.at("clearance"));
  if (j.contains("stale_occupied")) r.stale_occupied = j["stale_occupied"].get<std::size_t>();
  return r;
}

enum class ReadMode { Strict, Lenient };

/// Parses a log. Strict mode rejects version mismatches, malformed lines and a missing
/// summary, reporting the byte offset. Lenient mode stops at the first bad line and
/// returns what was read (outcome empty when the summary is missing).
inline FlightLog read_log(std::istream& is, ReadMode mode = ReadMode::Strict) {
  FlightLog log;
  std::string line;
  std::size_t offset = 0;
  bool have_header = false, have_summary = false;
  while (true) {
    const std::size_t line_start = offset;
    if (!std::getline(is, line)) break;
    const bool terminated = !is.eof();
    offset += line.size() + (terminated ? 1 : 0);
    if (line.empty()) continue;
    try {
      if (!terminated) throw std::invalid_argument("truncated line");
      if (have_summary) throw std::invalid_argument("content after summary");
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw std::invalid_argument("first line must be the header");
        auto& h = log.header;
        h.schema_version = j.at("schema_version").get<int>();
        if (h.schema_version != kFlightLogSchema)
          throw std::invalid_argument("unsupported schema_version " + std::to_string(h.schema_version));
        h.scenario = j.at("scenario").get<std::string>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.planner = j.at("planner").get<std::string>();
        h.avoidance = j.at("avoidance").get<std::string>();
        h.config = j.at("config");
        for (const auto& w : j.at("path")) h.path.push_back(detail::vec(w));
        h.global_fallback = j.at("global_fallback").get<bool>();
        have_header = true;
      } else if (type == "record") {
        FlightRecord r = record_from(j);
        if (!log.records.empty() && !(r.t > log.records.back().t))
          throw std::invalid_argument("records are not strictly time-ordered");
        log.records.push_back(r);
      } else if (type == "summary") {
        log.outcome = outcome_from_string(j.at("outcome").get<std::string>());
        auto& s = log.summary;
        s.flight_time = j.at("flight_time").get<double>();
        s.path_length = j.at("path_length").get<double>();
        s.min_clearance = detail::num(j.at("min_clearance"));
        s.plan_ms = detail::stats_from(j.at("plan_ms"));
        s.iterations = j.at("iterations").get<std::size_t>();
        have_summary = true;
      } else {
        throw std::invalid_argument("unknown line type '" + type + "'");
      }
    } catch (const std::exception& e) {
      if (mode == ReadMode::Lenient && have_header) return log;
      throw LogFormatError(std::string("flight log: ") + e.what(), line_start);
    }
  }
  if (!have_header) throw LogFormatError("flight log: missing header", offset);
  if (!have_summary && mode == ReadMode::Strict)
    throw LogFormatError("flight log: truncated, no summary", offset);
  return log;
}

inline FlightLog read_log(const std::string& path, ReadMode mode = ReadMode::Strict) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_log(f, mode);
}

}  // namespace dwa3d
