#include "imon/tracker.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>

#include <nlohmann/json.hpp>

namespace imon {

using json = nlohmann::ordered_json;

InactivityTracker::InactivityTracker(std::string participant_id)
    : pid_(std::move(participant_id)) {}

std::optional<InactivityEvent> InactivityTracker::emit(i64 end_ms,
                                                       const char* reason) {
  const i64 dur_ms = end_ms - start_ms_ - held_accum_ms_;
  held_accum_ms_ = 0;
  if (dur_ms < 1000) return std::nullopt;
  InactivityEvent ev;
  ev.pid = pid_;
  ev.start_ms = start_ms_;
  ev.end_ms = end_ms;
  ev.dur_s = double(dur_ms) / 1000.0;
  ev.reason = reason;
  return ev;
}

std::optional<InactivityEvent> InactivityTracker::step(const FrameObs& obs) {
  if (obs.ts_ms <= last_ts_)
    throw DataError("non-monotone timestamp at frame " +
                    std::to_string(obs.frame_index));
  last_ts_ = obs.ts_ms;
  const i64 ts = obs.ts_ms;
  const bool vote_out = obs.verdict == Verdict::NotHuman;

  switch (phase_) {
    case Phase::NoPerson:
      if (!vote_out && obs.human) {
        if (obs.motion) {
          phase_ = Phase::Active;
        } else {
          phase_ = Phase::Inactive;
          start_ms_ = ts;
          held_accum_ms_ = 0;
        }
      }
      return std::nullopt;

    case Phase::Active:
      if (vote_out || (!obs.human && !obs.occluded)) {
        phase_ = Phase::NoPerson;
      } else if (obs.human && !obs.motion) {
        phase_ = Phase::Inactive;
        start_ms_ = ts;
        held_accum_ms_ = 0;
      }
      // Occlusion while active carries no information; wait it out.
      return std::nullopt;

    case Phase::Inactive:
      if (vote_out) {
        phase_ = Phase::NoPerson;
        return emit(ts, "non-human-vote");
      }
      if (!obs.human && obs.occluded) {
        phase_ = Phase::Held;
        held_since_ms_ = ts;
        return std::nullopt;
      }
      if (!obs.human) {
        phase_ = Phase::NoPerson;
        return emit(ts, "person-left");
      }
      if (obs.motion) {
        phase_ = Phase::Active;
        return emit(ts, "motion");
      }
      return std::nullopt;

    case Phase::Held:
      if (vote_out) {
        held_accum_ms_ += ts - held_since_ms_;
        phase_ = Phase::NoPerson;
        return emit(ts, "non-human-vote");
      }
      if (obs.human) {
        held_accum_ms_ += ts - held_since_ms_;
        if (obs.motion) {
          phase_ = Phase::Active;
          return emit(ts, "motion");
        }
        phase_ = Phase::Inactive;
        return std::nullopt;
      }
      if (!obs.occluded) {
        held_accum_ms_ += ts - held_since_ms_;
        phase_ = Phase::NoPerson;
        return emit(ts, "person-left");
      }
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<InactivityEvent> InactivityTracker::finish() {
  if (phase_ == Phase::Held) held_accum_ms_ += last_ts_ - held_since_ms_;
  if (phase_ == Phase::Inactive || phase_ == Phase::Held) {
    phase_ = Phase::NoPerson;
    return emit(last_ts_, "stream-end");
  }
  phase_ = Phase::NoPerson;
  return std::nullopt;
}

std::string event_to_json(const InactivityEvent& ev) {
  json j{{"pid", ev.pid},
         {"start_ms", ev.start_ms},
         {"end_ms", ev.end_ms},
         {"dur_s", ev.dur_s},
         {"reason", ev.reason}};
  return j.dump();
}

EventLog::EventLog(const std::filesystem::path& path, bool fsync_each)
    : path_(path), fsync_each_(fsync_each) {
  ensure_open();
}

EventLog::~EventLog() {
  flush();
  if (fd_ >= 0) ::close(fd_);
}

bool EventLog::ensure_open() {
  if (fd_ >= 0) return true;
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  return fd_ >= 0;
}

bool EventLog::write_line(const std::string& line) {
  if (!ensure_open()) return false;
  ssize_t n = ::write(fd_, line.data(), line.size());
  if (n != ssize_t(line.size())) {
    // A partial line would corrupt the log; reopen before the retry so the
    // next attempt starts a fresh append.
    if (n > 0) {
      ::close(fd_);
      fd_ = -1;
    }
    return false;
  }
  if (fsync_each_) ::fsync(fd_);
  return true;
}

void EventLog::append(const InactivityEvent& ev) {
  flush();
  std::string line = event_to_json(ev) + "\n";
  if (!write_line(line)) pending_.push_back(std::move(line));
}

bool EventLog::flush() {
  while (!pending_.empty()) {
    if (!write_line(pending_.front())) return false;
    pending_.erase(pending_.begin());
  }
  return true;
}

std::vector<InactivityEvent> read_events(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open events: " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::vector<InactivityEvent> events;
  size_t pos = 0;
  int lineno = 0;
  while (pos < content.size()) {
    size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated trailing line
    std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      InactivityEvent ev;
      ev.pid = j.at("pid").get<std::string>();
      ev.start_ms = j.at("start_ms").get<i64>();
      ev.end_ms = j.at("end_ms").get<i64>();
      ev.dur_s = j.at("dur_s").get<double>();
      ev.reason = j.at("reason").get<std::string>();
      events.push_back(std::move(ev));
    } catch (const json::exception& e) {
      throw DataError("events line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace imon
