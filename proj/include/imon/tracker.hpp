#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imon/core.hpp"
#include "imon/suppress.hpp"

namespace imon {

// One anonymous log record. dur_s excludes spans where the person was fully
// occluded by pets (the timer is held there), so it can be less than
// (end_ms - start_ms)/1000.
struct InactivityEvent {
  std::string pid;
  i64 start_ms = 0;
  i64 end_ms = 0;
  double dur_s = 0.0;
  std::string reason;  // motion | person-left | non-human-vote | stream-end
};

// Per-frame observation driving the state machine. `occluded` = the
// foreground was non-empty before pet exclusion and empty after (the person
// is fully covered); `verdict` is the vote outcome delivered this frame.
struct FrameObs {
  int frame_index = 0;
  i64 ts_ms = 0;
  bool human = false;
  bool motion = false;
  bool occluded = false;
  Verdict verdict = Verdict::Undecided;
};

// Counts no-motion periods while a human is present. Phases:
//   no-person -> inactive  human appears without motion (timer starts)
//   no-person -> active    human appears moving
//   inactive  -> active    motion (emit if >= 1 s, reason motion)
//   inactive  -> no-person person left / not-human verdict (emit likewise)
//   inactive  -> held      full pet occlusion; clock paused, the occluded
//                          span is excluded from the duration
//   held      -> inactive/active/no-person when the occlusion lifts
// finish() flushes an open period with reason stream-end. Events shorter
// than 1 s (after exclusion) are dropped at emission time.
class InactivityTracker {
 public:
  explicit InactivityTracker(std::string participant_id);

  // Throws DataError on a non-monotone timestamp (names the frame).
  std::optional<InactivityEvent> step(const FrameObs& obs);
  std::optional<InactivityEvent> finish();

  enum class Phase { NoPerson, Active, Inactive, Held };
  Phase phase() const { return phase_; }

 private:
  std::string pid_;
  Phase phase_ = Phase::NoPerson;
  i64 last_ts_ = -1;
  i64 start_ms_ = 0;       // inactivity period start
  i64 held_since_ms_ = 0;  // entry into Held
  i64 held_accum_ms_ = 0;  // excluded occlusion time in the open period

  std::optional<InactivityEvent> emit(i64 end_ms, const char* reason);
};

// Append-only JSONL event log. Each event is written as one line in a single
// write call (line-atomic for concurrent readers); failed writes are buffered
// and retried on the next append/flush, never dropped silently.
class EventLog {
 public:
  explicit EventLog(const std::filesystem::path& path, bool fsync_each = false);
  ~EventLog();

  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  void append(const InactivityEvent& ev);
  // Retries buffered lines; returns true when nothing remains buffered.
  bool flush();
  size_t buffered() const { return pending_.size(); }

 private:
  std::filesystem::path path_;
  bool fsync_each_ = false;
  int fd_ = -1;
  std::vector<std::string> pending_;

  bool write_line(const std::string& line);
  bool ensure_open();
};

std::string event_to_json(const InactivityEvent& ev);

// Ignores a trailing line without '\n' (a concurrent writer may still be on
// it); throws DataError on malformed complete lines.
std::vector<InactivityEvent> read_events(const std::filesystem::path& path);

}  // namespace imon
