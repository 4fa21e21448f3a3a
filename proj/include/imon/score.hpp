#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "imon/core.hpp"
#include "imon/labels.hpp"
#include "imon/tracker.hpp"

namespace imon {

// Per-frame pipeline verdicts, one line per frame in frames.jsonl.
struct FrameState {
  int frame = 0;
  i64 ts_ms = 0;
  bool human = false;
  bool motion = false;
  bool occluded = false;
};

void save_frames(const std::vector<FrameState>& states,
                 const std::filesystem::path& file);
std::vector<FrameState> load_frames(const std::filesystem::path& file);

struct FrameScores {
  int k = 0;  // tolerance radius in frames
  u64 frames = 0;
  u64 hufp_count = 0, hufn_count = 0, mofp_count = 0, mofn_count = 0;
  double hufp = 0, hufn = 0, mofp = 0, mofn = 0;  // counts / frames
};

// A predicted flag at frame i is an error only if it disagrees with the
// ground truth at every frame in [i-k, i+k]; continuous-movement intervals
// make every covered frame motion-positive, everything else motion-negative.
FrameScores score_frames(const std::vector<FrameState>& pred,
                         const GroundTruth& gt, int k);

// Aggregate scores over multiple clips (sums counts, recomputes rates).
FrameScores merge_scores(const std::vector<FrameScores>& parts);

struct EventAccuracy {
  double mean_abs_offset = 0.0;  // frames, over matched boundaries
  int matched = 0;
  int misses = 0;  // gt events with no overlapping prediction
  int ghosts = 0;  // predictions with no overlapping gt event
};

using FrameSpan = std::pair<int, int>;  // [start, end) in frames

// Greedy matching by descending overlap; each event matched at most once.
EventAccuracy event_accuracy(std::vector<FrameSpan> pred,
                             std::vector<FrameSpan> gt);

// Maximal runs of motion=true (or human=true) in per-frame states.
std::vector<FrameSpan> motion_runs(const std::vector<FrameState>& states);
std::vector<FrameSpan> human_runs(const std::vector<FrameState>& states);

// Ground-truth spans derived from labels.
std::vector<FrameSpan> gt_motion_spans(const GroundTruth& gt);
// Person present and not moving; spans shorter than min_frames dropped.
std::vector<FrameSpan> gt_inactivity_spans(const GroundTruth& gt,
                                           int frame_count,
                                           int min_frames = 1);

// Nearest frame whose timestamp is <= ms (last one if past the end).
int frame_for_ms(const std::vector<FrameState>& states, i64 ms);
std::vector<FrameSpan> events_to_spans(const std::vector<InactivityEvent>& ev,
                                       const std::vector<FrameState>& states);

// Fraction of gt span time covered by predicted events, in ms.
double span_recall_ms(const std::vector<std::pair<i64, i64>>& pred,
                      const std::vector<std::pair<i64, i64>>& gt);

}  // namespace imon
