#include "imon/score.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace imon {

namespace {
using ordered_json = nlohmann::ordered_json;
}

void save_frames(const std::vector<FrameState>& states,
                 const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  for (const auto& s : states) {
    ordered_json j;
    j["frame"] = s.frame;
    j["ts_ms"] = s.ts_ms;
    j["human"] = s.human;
    j["motion"] = s.motion;
    j["occluded"] = s.occluded;
    out << j.dump() << '\n';
  }
  if (!out.flush()) throw DataError("short write to " + file.string());
}

std::vector<FrameState> load_frames(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<FrameState> states;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      FrameState s;
      s.frame = j.at("frame").get<int>();
      s.ts_ms = j.at("ts_ms").get<i64>();
      s.human = j.at("human").get<bool>();
      s.motion = j.at("motion").get<bool>();
      s.occluded = j.at("occluded").get<bool>();
      states.push_back(s);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  for (size_t i = 0; i < states.size(); ++i)
    if (states[i].frame != static_cast<int>(i))
      throw DataError(file.string() + ": frames not contiguous at line " +
                      std::to_string(i + 1));
  return states;
}

FrameScores score_frames(const std::vector<FrameState>& pred,
                         const GroundTruth& gt, int k) {
  if (pred.empty()) throw DataError("score_frames: no predicted frames");
  if (k < 0) throw DataError("score_frames: negative tolerance");
  const int n = static_cast<int>(pred.size());

  std::vector<u8> gt_human(static_cast<size_t>(n)), gt_motion(
                                                        static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    gt_human[static_cast<size_t>(i)] = gt.person_at(i) ? 1 : 0;
    gt_motion[static_cast<size_t>(i)] = gt.motion_at(i) ? 1 : 0;
  }
  for (const auto& r : gt.person)
    if (r.end_frame > n)
      throw DataError("score_frames: gt person range exceeds prediction");
  for (const auto& r : gt.motion)
    if (r.end_frame > n)
      throw DataError("score_frames: gt motion range exceeds prediction");

  auto matches = [&](const std::vector<u8>& truth, int i, bool value) {
    const int lo = std::max(0, i - k), hi = std::min(n - 1, i + k);
    for (int j = lo; j <= hi; ++j)
      if ((truth[static_cast<size_t>(j)] != 0) == value) return true;
    return false;
  };

  FrameScores s;
  s.k = k;
  s.frames = static_cast<u64>(n);
  for (int i = 0; i < n; ++i) {
    const auto& p = pred[static_cast<size_t>(i)];
    if (p.human && !matches(gt_human, i, true)) ++s.hufp_count;
    if (!p.human && !matches(gt_human, i, false)) ++s.hufn_count;
    if (p.motion && !matches(gt_motion, i, true)) ++s.mofp_count;
    if (!p.motion && !matches(gt_motion, i, false)) ++s.mofn_count;
  }
  const double f = static_cast<double>(n);
  s.hufp = static_cast<double>(s.hufp_count) / f;
  s.hufn = static_cast<double>(s.hufn_count) / f;
  s.mofp = static_cast<double>(s.mofp_count) / f;
  s.mofn = static_cast<double>(s.mofn_count) / f;
  return s;
}

FrameScores merge_scores(const std::vector<FrameScores>& parts) {
  if (parts.empty()) throw DataError("merge_scores: nothing to merge");
  FrameScores s;
  s.k = parts.front().k;
  for (const auto& p : parts) {
    if (p.k != s.k) throw DataError("merge_scores: mixed tolerances");
    s.frames += p.frames;
    s.hufp_count += p.hufp_count;
    s.hufn_count += p.hufn_count;
    s.mofp_count += p.mofp_count;
    s.mofn_count += p.mofn_count;
  }
  const double f = static_cast<double>(s.frames);
  s.hufp = static_cast<double>(s.hufp_count) / f;
  s.hufn = static_cast<double>(s.hufn_count) / f;
  s.mofp = static_cast<double>(s.mofp_count) / f;
  s.mofn = static_cast<double>(s.mofn_count) / f;
  return s;
}

EventAccuracy event_accuracy(std::vector<FrameSpan> pred,
                             std::vector<FrameSpan> gt) {
  struct Cand {
    int overlap;
    size_t pi, gi;
  };
  std::vector<Cand> cands;
  for (size_t pi = 0; pi < pred.size(); ++pi)
    for (size_t gi = 0; gi < gt.size(); ++gi) {
      const int ov = std::min(pred[pi].second, gt[gi].second) -
                     std::max(pred[pi].first, gt[gi].first);
      if (ov > 0) cands.push_back({ov, pi, gi});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.pi < b.pi;
  });

  std::vector<u8> pred_used(pred.size()), gt_used(gt.size());
  EventAccuracy acc;
  double offset_sum = 0.0;
  for (const auto& c : cands) {
    if (pred_used[c.pi] || gt_used[c.gi]) continue;
    pred_used[c.pi] = gt_used[c.gi] = 1;
    ++acc.matched;
    offset_sum += std::abs(pred[c.pi].first - gt[c.gi].first) +
                  std::abs(pred[c.pi].second - gt[c.gi].second);
  }
  acc.misses = static_cast<int>(gt.size()) - acc.matched;
  acc.ghosts = static_cast<int>(pred.size()) - acc.matched;
  if (acc.matched > 0) acc.mean_abs_offset = offset_sum / (2.0 * acc.matched);
  return acc;
}

namespace {

template <typename Flag>
std::vector<FrameSpan> runs_of(const std::vector<FrameState>& states,
                               Flag flag) {
  std::vector<FrameSpan> out;
  int start = -1;
  for (size_t i = 0; i < states.size(); ++i) {
    if (flag(states[i])) {
      if (start < 0) start = static_cast<int>(i);
    } else if (start >= 0) {
      out.emplace_back(start, static_cast<int>(i));
      start = -1;
    }
  }
  if (start >= 0) out.emplace_back(start, static_cast<int>(states.size()));
  return out;
}

}  // namespace

std::vector<FrameSpan> motion_runs(const std::vector<FrameState>& states) {
  return runs_of(states, [](const FrameState& s) { return s.motion; });
}

std::vector<FrameSpan> human_runs(const std::vector<FrameState>& states) {
  return runs_of(states, [](const FrameState& s) { return s.human; });
}

std::vector<FrameSpan> gt_motion_spans(const GroundTruth& gt) {
  std::vector<FrameSpan> out;
  out.reserve(gt.motion.size());
  for (const auto& m : gt.motion) out.emplace_back(m.start_frame, m.end_frame);
  return out;
}

std::vector<FrameSpan> gt_inactivity_spans(const GroundTruth& gt,
                                           int frame_count, int min_frames) {
  std::vector<FrameSpan> out;
  int start = -1;
  for (int i = 0; i < frame_count; ++i) {
    const bool inactive = gt.person_at(i) && !gt.motion_at(i);
    if (inactive) {
      if (start < 0) start = i;
    } else if (start >= 0) {
      if (i - start >= min_frames) out.emplace_back(start, i);
      start = -1;
    }
  }
  if (start >= 0 && frame_count - start >= min_frames)
    out.emplace_back(start, frame_count);
  return out;
}

int frame_for_ms(const std::vector<FrameState>& states, i64 ms) {
  if (states.empty()) throw DataError("frame_for_ms: no frames");
  auto it = std::upper_bound(
      states.begin(), states.end(), ms,
      [](i64 value, const FrameState& s) { return value < s.ts_ms; });
  if (it == states.begin()) return states.front().frame;
  return std::prev(it)->frame;
}

std::vector<FrameSpan> events_to_spans(const std::vector<InactivityEvent>& ev,
                                       const std::vector<FrameState>& states) {
  std::vector<FrameSpan> out;
  out.reserve(ev.size());
  for (const auto& e : ev) {
    const int s = frame_for_ms(states, e.start_ms);
    int t = frame_for_ms(states, e.end_ms);
    if (t <= s) t = s + 1;
    out.emplace_back(s, t);
  }
  return out;
}

double span_recall_ms(const std::vector<std::pair<i64, i64>>& pred,
                      const std::vector<std::pair<i64, i64>>& gt) {
  i64 total = 0, covered = 0;
  for (const auto& g : gt) {
    total += g.second - g.first;
    for (const auto& p : pred)
      covered += std::max<i64>(
          0, std::min(g.second, p.second) - std::max(g.first, p.first));
  }
  if (total == 0) throw DataError("span_recall_ms: empty ground truth");
  return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace imon
