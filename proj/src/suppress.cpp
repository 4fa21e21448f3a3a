#include "imon/suppress.hpp"

#include <algorithm>
#include <cmath>

namespace imon {

namespace {

// Re-label a mask and carry track ids over from the blobs of `from`: each old
// blob locates the new component holding its pixels; on conflicts the
// largest-area old blob wins.
void relabel_with_ids(ForegroundMask& out, const ForegroundMask& from,
                      const DepthPlane& depth) {
  Plane<i32> labels;
  kern::label_blobs(out.bits, depth, labels, out.blobs);

  std::vector<i64> claim_area(out.blobs.size(), -1);
  for (const Blob& old : from.blobs) {
    // First surviving pixel of the old blob inside the new mask.
    i32 new_id = -1;
    for (int y = old.bbox.y; y < old.bbox.bottom() && new_id < 0; ++y)
      for (int x = old.bbox.x; x < old.bbox.right(); ++x) {
        if (from.bits.at(x, y) && out.bits.at(x, y)) {
          new_id = labels.at(x, y);
          break;
        }
      }
    if (new_id < 0) continue;  // blob fully removed
    if (old.area > claim_area[new_id]) {
      claim_area[new_id] = old.area;
      out.blobs[new_id].track_id = old.track_id;
    }
  }
}

}  // namespace

ForegroundMask grow_foreground(const ForegroundMask& fg, const DepthPlane& depth,
                               const GrowthParams& params,
                               const std::deque<ForegroundMask>& recent,
                               kern::Exec exec) {
  if (fg.blobs.empty()) return fg;

  // Reference blobs from the two most recent accepted masks of other frames.
  std::vector<const Blob*> refs;
  int taken = 0;
  for (const auto& r : recent) {
    if (r.frame_index == fg.frame_index) continue;
    if (taken++ == 2) break;
    for (const Blob& b : r.blobs) refs.push_back(&b);
  }

  auto qualifies = [&](const Blob& b) {
    if (fg.blobs.size() == 1) return true;
    if (refs.empty()) return true;  // nothing to compare against yet
    for (const Blob* r : refs) {
      double ratio = double(b.area) / double(r->area);
      if (ratio >= 0.5 && ratio <= 2.0 &&
          std::abs(b.mean_depth_mm - r->mean_depth_mm) <= 300.0)
        return true;
    }
    return false;
  };

  ForegroundMask out;
  out.frame_index = fg.frame_index;
  out.bits = fg.bits;
  const int margin = int(std::lround(params.box_margin * depth.width()));
  for (const Blob& b : fg.blobs) {
    if (!qualifies(b)) continue;
    const double band =
        params.band_k * std::max(b.depth_stddev_mm, params.sigma_f_floor_mm);
    kern::band_grow(depth, b.bbox.inflated(margin), b.mean_depth_mm, band,
                    out.bits, exec);
  }
  relabel_with_ids(out, fg, depth);
  return out;
}

ExclusionResult exclude_pets(const ForegroundMask& fg,
                             const std::vector<Detection>& detections,
                             const DepthPlane& depth, kern::Exec exec) {
  (void)exec;
  ExclusionResult res;
  res.fg = fg;
  for (const Detection& d : detections)
    if (d.klass == Detection::Class::Pet) res.applied_boxes.push_back(d.bbox);
  if (res.applied_boxes.empty() || fg.blobs.empty()) return res;

  for (const Rect& box : res.applied_boxes) {
    const Rect b = box.clipped(res.fg.bits.width(), res.fg.bits.height());
    for (int y = b.y; y < b.bottom(); ++y) {
      u8* row = res.fg.bits.row(y);
      std::fill(row + b.x, row + b.right(), u8(0));
    }
  }
  relabel_with_ids(res.fg, fg, depth);
  res.fully_occluded = !fg.blobs.empty() && res.fg.blobs.empty();
  return res;
}

Verdict vote_step(VoteState& state, bool human_sample, i64 now_ms,
                  double vote_threshold, double vote_window_s,
                  double detector_period_s) {
  state.window.push_back({now_ms, human_sample});

  const i64 span_ms = i64(std::llround(vote_window_s * 1000.0));
  while (!state.window.empty() &&
         now_ms - state.window.front().ts_ms >= span_ms)
    state.window.pop_front();

  const size_t required =
      size_t(std::max<i64>(1, std::llround(std::ceil(vote_window_s / detector_period_s))));
  while (state.window.size() > required) state.window.pop_front();

  if (state.window.size() < required) return Verdict::Undecided;
  size_t not_human = 0;
  for (const VoteSample& s : state.window)
    if (!s.human) ++not_human;
  const double frac = double(not_human) / double(state.window.size());
  return frac >= vote_threshold ? Verdict::NotHuman : Verdict::Human;
}

}  // namespace imon
