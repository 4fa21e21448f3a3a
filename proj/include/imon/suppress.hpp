#pragma once

#include <deque>
#include <vector>

#include "imon/core.hpp"
#include "imon/kernels.hpp"

namespace imon {

struct GrowthParams {
  double box_margin = 0.10;       // fraction of image width, added on all sides
  double band_k = 2.8;            // band half-width in units of sigma_f
  double sigma_f_floor_mm = 5.0;
};

struct Detection {
  enum class Class { Human, Pet };
  Class klass = Class::Human;
  Rect bbox;
  double confidence = 1.0;
  int frame = -1;
};

// Depth-band region growing repairing split foregrounds. Each grown blob's
// bounding box is enlarged by box_margin*W on all sides (clipped), and every
// pixel inside with |d - m| < band_k * max(sigma_f, sigma_f_floor) joins the
// foreground. With multiple blobs, a blob is grown only when its area is
// within x2 either way and its mean depth within 300 mm of some blob of the
// two most recent accepted masks (entries for fg's own frame are ignored);
// with no recent reference at all, every blob is grown. A single blob is
// always grown. Blob metadata is recomputed on the grown mask; track ids are
// inherited from the original blob a component absorbed (largest area wins).
ForegroundMask grow_foreground(const ForegroundMask& fg, const DepthPlane& depth,
                               const GrowthParams& params,
                               const std::deque<ForegroundMask>& recent,
                               kern::Exec exec);

struct ExclusionResult {
  ForegroundMask fg;
  std::vector<Rect> applied_boxes;  // pet boxes cleared this frame
  bool fully_occluded = false;      // fg was non-empty and is now empty
};

// Removes every pixel inside any pet detection's bbox from the mask and
// recomputes blob metadata. Human detections are ignored here (they feed the
// vote). The applied boxes are reported so the pipeline can also drop motion
// inside them for this frame.
ExclusionResult exclude_pets(const ForegroundMask& fg,
                             const std::vector<Detection>& detections,
                             const DepthPlane& depth, kern::Exec exec);

// Human/non-human voting over detector samples.
enum class Verdict { Undecided, Human, NotHuman };

struct VoteSample {
  i64 ts_ms = 0;
  bool human = false;
};

struct VoteState {
  std::deque<VoteSample> window;  // ordered by time
  void reset() { window.clear(); }
};

// Appends one sample and decides. The window holds the last vote_window_s of
// samples, at most ceil(vote_window_s/detector_period_s) of them; a verdict
// is only reached once the window holds that full count (each sample stands
// for one detector period, so the window then spans vote_window_s). NotHuman
// when the not-human fraction >= vote_threshold (ties count as not-human),
// Human otherwise. On NotHuman the caller merges the foreground into the
// background and resets the state.
Verdict vote_step(VoteState& state, bool human_sample, i64 now_ms,
                  double vote_threshold, double vote_window_s,
                  double detector_period_s);

}  // namespace imon
