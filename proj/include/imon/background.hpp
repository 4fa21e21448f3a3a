#pragma once

#include <deque>
#include <span>
#include <vector>

#include "imon/config.hpp"
#include "imon/core.hpp"
#include "imon/kernels.hpp"

namespace imon {

// Log-likelihood of depth d against history samples under the quadratic
// approximation of the Gaussian-kernel density:
//   f(d) = -log(sqrt(2*pi)*sigma) - (1/(2*n*sigma^2)) * sum_i (d - h_i)^2
// Exact (vs the log of the kernel average) when all residuals are equal, and
// a lower bound otherwise.
double score_pixel(double d, std::span<const float> history, double sigma);

// Non-parametric depth background model. Holds a ring of n smoothed depth
// frames plus the running background BG_t; classifies pixels by comparing
// f(d_t) against rho and updates background pixels with an exponential blend.
class BackgroundModel {
 public:
  BackgroundModel(const PipelineConfig& cfg, kern::Exec exec);

  // Builds the model from the first k >= n person-free depth frames: each is
  // median-smoothed, the last n become the history, M is the mean absolute
  // successive-frame difference over valid pixels and
  // sigma = max(M / (0.68 * sqrt(2)), sigma_floor).
  // Throws DataError when k < n or no valid depth pixel exists.
  void init(const std::vector<const DepthPlane*>& frames);

  bool initialized() const { return initialized_; }
  double sigma() const { return sigma_; }
  double mean_abs_diff() const { return m_; }

  // Smooths frame.depth, scores it against the history and returns the
  // post-processed mask: 3x3 opening, minimum-area filter (min_blob_area
  // scaled by W*H/(640*480)), greedy IoU >= 0.3 track-id matching against the
  // previous accepted mask. Invalid depth never classifies as foreground.
  // The returned mask is also pushed into the two-deep `recent` ring.
  ForegroundMask detect(const RgbdFrame& frame);

  // Depth plane smoothed by the last detect(); valid until the next detect().
  const DepthPlane& smoothed() const { return smoothed_; }

  // Selective update with the same frame that was last passed to detect():
  // foreground pixels keep BG_{t-1} bit-exactly, background pixels with valid
  // depth blend toward D_t, and the new BG_t is pushed into the history.
  void update(const RgbdFrame& frame, const ForegroundMask& fg);

  // Not-human vote outcome: the region becomes background immediately. Copies
  // the current smoothed depth into BG_t and every history frame under the
  // mask and clears the recent ring.
  void merge_into_background(const Mask& fg_bits);

  const std::deque<ForegroundMask>& recent() const { return recent_; }
  const Plane<float>& latest() const { return latest_; }
  int history_size() const { return int(history_.size()); }

  // Releases the per-frame scratch planes. Afterwards the retained state is
  // the n-frame history, BG_t and the recent mask ring; the audit accessors
  // below report exactly that.
  void end_frame();
  int retained_depth_planes() const;
  int retained_masks() const;

 private:
  PipelineConfig cfg_;
  kern::Exec exec_;
  bool initialized_ = false;
  double sigma_ = 0.0;
  double m_ = 0.0;

  std::deque<Plane<float>> history_;  // oldest first, exactly n once initialized
  Plane<float> latest_;               // BG_t
  std::deque<ForegroundMask> recent_; // newest first, <= 2

  DepthPlane smoothed_;  // scratch: smoothed current frame
  Mask scratch_mask_;    // scratch: pre-opening classification
  Plane<i32> labels_;    // scratch: component labels
  int last_detect_index_ = -1;
  int next_track_id_ = 0;

  std::vector<const Plane<float>*> history_view() const;
  void assign_track_ids(std::vector<Blob>& blobs) const;
};

}  // namespace imon
