#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "imon/core.hpp"
#include "imon/kernels.hpp"

namespace imon {

struct MotionParams {
  int theta = 20;           // per-channel |difference| threshold
  int spatial_kernel = 5;   // binary median size, odd
  int temporal_window = 5;  // frames, odd
  int min_motion_pixels = 4;
};

struct MotionMask {
  int frame_index = -1;
  Mask bits;
  u64 pixel_count = 0;
};

// Pixel set iff inside fg and the frame difference is at least theta in every
// color channel (single- and dual-channel spikes, e.g. TV light, never pass).
Mask raw_motion(const ColorFrame& cur, const ColorFrame& prev, const Mask& fg,
                const MotionParams& p, kern::Exec exec);

bool has_motion(const MotionMask& m, const MotionParams& p);

// Spatial + temporal median over raw motion masks. Callers push one
// spatially filtered mask per frame; the filter emits the mask for the window
// center, so output lags input by temporal_window/2 frames. flush() emits the
// remaining centers at stream end (windows clipped to existing frames, still
// decided by strict majority).
class MotionFilter {
 public:
  MotionFilter(const MotionParams& p, kern::Exec exec);

  // 5x5 binary majority (the spatial median).
  Mask spatial_filter(const Mask& raw) const;

  // `frame_index` must increase by 1 per call.
  std::optional<MotionMask> push(const Mask& spatial, int frame_index);
  std::vector<MotionMask> flush();

  int window_size() const { return int(window_.size()); }

 private:
  MotionParams params_;
  kern::Exec exec_;
  std::deque<std::pair<int, Mask>> window_;  // oldest first
  int next_center_ = -1;
  int last_pushed_ = -1;

  MotionMask emit(int center);
};

}  // namespace imon
