#include "imon/motion.hpp"

namespace imon {

Mask raw_motion(const ColorFrame& cur, const ColorFrame& prev, const Mask& fg,
                const MotionParams& p, kern::Exec exec) {
  Mask out;
  kern::color_motion(cur, prev, fg, p.theta, out, exec);
  return out;
}

bool has_motion(const MotionMask& m, const MotionParams& p) {
  return m.pixel_count >= u64(p.min_motion_pixels);
}

MotionFilter::MotionFilter(const MotionParams& p, kern::Exec exec)
    : params_(p), exec_(exec) {}

Mask MotionFilter::spatial_filter(const Mask& raw) const {
  Mask out;
  kern::box_majority(raw, params_.spatial_kernel, out, exec_);
  return out;
}

MotionMask MotionFilter::emit(int center) {
  const int r = params_.temporal_window / 2;
  while (!window_.empty() && window_.front().first < center - r)
    window_.pop_front();
  std::vector<const Mask*> masks;
  masks.reserve(window_.size());
  for (const auto& [idx, m] : window_) masks.push_back(&m);
  MotionMask out;
  out.frame_index = center;
  kern::stack_majority(masks, out.bits, exec_);
  out.pixel_count = mask_count(out.bits);
  return out;
}

std::optional<MotionMask> MotionFilter::push(const Mask& spatial,
                                             int frame_index) {
  if (last_pushed_ >= 0 && frame_index != last_pushed_ + 1)
    throw DataError("motion filter fed out of order at frame " +
                    std::to_string(frame_index));
  last_pushed_ = frame_index;
  if (next_center_ < 0) next_center_ = frame_index;

  window_.emplace_back(frame_index, spatial);
  if (int(window_.size()) > params_.temporal_window) window_.pop_front();

  const int r = params_.temporal_window / 2;
  if (next_center_ <= frame_index - r) return emit(next_center_++);
  return std::nullopt;
}

std::vector<MotionMask> MotionFilter::flush() {
  std::vector<MotionMask> out;
  while (next_center_ >= 0 && next_center_ <= last_pushed_)
    out.push_back(emit(next_center_++));
  window_.clear();
  return out;
}

}  // namespace imon
