#include "imon/background.hpp"

#include <algorithm>
#include <cmath>

namespace imon {

double score_pixel(double d, std::span<const float> history, double sigma) {
  double ssq = 0.0;
  for (float h : history) {
    double r = d - double(h);
    ssq += r * r;
  }
  const double n = double(history.size());
  return -std::log(std::sqrt(2.0 * M_PI) * sigma) -
         ssq / (2.0 * n * sigma * sigma);
}

BackgroundModel::BackgroundModel(const PipelineConfig& cfg, kern::Exec exec)
    : cfg_(cfg), exec_(exec) {
  cfg_.validate();
}

std::vector<const Plane<float>*> BackgroundModel::history_view() const {
  std::vector<const Plane<float>*> v;
  v.reserve(history_.size());
  for (const auto& p : history_) v.push_back(&p);
  return v;
}

void BackgroundModel::init(const std::vector<const DepthPlane*>& frames) {
  const int n = cfg_.n_history;
  if (int(frames.size()) < n)
    throw DataError("background init needs " + std::to_string(n) +
                    " frames, got " + std::to_string(frames.size()));

  // Only the last n frames enter the model.
  std::vector<DepthPlane> smoothed(n);
  const size_t base = frames.size() - size_t(n);
  for (int i = 0; i < n; ++i)
    kern::median_u16(*frames[base + i], cfg_.median_kernel, smoothed[i], exec_);

  u64 valid_px = 0;
  for (const auto& s : smoothed)
    for (size_t i = 0; i < s.size(); ++i)
      if (s[i] != kInvalidDepth) ++valid_px;
  if (valid_px == 0) throw DataError("background init: all depth invalid");

  kern::DiffStats agg;
  for (int i = 0; i + 1 < n; ++i) {
    kern::DiffStats s = kern::abs_diff_stats(smoothed[i], smoothed[i + 1], exec_);
    agg.abs_sum += s.abs_sum;
    agg.count += s.count;
  }
  m_ = agg.count ? double(agg.abs_sum) / double(agg.count) : 0.0;
  sigma_ = std::max(m_ / (0.68 * std::sqrt(2.0)), cfg_.sigma_floor_mm);

  history_.clear();
  const int w = smoothed[0].width(), h = smoothed[0].height();
  for (int i = 0; i < n; ++i) {
    Plane<float> p(w, h, 0.0f);
    for (size_t j = 0; j < p.size(); ++j) p[j] = float(smoothed[i][j]);
    history_.push_back(std::move(p));
  }
  latest_ = history_.back();
  recent_.clear();
  next_track_id_ = 0;
  initialized_ = true;
}

void BackgroundModel::assign_track_ids(std::vector<Blob>& blobs) const {
  const std::vector<Blob>* prev =
      recent_.empty() ? nullptr : &recent_.front().blobs;
  std::vector<int> fresh;  // blobs without a match, in order
  if (prev && !prev->empty()) {
    struct Cand {
      double iou;
      int cur, old;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < int(blobs.size()); ++i)
      for (int j = 0; j < int(prev->size()); ++j) {
        double iou = rect_iou(blobs[i].bbox, (*prev)[j].bbox);
        if (iou >= 0.3) cands.push_back({iou, i, j});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.cur != b.cur) return a.cur < b.cur;
      return a.old < b.old;
    });
    std::vector<bool> cur_used(blobs.size(), false), old_used(prev->size(), false);
    for (const Cand& c : cands) {
      if (cur_used[c.cur] || old_used[c.old]) continue;
      cur_used[c.cur] = old_used[c.old] = true;
      blobs[c.cur].track_id = (*prev)[c.old].track_id;
    }
  }
}

ForegroundMask BackgroundModel::detect(const RgbdFrame& frame) {
  if (!initialized_) throw DataError("background model not initialized");
  kern::median_u16(frame.depth, cfg_.median_kernel, smoothed_, exec_);
  last_detect_index_ = frame.index;

  ForegroundMask fg;
  fg.frame_index = frame.index;
  kern::classify_foreground(smoothed_, history_view(), sigma_, cfg_.rho,
                            scratch_mask_, exec_);
  Mask eroded;
  kern::erode3(scratch_mask_, eroded, exec_);
  kern::dilate3(eroded, fg.bits, exec_);

  kern::label_blobs(fg.bits, smoothed_, labels_, fg.blobs);
  kern::filter_blobs_by_area(
      fg.bits, labels_, fg.blobs,
      cfg_.scaled_min_blob_area(frame.width(), frame.height()));

  assign_track_ids(fg.blobs);
  // Freshly appearing blobs get new ids after matches are settled.
  for (auto& b : fg.blobs)
    if (b.track_id < 0) b.track_id = next_track_id_++;

  recent_.push_front(fg);
  if (recent_.size() > 2) recent_.pop_back();
  return fg;
}

void BackgroundModel::update(const RgbdFrame& frame, const ForegroundMask& fg) {
  if (!initialized_) throw DataError("background model not initialized");
  if (frame.index != last_detect_index_)
    throw DataError("update_background must follow detect on the same frame");
  kern::update_background(smoothed_, fg.bits, float(cfg_.alpha), latest_, exec_);
  history_.push_back(latest_);
  history_.pop_front();
}

void BackgroundModel::end_frame() {
  smoothed_ = DepthPlane();
  scratch_mask_ = Mask();
  labels_ = Plane<i32>();
}

int BackgroundModel::retained_depth_planes() const {
  int n = int(history_.size());
  if (latest_.size() > 0) ++n;
  if (smoothed_.size() > 0) ++n;
  return n;
}

int BackgroundModel::retained_masks() const {
  int n = int(recent_.size());
  if (scratch_mask_.size() > 0) ++n;
  return n;
}

void BackgroundModel::merge_into_background(const Mask& fg_bits) {
  for (size_t i = 0; i < fg_bits.size(); ++i) {
    if (!fg_bits[i] || smoothed_[i] == kInvalidDepth) continue;
    float v = float(smoothed_[i]);
    latest_[i] = v;
    for (auto& h : history_) h[i] = v;
  }
  recent_.clear();
}

}  // namespace imon
