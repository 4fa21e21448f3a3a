#include "imon/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "json.hpp"

namespace imon {

namespace {

using Clock = std::chrono::steady_clock;

struct StageTimer {
  double& sink;
  Clock::time_point t0 = Clock::now();
  explicit StageTimer(double& s) : sink(s) {}
  ~StageTimer() {
    sink += std::chrono::duration<double, std::milli>(Clock::now() - t0)
                .count();
  }
};

void mask_and(Mask& a, const Mask& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (!b[i]) a[i] = 0;
}

void clear_rects(Mask& m, const std::vector<Rect>& rects) {
  for (const Rect& r : rects) {
    const Rect c = r.clipped(m.width(), m.height());
    for (int y = c.y; y < c.bottom(); ++y) {
      u8* row = m.row(y);
      std::fill(row + c.x, row + c.right(), u8{0});
    }
  }
}

}  // namespace

std::string report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["frames"] = r.frames;
  j["wall_s"] = r.wall_s;
  j["fps"] = r.fps;
  j["stages_ms"]["detect"] = r.stages.detect;
  j["stages_ms"]["update"] = r.stages.update;
  j["stages_ms"]["grow"] = r.stages.grow;
  j["stages_ms"]["exclude"] = r.stages.exclude;
  j["stages_ms"]["motion"] = r.stages.motion;
  j["stages_ms"]["detector"] = r.stages.detector;
  j["stages_ms"]["tracker"] = r.stages.tracker;
  j["model"]["sigma_mm"] = r.sigma_mm;
  j["model"]["m_mm"] = r.m_mm;
  j["audit"]["peak_depth_planes"] = r.audit.peak_depth_planes;
  j["audit"]["limit_depth_planes"] = r.audit.limit_depth_planes;
  j["audit"]["peak_color_frames"] = r.audit.peak_color_frames;
  j["audit"]["limit_color_frames"] = r.audit.limit_color_frames;
  j["audit"]["peak_masks"] = r.audit.peak_masks;
  j["audit"]["limit_masks"] = r.audit.limit_masks;
  j["audit"]["ok"] = r.audit.ok;
  j["detector"]["configured"] = r.detector_configured;
  j["detector"]["invocations"] = r.detector_invocations;
  j["detector"]["degraded"] = r.detector_degraded;
  j["events"] = r.events;
  j["warnings"] = r.warnings;
  return j.dump(2);
}

Pipeline::Pipeline(const SequenceManifest& manifest, RunOptions opt,
                   std::unique_ptr<DetectorBackend> backend, EventLog* log)
    : opt_(std::move(opt)),
      exec_{opt_.parallel},
      manifest_(manifest),
      model_(opt_.cfg, exec_),
      mparams_{opt_.cfg.theta, opt_.cfg.median_kernel, 5,
               opt_.cfg.min_motion_pixels},
      gparams_{opt_.cfg.box_margin, opt_.cfg.band_k, opt_.cfg.sigma_f_floor_mm},
      filter_(mparams_, exec_),
      tracker_(opt_.pid_override.empty() ? manifest.participant_id
                                         : opt_.pid_override),
      log_(log) {
  opt_.cfg.validate();
  if (manifest_.width <= 0 || manifest_.height <= 0)
    throw DataError("pipeline: manifest has no frame size");
  if (backend)
    scheduler_ =
        std::make_unique<DetectorScheduler>(std::move(backend), opt_.cfg);
  report_.detector_configured = scheduler_ != nullptr;
  report_.audit.limit_depth_planes = opt_.cfg.n_history + 1;
  init_buffer_.reserve(static_cast<size_t>(opt_.cfg.n_history));
}

void Pipeline::sample_audit() {
  auto& a = report_.audit;
  const int depth =
      model_.retained_depth_planes() + static_cast<int>(init_buffer_.size());
  const int color = prev_color_.w > 0 ? 1 : 0;
  const int masks = model_.retained_masks() + filter_.window_size();
  a.peak_depth_planes = std::max(a.peak_depth_planes, depth);
  a.peak_color_frames = std::max(a.peak_color_frames, color);
  a.peak_masks = std::max(a.peak_masks, masks);
  a.ok = a.peak_depth_planes <= a.limit_depth_planes &&
         a.peak_color_frames <= a.limit_color_frames &&
         a.peak_masks <= a.limit_masks;
}

FrameState Pipeline::emit_center(MotionMask mm) {
  StageTimer timer(report_.stages.tracker);
  const Meta* meta = nullptr;
  for (const Meta& m : meta_)
    if (m.frame == mm.frame_index) {
      meta = &m;
      break;
    }
  if (!meta) throw DataError("pipeline: lost metadata for a center frame");

  if (!meta->pet_boxes.empty()) clear_rects(mm.bits, meta->pet_boxes);
  const u64 count = mask_count(mm.bits);
  const bool motion =
      meta->human && count >= static_cast<u64>(mparams_.min_motion_pixels);

  FrameObs obs;
  obs.frame_index = mm.frame_index;
  obs.ts_ms = meta->ts_ms;
  obs.human = meta->human;
  obs.motion = motion;
  obs.occluded = meta->occluded;
  obs.verdict = meta->verdict;
  if (auto ev = tracker_.step(obs)) {
    events_.push_back(*ev);
    if (log_) log_->append(*ev);
  }
  return FrameState{mm.frame_index, meta->ts_ms, meta->human, motion,
                    meta->occluded};
}

std::vector<FrameState> Pipeline::process(const RgbdFrame& frame) {
  if (finished_) throw DataError("pipeline: process after finish");
  if (frame.index != next_index_)
    throw DataError("pipeline: frame " + std::to_string(frame.index) +
                    " out of order (expected " + std::to_string(next_index_) +
                    ")");
  if (frame.width() != manifest_.width || frame.height() != manifest_.height)
    throw DataError("pipeline: frame size mismatch at frame " +
                    std::to_string(frame.index));
  if (frame.timestamp_ms <= last_ts_)
    throw DataError("pipeline: non-monotone timestamp at frame " +
                    std::to_string(frame.index));
  ++next_index_;
  last_ts_ = frame.timestamp_ms;
  ++report_.frames;

  std::vector<FrameState> states;

  std::optional<DetectorScheduler::Delivery> delivery;
  if (scheduler_) {
    StageTimer timer(report_.stages.detector);
    delivery =
        scheduler_->tick(frame.index, frame.timestamp_ms, frame.color);
  }

  if (!model_.initialized()) {
    init_buffer_.push_back(frame.depth);
    prev_color_ = frame.color;
    if (static_cast<int>(init_buffer_.size()) >= opt_.cfg.n_history) {
      std::vector<const DepthPlane*> ptrs;
      ptrs.reserve(init_buffer_.size());
      for (const auto& p : init_buffer_) ptrs.push_back(&p);
      model_.init(ptrs);
      init_buffer_.clear();
      init_buffer_.shrink_to_fit();
      report_.sigma_mm = model_.sigma();
      report_.m_mm = model_.mean_abs_diff();
    }
    FrameObs obs;
    obs.frame_index = frame.index;
    obs.ts_ms = frame.timestamp_ms;
    {
      StageTimer timer(report_.stages.tracker);
      if (auto ev = tracker_.step(obs)) {
        events_.push_back(*ev);
        if (log_) log_->append(*ev);
      }
    }
    states.push_back(
        FrameState{frame.index, frame.timestamp_ms, false, false, false});
    sample_audit();
    return states;
  }

  ForegroundMask fg;
  {
    StageTimer timer(report_.stages.detect);
    fg = model_.detect(frame);
  }
  {
    StageTimer timer(report_.stages.update);
    model_.update(frame, fg);
  }
  {
    StageTimer timer(report_.stages.grow);
    fg = grow_foreground(fg, model_.smoothed(), gparams_, model_.recent(),
                         exec_);
  }

  ExclusionResult ex;
  {
    StageTimer timer(report_.stages.exclude);
    if (opt_.pet_exclusion && delivery)
      ex = exclude_pets(fg, delivery->detections, model_.smoothed(), exec_);
    else
      ex.fg = std::move(fg);
  }

  Verdict verdict = Verdict::Undecided;
  if (ex.fg.blobs.empty()) {
    vote_.reset();
  } else if (delivery) {
    const bool human_det =
        std::any_of(delivery->detections.begin(), delivery->detections.end(),
                    [](const Detection& d) {
                      return d.klass == Detection::Class::Human;
                    });
    const i64 period_ms =
        static_cast<i64>(opt_.cfg.detector_period_s * 1000.0);
    if (vote_.window.empty() ||
        frame.timestamp_ms - last_vote_ms_ >= period_ms) {
      verdict = vote_step(vote_, human_det, frame.timestamp_ms,
                          opt_.cfg.vote_threshold, opt_.cfg.vote_window_s,
                          opt_.cfg.detector_period_s);
      last_vote_ms_ = frame.timestamp_ms;
    }
  }
  if (verdict == Verdict::NotHuman) {
    model_.merge_into_background(ex.fg.bits);
    ex.fg.bits.fill(0);
    ex.fg.blobs.clear();
    vote_.reset();
  }

  std::optional<MotionMask> center;
  {
    StageTimer timer(report_.stages.motion);
    Mask raw =
        raw_motion(frame.color, prev_color_, ex.fg.bits, mparams_, exec_);
    Mask spatial = filter_.spatial_filter(raw);
    mask_and(spatial, ex.fg.bits);
    center = filter_.push(spatial, frame.index);
  }
  prev_color_ = frame.color;

  Meta meta;
  meta.frame = frame.index;
  meta.ts_ms = frame.timestamp_ms;
  meta.human = !ex.fg.blobs.empty();
  meta.occluded = ex.fully_occluded;
  meta.verdict = verdict;
  meta.pet_boxes = ex.applied_boxes;
  meta_.push_back(std::move(meta));
  while (meta_.size() > static_cast<size_t>(mparams_.temporal_window))
    meta_.pop_front();

  if (center) states.push_back(emit_center(std::move(*center)));

  model_.end_frame();
  sample_audit();
  return states;
}

std::vector<FrameState> Pipeline::finish() {
  if (finished_) throw DataError("pipeline: finish called twice");
  finished_ = true;

  std::vector<FrameState> states;
  for (MotionMask& mm : filter_.flush())
    states.push_back(emit_center(std::move(mm)));
  {
    StageTimer timer(report_.stages.tracker);
    if (auto ev = tracker_.finish()) {
      events_.push_back(*ev);
      if (log_) log_->append(*ev);
    }
  }

  if (report_.frames > 0 && !model_.initialized())
    report_.warnings.push_back(
        "sequence shorter than n_history frames; model never initialized");
  if (scheduler_) {
    report_.detector_invocations = scheduler_->invocations();
    report_.detector_degraded = scheduler_->degraded();
    for (const auto& w : scheduler_->warnings())
      report_.warnings.push_back(w);
  }
  report_.events = static_cast<int>(events_.size());
  return states;
}

RunOutput run_pipeline(FrameSource& src, const RunOptions& opt,
                       std::unique_ptr<DetectorBackend> backend,
                       EventLog* log) {
  Pipeline pipe(src.manifest(), opt, std::move(backend), log);
  RunOutput out;
  const auto t0 = Clock::now();
  RgbdFrame frame;
  while (src.next(frame)) {
    auto states = pipe.process(frame);
    out.states.insert(out.states.end(), states.begin(), states.end());
  }
  auto tail = pipe.finish();
  out.states.insert(out.states.end(), tail.begin(), tail.end());
  const double wall =
      std::chrono::duration<double>(Clock::now() - t0).count();

  out.events = pipe.events();
  out.report = pipe.report();
  out.report.wall_s = wall;
  out.report.fps =
      wall > 0 ? static_cast<double>(out.report.frames) / wall : 0.0;
  return out;
}

}  // namespace imon
