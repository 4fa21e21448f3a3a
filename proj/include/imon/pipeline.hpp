#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "imon/background.hpp"
#include "imon/config.hpp"
#include "imon/core.hpp"
#include "imon/detector.hpp"
#include "imon/motion.hpp"
#include "imon/score.hpp"
#include "imon/sequence.hpp"
#include "imon/suppress.hpp"
#include "imon/tracker.hpp"

namespace imon {

struct RunOptions {
  PipelineConfig cfg;
  bool pet_exclusion = true;
  bool parallel = false;          // OpenMP kernels instead of the serial ones
  std::string pid_override;       // empty: use the manifest participant_id
};

struct StageTimingsMs {
  double detect = 0, update = 0, grow = 0, exclude = 0, motion = 0,
         detector = 0, tracker = 0;
};

struct AuditReport {
  int peak_depth_planes = 0, limit_depth_planes = 0;
  int peak_color_frames = 0, limit_color_frames = 2;
  int peak_masks = 0, limit_masks = 7;
  bool ok = true;
};

struct RunReport {
  int frames = 0;
  double wall_s = 0, fps = 0;
  StageTimingsMs stages;
  AuditReport audit;
  double sigma_mm = 0, m_mm = 0;
  bool detector_configured = false;
  int detector_invocations = 0;
  bool detector_degraded = false;
  int events = 0;
  std::vector<std::string> warnings;
};

std::string report_to_json(const RunReport& r);

// Frame-sequential orchestrator:
//   detect -> update -> grow -> pet exclusion -> vote -> motion -> tracker.
// The first n_history frames only feed model initialization and are reported
// as human=false. Per-frame states are emitted in frame order, lagging input
// by temporal_window/2 frames (the motion filter's center delay); finish()
// flushes the tail. Pixel state retained between frames stays within
// n+1 depth planes, one color frame and 7 masks; the audit in the report
// tracks the observed peaks.
//
// The detector backend is optional. Detections delivered at a frame boundary
// are applied to that frame: pet boxes are cut from the mask (and from the
// motion mask of the center frame they were reported for), the human/no-human
// sample feeds the vote, at most one sample per detector period. A NotHuman
// verdict merges the foreground into the background immediately.
class Pipeline {
 public:
  Pipeline(const SequenceManifest& manifest, RunOptions opt,
           std::unique_ptr<DetectorBackend> backend, EventLog* log = nullptr);

  std::vector<FrameState> process(const RgbdFrame& frame);
  std::vector<FrameState> finish();

  const std::vector<InactivityEvent>& events() const { return events_; }
  const BackgroundModel& model() const { return model_; }
  RunReport report() const { return report_; }

 private:
  struct Meta {
    int frame = -1;
    i64 ts_ms = 0;
    bool human = false;
    bool occluded = false;
    Verdict verdict = Verdict::Undecided;
    std::vector<Rect> pet_boxes;
  };

  FrameState emit_center(MotionMask mm);
  void sample_audit();

  RunOptions opt_;
  kern::Exec exec_;
  SequenceManifest manifest_;
  BackgroundModel model_;
  MotionParams mparams_;
  GrowthParams gparams_;
  MotionFilter filter_;
  InactivityTracker tracker_;
  std::unique_ptr<DetectorScheduler> scheduler_;
  EventLog* log_ = nullptr;

  std::vector<DepthPlane> init_buffer_;
  ColorFrame prev_color_;
  std::deque<Meta> meta_;
  VoteState vote_;
  i64 last_vote_ms_ = 0;

  std::vector<InactivityEvent> events_;
  RunReport report_;
  int next_index_ = 0;
  i64 last_ts_ = -1;
  bool finished_ = false;
};

struct RunOutput {
  std::vector<FrameState> states;
  std::vector<InactivityEvent> events;
  RunReport report;
};

// Drives a pipeline over a frame source; wall time covers reading, processing
// and the flush, so report.fps is end-to-end.
RunOutput run_pipeline(FrameSource& src, const RunOptions& opt,
                       std::unique_ptr<DetectorBackend> backend,
                       EventLog* log = nullptr);

}  // namespace imon
