#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imon/config.hpp"
#include "imon/core.hpp"
#include "imon/labels.hpp"
#include "imon/suppress.hpp"

namespace imon {

// One human/pet detector behind a request/poll pair. Synchronous backends
// (stub, file) deliver on the first poll after a request; the process backend
// delivers whenever the child has answered, possibly frames later. At most
// one request is outstanding at a time.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  // False when the backend cannot accept work (e.g. the process died).
  virtual bool request(int frame_index, const ColorFrame& rgb) = 0;
  // Non-blocking; a delivery carries the frame index it answers.
  virtual std::optional<std::pair<int, std::vector<Detection>>> poll() = 0;
  virtual bool busy() const = 0;
  virtual bool alive() const { return true; }
};

// Answers from ground-truth labels: the person range's bbox as a human
// detection (confidence 1.0) plus the labeled pet boxes of the frame.
class StubBackend : public DetectorBackend {
 public:
  explicit StubBackend(GroundTruth gt) : gt_(std::move(gt)) {}
  bool request(int frame_index, const ColorFrame& rgb) override;
  std::optional<std::pair<int, std::vector<Detection>>> poll() override;
  bool busy() const override { return pending_.has_value(); }

 private:
  GroundTruth gt_;
  std::optional<int> pending_;
};

// Answers from a precomputed detections.jsonl
// ({"frame": int, "class": "human"|"pet", "bbox": [x,y,w,h], "conf": float}).
class FileBackend : public DetectorBackend {
 public:
  explicit FileBackend(const std::filesystem::path& file);
  bool request(int frame_index, const ColorFrame& rgb) override;
  std::optional<std::pair<int, std::vector<Detection>>> poll() override;
  bool busy() const override { return pending_.has_value(); }

 private:
  std::map<int, std::vector<Detection>> by_frame_;
  std::optional<int> pending_;
};

// Wraps an external detector process. Requests go to the child's stdin as
// "DETECT <frame_index> <path_to_temp_ppm>\n"; the child answers with
// "HUMAN x y w h conf" / "PET x y w h conf" lines followed by "END".
// All child I/O is non-blocking; if the child dies, the pending request
// resolves to an empty delivery and alive() turns false. The constructor
// ignores SIGPIPE for the process (writes to a dead child must fail with
// EPIPE, not kill the pipeline).
class ProcessBackend : public DetectorBackend {
 public:
  ProcessBackend(const std::string& command, const std::filesystem::path& tmpdir);
  ~ProcessBackend() override;

  bool request(int frame_index, const ColorFrame& rgb) override;
  std::optional<std::pair<int, std::vector<Detection>>> poll() override;
  bool busy() const override { return outstanding_.has_value(); }
  bool alive() const override;

 private:
  std::filesystem::path tmpdir_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable bool dead_ = false;
  std::optional<int> outstanding_;
  std::string rxbuf_;
  std::vector<Detection> parsed_;
  std::filesystem::path current_ppm_;

  void reap() const;
  std::optional<std::pair<int, std::vector<Detection>>> resolve_dead();
};

void write_ppm(const std::filesystem::path& file, const ColorFrame& rgb);

// Cadence owner: one detector request per detector_period_s, every frame
// while a pet was detected within the last 60 s. Confidence < 0.5 detections
// are dropped at delivery. If the backend dies, remaining frames degrade to
// no detections and a warning is recorded.
class DetectorScheduler {
 public:
  DetectorScheduler(std::unique_ptr<DetectorBackend> backend,
                    const PipelineConfig& cfg);

  struct Delivery {
    int frame = -1;  // frame the answer was computed for
    std::vector<Detection> detections;
  };

  // Call once per frame, in order; merges any finished answer at this
  // boundary and possibly issues a new request.
  std::optional<Delivery> tick(int frame_index, i64 ts_ms, const ColorFrame& rgb);

  bool degraded() const { return degraded_; }
  int invocations() const { return invocations_; }
  bool pet_mode(i64 ts_ms) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::unique_ptr<DetectorBackend> backend_;
  double period_s_;
  int invocations_ = 0;
  i64 last_issue_ms_ = 0;
  bool issued_any_ = false;
  i64 last_pet_ms_ = 0;
  bool pet_seen_ = false;
  bool degraded_ = false;
  std::vector<std::string> warnings_;
};

std::map<int, std::vector<Detection>> load_detections(
    const std::filesystem::path& file);

}  // namespace imon
