#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imon/core.hpp"
#include "imon/labels.hpp"
#include "imon/sequence.hpp"

namespace imon {

// Scripted RGB-D scene. Geometry is integer and static except for scripted
// motion, so identical scripts render bit-identical sequences.
//
// Person "motion" is a texture-phase flip inside the moving part's rectangle:
// vertical stripes of width step_px alternating between 0 and 2*luma flip
// parity on every frame of a move segment. Depth stays fixed, the color
// change is confined to the scripted part, and frame-to-frame color
// difference exists exactly on move frames.
// The pet is a striped rectangle shuttling horizontally between x_min and
// x_max during its move segments.

struct MotionSegment {
  double start_s = 0, end_s = 0;
  bool move = false;
};

struct ActorScript {
  Rect rect;  // on-screen extent (start position for the pet)
  int depth_mm = 1000;
  double appear_s = 0, leave_s = 0;
  std::vector<MotionSegment> segments;  // must tile [0, duration_s]
  // person only: which part of rect carries the moving texture
  std::string part = "body";  // body | head | wrist | finger | foot
  int step_px = 2;            // stripe width and per-frame shift
  // pet only
  int x_min = 0, x_max = 0;
};

struct FlickerEvent {
  int frame = 0;
  int frames = 1;            // 1 or 2
  std::string channels = "R";  // subset of "RGB"
  int magnitude = 0;           // added to each affected channel, clamped
};

struct BackgroundLayer {
  Rect rect;
  int depth_mm = 0;
};

struct SceneScript {
  u64 seed = 1;
  int width = 320, height = 240;
  double fps = 4.0;  // must be in [3,5]
  double duration_s = 10.0;
  std::string participant_id = "synthetic";
  int background_depth_mm = 3000;
  int luma = 97;  // Rec. 601 Y' target, uniform gray base
  std::vector<BackgroundLayer> layers;
  std::optional<ActorScript> person;
  std::optional<ActorScript> pet;
  std::vector<FlickerEvent> tv;
  double depth_noise_pct = 1.0;  // sigma as % of pixel depth
  double color_noise_sigma = 0.0;

  int frame_count() const;
  i64 timestamp_ms(int frame) const;
  void validate() const;  // throws DataError

  static SceneScript from_json(const std::string& text);
  std::string to_json() const;
};

SceneScript load_script(const std::filesystem::path& file);

// Pixel extent of a named moving part, placed inside the person rect.
Rect part_rect(const Rect& person, const std::string& part);

// Mean Rec. 601 luma of a frame.
double mean_luma(const ColorFrame& c);

class SceneGenerator : public FrameSource {
 public:
  explicit SceneGenerator(SceneScript script);

  const SequenceManifest& manifest() const override { return manifest_; }
  bool next(RgbdFrame& frame) override;

  RgbdFrame render(int frame) const;
  const GroundTruth& labels() const { return labels_; }
  const SceneScript& script() const { return script_; }

  // True when the scripted clock puts the actor in a move segment at frame t.
  bool person_moving(int t) const;
  bool pet_moving(int t) const;

 private:
  void build_labels();

  SceneScript script_;
  SequenceManifest manifest_;
  GroundTruth labels_;
  std::vector<u8> person_phase_;  // stripe parity per frame
  std::vector<int> pet_x_;        // pet left edge per frame
  int next_frame_ = 0;
};

// Renders the whole scene into dir/ (frames + manifest) plus labels.jsonl.
void generate_to_dir(const SceneScript& script,
                     const std::filesystem::path& dir);

}  // namespace imon
