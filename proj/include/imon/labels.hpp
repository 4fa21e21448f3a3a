#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "imon/core.hpp"

namespace imon {

// Ground truth for one sequence, stored as labels.jsonl with one object per
// record. Frame ranges are half-open [start_frame, end_frame):
//   {"type":"person","start_frame":s,"end_frame":e,"bbox":[x,y,w,h]}
//   {"type":"motion","start_frame":s,"end_frame":e,"part":"body"}
//   {"type":"pet","frame":f,"bbox":[x,y,w,h]}
// Range endpoints double as the transition indices (appear/disappear,
// movement start/end).
struct PersonRange {
  int start_frame = 0;
  int end_frame = 0;
  Rect bbox;
};

struct MotionRange {
  int start_frame = 0;
  int end_frame = 0;
  std::string part = "body";
};

struct GroundTruth {
  std::vector<PersonRange> person;
  std::vector<MotionRange> motion;
  std::map<int, std::vector<Rect>> pet_boxes;

  bool person_at(int frame) const;
  // Range covering `frame`, or nullptr.
  const PersonRange* person_range_at(int frame) const;
  bool motion_at(int frame) const;
  const std::vector<Rect>* pets_at(int frame) const;
};

// Validates non-overlapping ranges per tag and non-negative indices.
GroundTruth load_labels(const std::filesystem::path& file);
void save_labels(const std::filesystem::path& file, const GroundTruth& gt);

}  // namespace imon
