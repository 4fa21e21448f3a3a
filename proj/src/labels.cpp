#include "imon/labels.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace imon {

using json = nlohmann::ordered_json;

bool GroundTruth::person_at(int frame) const {
  return person_range_at(frame) != nullptr;
}

const PersonRange* GroundTruth::person_range_at(int frame) const {
  for (const auto& r : person)
    if (frame >= r.start_frame && frame < r.end_frame) return &r;
  return nullptr;
}

bool GroundTruth::motion_at(int frame) const {
  for (const auto& r : motion)
    if (frame >= r.start_frame && frame < r.end_frame) return true;
  return false;
}

const std::vector<Rect>* GroundTruth::pets_at(int frame) const {
  auto it = pet_boxes.find(frame);
  return it == pet_boxes.end() ? nullptr : &it->second;
}

namespace {

Rect rect_from_json(const json& a) {
  if (!a.is_array() || a.size() != 4) throw DataError("bbox must be [x,y,w,h]");
  return {a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
}

json rect_to_json(const Rect& r) { return json::array({r.x, r.y, r.w, r.h}); }

template <typename R>
void check_ranges(std::vector<R>& ranges, const char* tag) {
  std::sort(ranges.begin(), ranges.end(),
            [](const R& a, const R& b) { return a.start_frame < b.start_frame; });
  int prev_end = -1;
  for (const auto& r : ranges) {
    if (r.start_frame < 0 || r.end_frame <= r.start_frame)
      throw DataError(std::string("invalid ") + tag + " range");
    if (r.start_frame < prev_end)
      throw DataError(std::string("overlapping ") + tag + " ranges");
    prev_end = r.end_frame;
  }
}

}  // namespace

GroundTruth load_labels(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open labels: " + file.string());
  GroundTruth gt;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("labels line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "person") {
      gt.person.push_back({j.at("start_frame").get<int>(),
                           j.at("end_frame").get<int>(),
                           rect_from_json(j.at("bbox"))});
    } else if (type == "motion") {
      MotionRange r;
      r.start_frame = j.at("start_frame").get<int>();
      r.end_frame = j.at("end_frame").get<int>();
      if (j.contains("part")) r.part = j["part"].get<std::string>();
      gt.motion.push_back(r);
    } else if (type == "pet") {
      gt.pet_boxes[j.at("frame").get<int>()].push_back(
          rect_from_json(j.at("bbox")));
    } else {
      throw DataError("labels line " + std::to_string(lineno) +
                      ": unknown type '" + type + "'");
    }
  }
  check_ranges(gt.person, "person");
  check_ranges(gt.motion, "motion");
  for (const auto& [frame, boxes] : gt.pet_boxes) {
    if (frame < 0) throw DataError("pet box with negative frame index");
    (void)boxes;
  }
  return gt;
}

void save_labels(const std::filesystem::path& file, const GroundTruth& gt) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write labels: " + file.string());
  for (const auto& r : gt.person) {
    json j{{"type", "person"},
           {"start_frame", r.start_frame},
           {"end_frame", r.end_frame},
           {"bbox", rect_to_json(r.bbox)}};
    out << j.dump() << "\n";
  }
  for (const auto& r : gt.motion) {
    json j{{"type", "motion"},
           {"start_frame", r.start_frame},
           {"end_frame", r.end_frame},
           {"part", r.part}};
    out << j.dump() << "\n";
  }
  for (const auto& [frame, boxes] : gt.pet_boxes)
    for (const Rect& b : boxes) {
      json j{{"type", "pet"}, {"frame", frame}, {"bbox", rect_to_json(b)}};
      out << j.dump() << "\n";
    }
  if (!out) throw DataError("labels write failed: " + file.string());
}

}  // namespace imon
