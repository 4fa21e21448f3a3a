#include "imon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "imon/kernels.hpp"
#include "json.hpp"

namespace imon {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kEps = 1e-6;

u64 splitmix64(u64 x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Approximate standard normal: Irwin-Hall over the 8 bytes of a mixed hash.
// Mean 1020, stddev sqrt(8 * (256^2 - 1) / 12) = 209.0215.
double gauss(u64 seed, int frame, size_t px, u64 salt) {
  u64 h = splitmix64(seed ^ splitmix64(static_cast<u64>(frame) + 1) ^
                     splitmix64(static_cast<u64>(px) * 2 + salt * 131));
  int sum = 0;
  for (int i = 0; i < 8; ++i) sum += static_cast<int>((h >> (8 * i)) & 0xFF);
  return (static_cast<double>(sum) - 1020.0) / 209.0215;
}

u8 clamp_u8(double v) {
  return static_cast<u8>(std::clamp(std::lround(v), 0L, 255L));
}

int first_frame_at(double t_s, double fps) {
  return static_cast<int>(std::ceil(t_s * fps - kEps));
}

Rect rect_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4)
    throw DataError("rect must be [x,y,w,h]");
  return Rect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(),
              j[3].get<int>()};
}

nlohmann::json rect_to_json(const Rect& r) {
  return nlohmann::json::array({r.x, r.y, r.w, r.h});
}

std::vector<MotionSegment> segments_from_json(const nlohmann::json& j) {
  std::vector<MotionSegment> segs;
  for (const auto& s : j) {
    MotionSegment seg;
    seg.start_s = s.at("start_s").get<double>();
    seg.end_s = s.at("end_s").get<double>();
    const auto mode = s.at("mode").get<std::string>();
    if (mode != "move" && mode != "still")
      throw DataError("segment mode must be move or still: " + mode);
    seg.move = mode == "move";
    segs.push_back(seg);
  }
  return segs;
}

nlohmann::json segments_to_json(const std::vector<MotionSegment>& segs) {
  auto arr = nlohmann::json::array();
  for (const auto& s : segs) {
    nlohmann::json j;
    j["start_s"] = s.start_s;
    j["end_s"] = s.end_s;
    j["mode"] = s.move ? "move" : "still";
    arr.push_back(j);
  }
  return arr;
}

void check_segments(const std::vector<MotionSegment>& segs, double duration,
                    const char* who) {
  const std::string w(who);
  if (segs.empty()) throw DataError(w + ": segments missing");
  if (std::abs(segs.front().start_s) > kEps)
    throw DataError(w + ": segments must start at 0");
  for (size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].end_s <= segs[i].start_s + kEps)
      throw DataError(w + ": empty segment");
    if (i > 0 && std::abs(segs[i].start_s - segs[i - 1].end_s) > kEps)
      throw DataError(w + ": segments must tile the duration without gaps");
  }
  if (std::abs(segs.back().end_s - duration) > kEps)
    throw DataError(w + ": segments must end at duration_s");
}

bool in_move_segment(const std::vector<MotionSegment>& segs, double t_s) {
  for (const auto& s : segs)
    if (s.move && t_s >= s.start_s - kEps && t_s < s.end_s - kEps) return true;
  return false;
}

bool actor_visible(const ActorScript& a, int frame, double fps) {
  return frame >= first_frame_at(a.appear_s, fps) &&
         frame < first_frame_at(a.leave_s, fps);
}

}  // namespace

int SceneScript::frame_count() const {
  return static_cast<int>(std::lround(duration_s * fps));
}

i64 SceneScript::timestamp_ms(int frame) const {
  return std::llround(static_cast<double>(frame) * 1000.0 / fps);
}

Rect part_rect(const Rect& person, const std::string& part) {
  auto place = [&](int w, int h, double fx, double fy) {
    const int x =
        person.x + static_cast<int>(std::lround(fx * (person.w - w)));
    const int y =
        person.y + static_cast<int>(std::lround(fy * (person.h - h)));
    return Rect{x, y, w, h}.clipped(person.w + person.x, person.h + person.y);
  };
  if (part == "body") return person;
  if (part == "head") return place(30, 30, 0.5, 0.0);
  if (part == "wrist") return place(12, 12, 0.9, 0.45);
  if (part == "finger") return place(4, 6, 0.6, 0.5);
  if (part == "foot") return place(20, 12, 0.1, 1.0);
  throw DataError("unknown body part: " + part);
}

void SceneScript::validate() const {
  if (width < 16 || width > 4096 || height < 16 || height > 4096)
    throw DataError("scene size out of range");
  if (fps < 3.0 || fps > 5.0)
    throw DataError("fps must be in [3,5]: " + std::to_string(fps));
  if (duration_s <= 0 || duration_s > 24 * 3600.0)
    throw DataError("duration_s out of range");
  if (luma < 0 || luma > 255) throw DataError("luma out of range");
  if (background_depth_mm < 0 || background_depth_mm > 65535)
    throw DataError("background depth out of range");
  if (participant_id.empty() ||
      participant_id.find_first_of(" \t\n") != std::string::npos)
    throw DataError("participant_id must be non-empty without spaces");
  if (depth_noise_pct < 0 || depth_noise_pct > 20)
    throw DataError("depth_noise_pct out of range");
  if (color_noise_sigma < 0 || color_noise_sigma > 50)
    throw DataError("color_noise_sigma out of range");

  auto check_rect = [&](const Rect& r, const char* who) {
    if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.right() > width ||
        r.bottom() > height)
      throw DataError(std::string(who) + ": rect outside frame");
  };
  for (const auto& l : layers) {
    check_rect(l.rect, "layer");
    if (l.depth_mm < 0 || l.depth_mm > 65535)
      throw DataError("layer depth out of range");
  }

  auto check_actor = [&](const ActorScript& a, const char* who) {
    check_rect(a.rect, who);
    if (a.depth_mm < 1 || a.depth_mm > 65535)
      throw DataError(std::string(who) + ": depth out of range");
    if (a.appear_s < 0 || a.leave_s > duration_s + kEps ||
        a.appear_s >= a.leave_s)
      throw DataError(std::string(who) +
                      ": appear/leave must satisfy 0 <= appear < leave <= "
                      "duration");
    if (a.step_px < 1 || a.step_px > 32)
      throw DataError(std::string(who) + ": step_px out of range");
    check_segments(a.segments, duration_s, who);
  };
  if (person) {
    check_actor(*person, "person");
    if (part_rect(person->rect, person->part).empty())
      throw DataError("person rect too small for part " + person->part);
  }
  if (pet) {
    check_actor(*pet, "pet");
    if (pet->x_min < 0 || pet->x_max + pet->rect.w > width ||
        pet->x_min > pet->rect.x || pet->rect.x > pet->x_max)
      throw DataError("pet path must satisfy 0 <= x_min <= x <= x_max");
    if (pet->x_max > pet->x_min &&
        pet->x_max - pet->x_min < pet->step_px)
      throw DataError("pet path shorter than step_px");
  }

  for (const auto& f : tv) {
    if (f.frame < 0 || f.frame >= frame_count())
      throw DataError("tv event frame out of range");
    if (f.frames < 1 || f.frames > 2)
      throw DataError("tv event must last 1 or 2 frames");
    if (f.magnitude < 1 || f.magnitude > 255)
      throw DataError("tv magnitude out of range");
    if (f.channels.empty() || f.channels.size() > 3)
      throw DataError("tv channels must name 1 to 3 of RGB");
    for (char c : f.channels)
      if (c != 'R' && c != 'G' && c != 'B')
        throw DataError("tv channels must be a subset of RGB");
  }
  if (frame_count() < 1) throw DataError("scene renders no frames");
}

SceneScript SceneScript::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scene script: ") + e.what());
  }
  SceneScript s;
  try {
    s.seed = j.value("seed", u64{1});
    s.width = j.value("width", 320);
    s.height = j.value("height", 240);
    s.fps = j.value("fps", 4.0);
    s.duration_s = j.at("duration_s").get<double>();
    s.participant_id = j.value("participant_id", std::string("synthetic"));
    if (j.contains("background")) {
      const auto& b = j["background"];
      s.background_depth_mm = b.value("depth_mm", 3000);
      s.luma = b.value("luma", 97);
      for (const auto& l : b.value("layers", nlohmann::json::array()))
        s.layers.push_back(
            {rect_from_json(l.at("rect")), l.at("depth_mm").get<int>()});
    }
    auto read_actor = [](const nlohmann::json& a) {
      ActorScript act;
      act.rect = rect_from_json(a.at("rect"));
      act.depth_mm = a.at("depth_mm").get<int>();
      act.appear_s = a.at("appear_s").get<double>();
      act.leave_s = a.at("leave_s").get<double>();
      act.segments = segments_from_json(a.at("segments"));
      act.part = a.value("part", std::string("body"));
      act.step_px = a.value("step_px", 2);
      act.x_min = a.value("x_min", act.rect.x);
      act.x_max = a.value("x_max", act.rect.x);
      return act;
    };
    if (j.contains("person")) s.person = read_actor(j["person"]);
    if (j.contains("pet")) s.pet = read_actor(j["pet"]);
    for (const auto& f : j.value("tv", nlohmann::json::array())) {
      FlickerEvent ev;
      ev.frame = f.at("frame").get<int>();
      ev.frames = f.value("frames", 1);
      ev.channels = f.at("channels").get<std::string>();
      ev.magnitude = f.at("magnitude").get<int>();
      s.tv.push_back(ev);
    }
    if (j.contains("noise")) {
      s.depth_noise_pct = j["noise"].value("depth_pct", 1.0);
      s.color_noise_sigma = j["noise"].value("color_sigma", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scene script: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SceneScript::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["width"] = width;
  j["height"] = height;
  j["fps"] = fps;
  j["duration_s"] = duration_s;
  j["participant_id"] = participant_id;
  j["background"]["depth_mm"] = background_depth_mm;
  j["background"]["luma"] = luma;
  if (!layers.empty()) {
    auto arr = ordered_json::array();
    for (const auto& l : layers) {
      ordered_json lj;
      lj["rect"] = rect_to_json(l.rect);
      lj["depth_mm"] = l.depth_mm;
      arr.push_back(lj);
    }
    j["background"]["layers"] = arr;
  }
  auto write_actor = [](const ActorScript& a, bool is_pet) {
    ordered_json aj;
    aj["rect"] = rect_to_json(a.rect);
    aj["depth_mm"] = a.depth_mm;
    aj["appear_s"] = a.appear_s;
    aj["leave_s"] = a.leave_s;
    if (!is_pet) aj["part"] = a.part;
    aj["step_px"] = a.step_px;
    if (is_pet) {
      aj["x_min"] = a.x_min;
      aj["x_max"] = a.x_max;
    }
    aj["segments"] = segments_to_json(a.segments);
    return aj;
  };
  if (person) j["person"] = write_actor(*person, false);
  if (pet) j["pet"] = write_actor(*pet, true);
  if (!tv.empty()) {
    auto arr = ordered_json::array();
    for (const auto& f : tv) {
      ordered_json fj;
      fj["frame"] = f.frame;
      fj["frames"] = f.frames;
      fj["channels"] = f.channels;
      fj["magnitude"] = f.magnitude;
      arr.push_back(fj);
    }
    j["tv"] = arr;
  }
  j["noise"]["depth_pct"] = depth_noise_pct;
  j["noise"]["color_sigma"] = color_noise_sigma;
  return j.dump(2);
}

SceneScript load_script(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return SceneScript::from_json(text);
}

double mean_luma(const ColorFrame& c) {
  return static_cast<double>(kern::luma_numerator(c, kern::Exec{false})) /
         (1000.0 * static_cast<double>(c.w) * static_cast<double>(c.h));
}

SceneGenerator::SceneGenerator(SceneScript script)
    : script_(std::move(script)) {
  script_.validate();
  const int n = script_.frame_count();
  manifest_.width = script_.width;
  manifest_.height = script_.height;
  manifest_.frame_count = n;
  manifest_.nominal_fps = script_.fps;
  manifest_.participant_id = script_.participant_id;
  manifest_.timestamps_ms.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    manifest_.timestamps_ms[static_cast<size_t>(i)] = script_.timestamp_ms(i);

  person_phase_.assign(static_cast<size_t>(n), 0);
  u8 phase = 0;
  for (int t = 0; t < n; ++t) {
    if (person_moving(t)) phase ^= 1;
    person_phase_[static_cast<size_t>(t)] = phase;
  }

  if (script_.pet) {
    pet_x_.assign(static_cast<size_t>(n), script_.pet->rect.x);
    int x = script_.pet->rect.x, dir = 1;
    const auto& p = *script_.pet;
    for (int t = 0; t < n; ++t) {
      if (pet_moving(t) && p.x_max > p.x_min) {
        if (dir > 0 && x + p.step_px > p.x_max) dir = -1;
        if (dir < 0 && x - p.step_px < p.x_min) dir = 1;
        x += dir * p.step_px;
      }
      pet_x_[static_cast<size_t>(t)] = x;
    }
  }
  build_labels();
}

bool SceneGenerator::person_moving(int t) const {
  if (!script_.person) return false;
  return actor_visible(*script_.person, t, script_.fps) &&
         in_move_segment(script_.person->segments,
                         static_cast<double>(t) / script_.fps);
}

bool SceneGenerator::pet_moving(int t) const {
  if (!script_.pet) return false;
  return actor_visible(*script_.pet, t, script_.fps) &&
         in_move_segment(script_.pet->segments,
                         static_cast<double>(t) / script_.fps);
}

void SceneGenerator::build_labels() {
  const int n = script_.frame_count();
  if (script_.person) {
    const auto& p = *script_.person;
    const int a = std::clamp(first_frame_at(p.appear_s, script_.fps), 0, n);
    const int l = std::clamp(first_frame_at(p.leave_s, script_.fps), 0, n);
    if (l > a) labels_.person.push_back({a, l, p.rect});
    int run = -1;
    for (int t = 0; t <= n; ++t) {
      const bool mv = t < n && person_moving(t);
      if (mv && run < 0) run = t;
      if (!mv && run >= 0) {
        labels_.motion.push_back({run, t, p.part});
        run = -1;
      }
    }
  }
  if (script_.pet) {
    const auto& p = *script_.pet;
    for (int t = 0; t < n; ++t)
      if (actor_visible(p, t, script_.fps))
        labels_.pet_boxes[t].push_back(
            Rect{pet_x_[static_cast<size_t>(t)], p.rect.y, p.rect.w, p.rect.h});
  }
}

RgbdFrame SceneGenerator::render(int frame) const {
  const int n = script_.frame_count();
  if (frame < 0 || frame >= n)
    throw DataError("render: frame out of range: " + std::to_string(frame));
  const int w = script_.width, h = script_.height;

  RgbdFrame f;
  f.index = frame;
  f.timestamp_ms = script_.timestamp_ms(frame);
  const u8 base = static_cast<u8>(script_.luma);
  f.color = ColorFrame(w, h, base);
  f.depth.resize(w, h);
  f.depth.fill(static_cast<u16>(script_.background_depth_mm));
  for (const auto& l : script_.layers)
    for (int y = l.rect.y; y < l.rect.bottom(); ++y) {
      u16* row = f.depth.row(y);
      std::fill(row + l.rect.x, row + l.rect.right(),
                static_cast<u16>(l.depth_mm));
    }

  const u8 hi = static_cast<u8>(std::min(255, 2 * script_.luma));
  struct Draw {
    const ActorScript* a;
    Rect r;
    bool is_person;
  };
  std::vector<Draw> draws;
  if (script_.pet && actor_visible(*script_.pet, frame, script_.fps)) {
    Rect r{pet_x_[static_cast<size_t>(frame)], script_.pet->rect.y,
           script_.pet->rect.w, script_.pet->rect.h};
    draws.push_back({&*script_.pet, r, false});
  }
  if (script_.person && actor_visible(*script_.person, frame, script_.fps))
    draws.push_back({&*script_.person, script_.person->rect, true});
  std::stable_sort(draws.begin(), draws.end(),
                   [](const Draw& a, const Draw& b) {
                     return a.a->depth_mm > b.a->depth_mm;  // farther first
                   });

  for (const auto& d : draws) {
    for (int y = d.r.y; y < d.r.bottom(); ++y) {
      u16* row = f.depth.row(y);
      std::fill(row + d.r.x, row + d.r.right(),
                static_cast<u16>(d.a->depth_mm));
    }
    if (d.is_person) {
      // flat base color, striped moving part
      for (int c = 0; c < 3; ++c)
        for (int y = d.r.y; y < d.r.bottom(); ++y) {
          u8* row = f.color.plane(c) + static_cast<size_t>(y) * w;
          std::fill(row + d.r.x, row + d.r.right(), base);
        }
      const Rect pr = part_rect(d.r, d.a->part);
      const int phase = person_phase_[static_cast<size_t>(frame)];
      for (int y = pr.y; y < pr.bottom(); ++y)
        for (int x = pr.x; x < pr.right(); ++x) {
          const u8 v =
              (((x - pr.x) / d.a->step_px + phase) & 1) != 0 ? hi : u8{0};
          for (int c = 0; c < 3; ++c) f.color.at(c, x, y) = v;
        }
    } else {
      for (int y = d.r.y; y < d.r.bottom(); ++y)
        for (int x = d.r.x; x < d.r.right(); ++x) {
          const u8 v = (((x - d.r.x) / d.a->step_px) & 1) != 0 ? hi : u8{0};
          for (int c = 0; c < 3; ++c) f.color.at(c, x, y) = v;
        }
    }
  }

  const size_t count = static_cast<size_t>(w) * static_cast<size_t>(h);
  for (const auto& ev : script_.tv) {
    if (frame < ev.frame || frame >= ev.frame + ev.frames) continue;
    for (char ch : ev.channels) {
      const int c = ch == 'R' ? 0 : ch == 'G' ? 1 : 2;
      u8* p = f.color.plane(c);
      for (size_t i = 0; i < count; ++i)
        p[i] = static_cast<u8>(std::min(255, p[i] + ev.magnitude));
    }
  }

  if (script_.color_noise_sigma > 0) {
    const double s = script_.color_noise_sigma;
    for (int c = 0; c < 3; ++c) {
      u8* p = f.color.plane(c);
      for (size_t i = 0; i < count; ++i)
        p[i] = clamp_u8(p[i] + s * gauss(script_.seed, frame, i,
                                         static_cast<u64>(c)));
    }
  }
  if (script_.depth_noise_pct > 0) {
    const double pct = script_.depth_noise_pct / 100.0;
    u16* p = f.depth.data();
    for (size_t i = 0; i < count; ++i) {
      if (p[i] == kInvalidDepth) continue;
      const double sigma = pct * static_cast<double>(p[i]);
      const long v =
          std::lround(p[i] + sigma * gauss(script_.seed, frame, i, 3));
      p[i] = static_cast<u16>(std::clamp(v, 1L, 65535L));
    }
  }
  return f;
}

bool SceneGenerator::next(RgbdFrame& frame) {
  if (next_frame_ >= script_.frame_count()) return false;
  frame = render(next_frame_++);
  return true;
}

void generate_to_dir(const SceneScript& script,
                     const std::filesystem::path& dir) {
  SceneGenerator gen(script);
  std::filesystem::create_directories(dir);
  SequenceWriter writer(dir, gen.manifest());
  RgbdFrame frame;
  while (gen.next(frame)) writer.write(frame);
  save_labels(dir / "labels.jsonl", gen.labels());
}

}  // namespace imon
