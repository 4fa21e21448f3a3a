#include <unistd.h>

#include <memory>

#include "doctest.h"
#include "imon/detector.hpp"
#include "test_support.hpp"

using namespace imon;
using namespace imon::test;

namespace {

std::optional<std::pair<int, std::vector<Detection>>> poll_until(
    DetectorBackend& b, int timeout_ms = 5000) {
  for (int waited = 0; waited < timeout_ms; waited += 5) {
    if (auto d = b.poll()) return d;
    usleep(5000);
  }
  return std::nullopt;
}

GroundTruth person_gt() {
  GroundTruth gt;
  gt.person.push_back({10, 50, {1, 2, 3, 4}});
  return gt;
}

}  // namespace

TEST_CASE("stub backend answers from ground truth labels") {
  GroundTruth gt = person_gt();
  gt.pet_boxes[10] = {{7, 8, 2, 2}};
  StubBackend b(gt);
  ColorFrame rgb(8, 8, 0);

  CHECK(!b.busy());
  CHECK(b.request(5, rgb));
  CHECK(b.busy());
  auto d = b.poll();
  REQUIRE(d.has_value());
  CHECK(d->first == 5);
  CHECK(d->second.empty());  // nobody in frame 5
  CHECK(!b.busy());
  CHECK(!b.poll().has_value());

  CHECK(b.request(10, rgb));
  d = b.poll();
  REQUIRE(d.has_value());
  REQUIRE(d->second.size() == 2);
  CHECK(d->second[0].klass == Detection::Class::Human);
  CHECK(d->second[0].bbox == Rect{1, 2, 3, 4});
  CHECK(d->second[0].confidence == 1.0);
  CHECK(d->second[1].klass == Detection::Class::Pet);
  CHECK(d->second[1].bbox == Rect{7, 8, 2, 2});
}

TEST_CASE("file backend serves detections verbatim by frame") {
  TempDir dir;
  auto path = dir.path() / "detections.jsonl";
  write_file(path,
             R"({"frame":3,"class":"human","bbox":[1,2,3,4],"conf":0.9})"
             "\n"
             R"({"frame":3,"class":"pet","bbox":[5,6,2,2],"conf":0.8})"
             "\n\n"
             R"({"frame":9,"class":"human","bbox":[0,0,4,4],"conf":0.4})"
             "\n");
  FileBackend b(path);
  ColorFrame rgb(8, 8, 0);

  b.request(3, rgb);
  auto d = b.poll();
  REQUIRE(d.has_value());
  REQUIRE(d->second.size() == 2);
  CHECK(d->second[0].klass == Detection::Class::Human);
  CHECK(d->second[1].bbox == Rect{5, 6, 2, 2});

  b.request(4, rgb);
  d = b.poll();
  REQUIRE(d.has_value());
  CHECK(d->second.empty());

  b.request(9, rgb);
  d = b.poll();
  REQUIRE(d.has_value());
  REQUIRE(d->second.size() == 1);
  CHECK(d->second[0].confidence == doctest::Approx(0.4));  // filtering is the scheduler's job
}

TEST_CASE("malformed detection files are rejected with their line number") {
  TempDir dir;
  auto ok = [&](const std::string& body) {
    auto p = dir.path() / "d.jsonl";
    write_file(p, body);
    return p;
  };
  CHECK_THROWS_AS(load_detections(dir.path() / "absent.jsonl"), DataError);
  try {
    load_detections(ok(R"({"frame":0,"class":"human","bbox":[1,2,3,4]})" "\n"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).rfind("detections line 1", 0) == 0);
  }
  CHECK_THROWS_AS(
      load_detections(ok(
          R"({"frame":0,"class":"human","bbox":[1,2,3,4],"conf":1.0})" "\n"
          R"({"frame":1,"class":"human","bbox":[1,2,3],"conf":1.0})" "\n")),
      DataError);
}

TEST_CASE("rejected detection classes do not round to human or pet") {
  TempDir dir;
  auto p = dir.path() / "d.jsonl";
  write_file(p, R"({"frame":0,"class":"robot","bbox":[1,2,3,4],"conf":1.0})" "\n");
  CHECK_THROWS_AS(load_detections(p), DataError);
}

TEST_CASE("ppm files are binary P6 with interleaved channels") {
  TempDir dir;
  ColorFrame rgb(2, 2);
  const u8 r[] = {10, 20, 30, 40}, g[] = {50, 60, 70, 80}, b[] = {90, 100, 110, 120};
  for (int i = 0; i < 4; ++i) {
    rgb.plane(0)[i] = r[i];
    rgb.plane(1)[i] = g[i];
    rgb.plane(2)[i] = b[i];
  }
  auto path = dir.path() / "f.ppm";
  write_ppm(path, rgb);
  const std::string expect = std::string("P6\n2 2\n255\n") +
                             std::string({char(10), char(50), char(90),
                                          char(20), char(60), char(100),
                                          char(30), char(70), char(110),
                                          char(40), char(80), char(120)});
  CHECK(read_file(path) == expect);
}

TEST_CASE("process backend round-trips requests through a child process") {
  TempDir dir;
  ProcessBackend b(std::string(FAKE_DETECTOR_BIN) + " human", dir.path());
  ColorFrame rgb(16, 12, 100);

  REQUIRE(b.request(7, rgb));
  CHECK(b.busy());
  auto d = poll_until(b);
  REQUIRE(d.has_value());
  CHECK(d->first == 7);
  REQUIRE(d->second.size() == 1);
  CHECK(d->second[0].klass == Detection::Class::Human);
  CHECK(d->second[0].bbox == Rect{10, 10, 20, 40});
  CHECK(d->second[0].confidence == doctest::Approx(0.9));
  CHECK(d->second[0].frame == 7);
  CHECK(!b.busy());
  CHECK(b.alive());
  CHECK(!std::filesystem::exists(dir.path() / "frame_7.ppm"));  // cleaned up

  REQUIRE(b.request(8, rgb));  // the backend is reusable
  d = poll_until(b);
  REQUIRE(d.has_value());
  CHECK(d->first == 8);
}

TEST_CASE("process backend ignores stray stdout chatter") {
  TempDir dir;
  ProcessBackend b(std::string(FAKE_DETECTOR_BIN) + " garbage", dir.path());
  ColorFrame rgb(8, 8, 0);
  REQUIRE(b.request(0, rgb));
  auto d = poll_until(b);
  REQUIRE(d.has_value());
  REQUIRE(d->second.size() == 1);
  CHECK(d->second[0].klass == Detection::Class::Human);
}

TEST_CASE("the child process receives a readable image") {
  TempDir dir;
  ProcessBackend b(std::string(FAKE_DETECTOR_BIN) + " check-ppm", dir.path());
  ColorFrame rgb(24, 16, 50);
  REQUIRE(b.request(1, rgb));
  auto d = poll_until(b);
  REQUIRE(d.has_value());
  REQUIRE(d->second.size() == 1);
  CHECK(d->second[0].bbox == Rect{0, 0, 24, 16});
}

TEST_CASE("a busy process backend declines a second request") {
  TempDir dir;
  ProcessBackend b(std::string(FAKE_DETECTOR_BIN) + " slow", dir.path());
  ColorFrame rgb(8, 8, 0);
  REQUIRE(b.request(0, rgb));
  CHECK(!b.request(1, rgb));  // one outstanding request at a time
  auto d = poll_until(b);
  REQUIRE(d.has_value());
  CHECK(d->first == 0);
  CHECK(b.request(1, rgb));
  d = poll_until(b);
  REQUIRE(d.has_value());
  CHECK(d->first == 1);
}

TEST_CASE("a dying child resolves pending work empty and turns dead") {
  TempDir dir;
  ProcessBackend b(std::string(FAKE_DETECTOR_BIN) + " die-after 1", dir.path());
  ColorFrame rgb(8, 8, 0);
  REQUIRE(b.request(0, rgb));
  auto d = poll_until(b);
  REQUIRE(d.has_value());
  CHECK(d->second.size() == 1);

  // The child exits after its first answer. Depending on timing the next
  // request fails outright or resolves to an empty delivery.
  if (b.request(2, rgb)) {
    d = poll_until(b);
    REQUIRE(d.has_value());
    CHECK(d->first == 2);
    CHECK(d->second.empty());
  }
  CHECK(!b.alive());
  CHECK(!b.request(3, rgb));
}

TEST_CASE("scheduler issues one request per period") {
  auto stub = std::make_unique<StubBackend>(person_gt());
  PipelineConfig cfg;  // 10 s period
  DetectorScheduler sched(std::move(stub), cfg);
  ColorFrame rgb(8, 8, 0);

  std::vector<int> delivered_frames;
  for (int i = 0; i < 300; ++i) {  // 30 s at 10 fps
    if (auto d = sched.tick(i, i64(i) * 100, rgb))
      delivered_frames.push_back(d->frame);
  }
  CHECK(sched.invocations() == 3);
  CHECK(delivered_frames == std::vector<int>{0, 100, 200});
  CHECK(!sched.degraded());
  CHECK(sched.warnings().empty());
}

TEST_CASE("a pet sighting switches the scheduler to per-frame requests") {
  GroundTruth gt = person_gt();
  for (int f = 100; f < 200; ++f) gt.pet_boxes[f] = {{30, 40, 8, 6}};
  auto stub = std::make_unique<StubBackend>(gt);
  PipelineConfig cfg;
  DetectorScheduler sched(std::move(stub), cfg);
  ColorFrame rgb(8, 8, 0);

  for (int i = 0; i <= 250; ++i) sched.tick(i, i64(i) * 100, rgb);
  // Frame 0, frame 100 (first pet delivery), then every frame after.
  CHECK(sched.invocations() == 152);
  CHECK(sched.pet_mode(25000));
  CHECK(!sched.pet_mode(19900 + 60000));
}

TEST_CASE("the scheduler drops low-confidence detections") {
  TempDir dir;
  auto path = dir.path() / "d.jsonl";
  write_file(path,
             R"({"frame":0,"class":"human","bbox":[1,2,3,4],"conf":0.4})" "\n"
             R"({"frame":0,"class":"human","bbox":[2,3,4,5],"conf":0.6})" "\n"
             R"({"frame":0,"class":"pet","bbox":[9,9,2,2],"conf":0.3})" "\n");
  DetectorScheduler sched(std::make_unique<FileBackend>(path), PipelineConfig{});
  ColorFrame rgb(8, 8, 0);
  auto d = sched.tick(0, 0, rgb);
  REQUIRE(d.has_value());
  REQUIRE(d->detections.size() == 1);
  CHECK(d->detections[0].bbox == Rect{2, 3, 4, 5});
  // The 0.3-confidence pet never counts as a sighting.
  CHECK(!sched.pet_mode(1));
}

TEST_CASE("a dead backend degrades the scheduler with one warning") {
  TempDir dir;
  auto backend = std::make_unique<ProcessBackend>("exit 0", dir.path());
  PipelineConfig cfg;
  cfg.detector_period_s = 0.01;  // make every tick due
  DetectorScheduler sched(std::move(backend), cfg);
  ColorFrame rgb(8, 8, 0);

  for (int i = 0; i < 25 && !sched.degraded(); ++i) {
    sched.tick(i, i64(i) * 100, rgb);
    usleep(20000);
  }
  CHECK(sched.degraded());
  REQUIRE(sched.warnings().size() == 1);
  const std::string& w = sched.warnings()[0];
  CHECK(w.rfind("detector backend unavailable from frame", 0) == 0);
  CHECK(w.find("continuing without detections") != std::string::npos);

  // Further ticks stay quiet and deliver nothing.
  for (int i = 25; i < 30; ++i) CHECK(!sched.tick(i, i64(i) * 100, rgb));
  CHECK(sched.warnings().size() == 1);
}
