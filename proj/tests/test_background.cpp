#include <cmath>
#include <vector>

#include "doctest.h"
#include "imon/background.hpp"
#include "test_support.hpp"

using namespace imon;
using namespace imon::test;

namespace {

std::vector<const DepthPlane*> views(const std::vector<DepthPlane>& v) {
  std::vector<const DepthPlane*> out;
  for (auto& p : v) out.push_back(&p);
  return out;
}

// n copies of a constant plane; constant planes are median-invariant, so the
// model's smoothing changes nothing and sigma comes out of the raw values.
std::vector<DepthPlane> constant_frames(int n, int w, int h, u16 v) {
  return std::vector<DepthPlane>(size_t(n), DepthPlane(w, h, v));
}

RgbdFrame frame_of(const DepthPlane& d, int index) {
  RgbdFrame f;
  f.index = index;
  f.timestamp_ms = index * 250;
  f.depth = d;
  f.color = ColorFrame(d.width(), d.height(), 97);
  return f;
}

}  // namespace

TEST_CASE("score_pixel is exact for equal residuals") {
  // With every history sample at the same distance, the quadratic form equals
  // the log of the averaged Gaussian kernels exactly.
  const double sigma = 12.0, d = 1000.0;
  std::vector<float> hist(10, 950.0f);
  double f = score_pixel(d, hist, sigma);
  double kernel = std::exp(-(d - 950.0) * (d - 950.0) / (2 * sigma * sigma)) /
                  (std::sqrt(2 * M_PI) * sigma);
  CHECK(f == doctest::Approx(std::log(kernel)).epsilon(1e-12));
}

TEST_CASE("score_pixel lower-bounds the kernel density average") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<float> hv(900.0f, 1100.0f);
  std::uniform_real_distribution<double> dv(850.0, 1150.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> hist(10);
    for (auto& h : hist) h = hv(rng);
    const double sigma = 15.0, d = dv(rng);
    double avg = 0.0;
    for (float h : hist)
      avg += std::exp(-(d - h) * (d - h) / (2 * sigma * sigma)) /
             (std::sqrt(2 * M_PI) * sigma);
    avg /= double(hist.size());
    CHECK(score_pixel(d, hist, sigma) <= std::log(avg) + 1e-12);
  }
}

TEST_CASE("init estimates sigma from successive smoothed differences") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  // Alternating constant planes: every successive pair differs by 10 mm.
  std::vector<DepthPlane> frames;
  for (int i = 0; i < cfg.n_history; ++i)
    frames.push_back(DepthPlane(32, 24, u16(1000 + (i % 2) * 10)));
  model.init(views(frames));
  CHECK(model.mean_abs_diff() == doctest::Approx(10.0));
  CHECK(model.sigma() == doctest::Approx(10.0 / (0.68 * std::sqrt(2.0))));
  CHECK(model.initialized());
  CHECK(model.history_size() == cfg.n_history);
}

TEST_CASE("init applies the sigma floor on static scenes") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 32, 24, 2000);
  model.init(views(frames));
  CHECK(model.mean_abs_diff() == 0.0);
  CHECK(model.sigma() == cfg.sigma_floor_mm);
}

TEST_CASE("init keeps only the last n frames") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history + 5, 16, 16, 3000);
  for (int i = 0; i < 5; ++i) frames[i].fill(500);  // old frames, discarded
  model.init(views(frames));
  CHECK(model.mean_abs_diff() == 0.0);
  CHECK(model.latest().at(0, 0) == 3000.0f);
}

TEST_CASE("init rejects short or fully invalid input") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history - 1, 16, 16, 3000);
  CHECK_THROWS_AS(model.init(views(frames)), DataError);
  auto invalid = constant_frames(cfg.n_history, 16, 16, kInvalidDepth);
  CHECK_THROWS_AS(model.init(views(invalid)), DataError);
  CHECK_THROWS_AS(model.detect(frame_of(DepthPlane(16, 16, 1), 0)), DataError);
}

TEST_CASE("a frame identical to the background yields an empty mask") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 64, 48, 3000);
  model.init(views(frames));
  auto fg = model.detect(frame_of(frames[0], 10));
  CHECK(fg.empty());
  CHECK(mask_count(fg.bits) == 0);
}

TEST_CASE("a near rectangle is detected as one blob with its bounding box") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  const int w = 320, h = 240;
  auto frames = constant_frames(cfg.n_history, w, h, 3000);
  model.init(views(frames));

  DepthPlane d(w, h, 3000);
  const Rect person{120, 40, 80, 160};
  for (int y = person.y; y < person.bottom(); ++y)
    for (int x = person.x; x < person.right(); ++x) d.at(x, y) = 500;
  auto fg = model.detect(frame_of(d, 10));
  REQUIRE(fg.blobs.size() == 1);
  CHECK(fg.blobs[0].bbox == person);
  CHECK(fg.blobs[0].mean_depth_mm == doctest::Approx(500.0));
  CHECK(fg.blobs[0].track_id == 0);
}

TEST_CASE("single-pixel depth spikes are removed by opening") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 64, 48, 3000);
  model.init(views(frames));
  DepthPlane d(64, 48, 3000);
  d.at(30, 20) = 500;
  auto fg = model.detect(frame_of(d, 10));
  CHECK(fg.empty());
}

TEST_CASE("invalid depth never classifies as foreground") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 64, 48, 3000);
  model.init(views(frames));
  DepthPlane d(64, 48, kInvalidDepth);  // full dropout
  auto fg = model.detect(frame_of(d, 10));
  CHECK(mask_count(fg.bits) == 0);
}

TEST_CASE("update freezes foreground pixels bit-exactly") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  const int w = 64, h = 48;
  auto frames = constant_frames(cfg.n_history, w, h, 3000);
  model.init(views(frames));

  DepthPlane d(w, h, 3000);
  for (int y = 10; y < 40; ++y)
    for (int x = 20; x < 50; ++x) d.at(x, y) = 500;
  Plane<float> before = model.latest();
  auto fg = model.detect(frame_of(d, 10));
  REQUIRE(!fg.empty());
  model.update(frame_of(d, 10), fg);
  const Plane<float>& after = model.latest();
  u64 frozen = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (fg.bits.at(x, y)) {
        CHECK(after.at(x, y) == before.at(x, y));
        ++frozen;
      }
  CHECK(frozen == mask_count(fg.bits));
  CHECK(model.history_size() == cfg.n_history);
}

TEST_CASE("update must follow detect on the same frame") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 16, 16, 3000);
  model.init(views(frames));
  auto fg = model.detect(frame_of(frames[0], 3));
  CHECK_THROWS_AS(model.update(frame_of(frames[0], 4), fg), DataError);
}

TEST_CASE("with alpha 1 an empty foreground snaps the background to the frame") {
  PipelineConfig cfg;
  cfg.alpha = 1.0;
  cfg.sigma_floor_mm = 30.0;  // keep the 10 mm shift below threshold
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 32, 24, 3000);
  model.init(views(frames));
  DepthPlane d(32, 24, 3010);
  auto fg = model.detect(frame_of(d, 10));
  model.update(frame_of(d, 10), fg);
  CHECK(model.latest().at(5, 5) == 3010.0f);
}

TEST_CASE("with alpha 0 the background never moves") {
  PipelineConfig cfg;
  cfg.alpha = 0.0;
  cfg.sigma_floor_mm = 30.0;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 32, 24, 3000);
  model.init(views(frames));
  DepthPlane d(32, 24, 3010);
  auto fg = model.detect(frame_of(d, 10));
  model.update(frame_of(d, 10), fg);
  CHECK(model.latest().at(5, 5) == 3000.0f);
}

TEST_CASE("a static scene converges geometrically to the new depth") {
  PipelineConfig cfg;
  cfg.sigma_floor_mm = 30.0;  // keep the 20 mm shift below threshold
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 32, 24, 3000);
  model.init(views(frames));

  // Background shifts by a sub-threshold amount; the model should track it
  // with per-step error shrinking by (1 - alpha).
  DepthPlane d(32, 24, 3020);
  double err = 20.0;
  for (int i = 0; i < 28; ++i) {
    auto fg = model.detect(frame_of(d, 10 + i));
    REQUIRE(fg.empty());
    model.update(frame_of(d, 10 + i), fg);
    err *= (1.0 - cfg.alpha);
  }
  // 28 steps = two halvings at alpha 0.05 (0.95^14 < 0.5).
  CHECK(std::abs(model.latest().at(7, 7) - 3020.0) <=
        doctest::Approx(20.0 / 4.0).epsilon(0.02));
  CHECK(std::abs(model.latest().at(7, 7) - 3020.0) ==
        doctest::Approx(err).epsilon(0.01));
}

TEST_CASE("lowering rho never adds foreground pixels") {
  std::mt19937 rng(21);
  PipelineConfig cfg;
  const int w = 48, h = 36;
  std::vector<Plane<float>> hist(cfg.n_history);
  std::uniform_real_distribution<float> hv(2900.0f, 3100.0f);
  for (auto& p : hist) {
    p.resize(w, h);
    for (size_t i = 0; i < p.size(); ++i) p[i] = hv(rng);
  }
  std::vector<const Plane<float>*> view;
  for (auto& p : hist) view.push_back(&p);
  DepthPlane d = random_depth(rng, w, h, 2800, 3200);
  Mask loose, tight;
  kern::classify_foreground(d, view, 30.0, -6.907, loose, kern::Exec{false});
  kern::classify_foreground(d, view, 30.0, -9.0, tight, kern::Exec{false});
  for (size_t i = 0; i < loose.size(); ++i)
    CHECK(tight[i] <= loose[i]);
  CHECK(mask_count(loose) > 0);  // the property is not vacuous
}

TEST_CASE("track ids persist across overlapping detections") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  const int w = 320, h = 240;
  auto frames = constant_frames(cfg.n_history, w, h, 3000);
  model.init(views(frames));

  auto with_rect = [&](Rect r) {
    DepthPlane d(w, h, 3000);
    for (int y = r.y; y < r.bottom(); ++y)
      for (int x = r.x; x < r.right(); ++x) d.at(x, y) = 500;
    return d;
  };
  auto fg1 = model.detect(frame_of(with_rect({100, 60, 60, 120}), 10));
  model.update(frame_of(with_rect({100, 60, 60, 120}), 10), fg1);
  auto fg2 = model.detect(frame_of(with_rect({104, 62, 60, 120}), 11));
  REQUIRE(fg1.blobs.size() == 1);
  REQUIRE(fg2.blobs.size() == 1);
  CHECK(fg2.blobs[0].track_id == fg1.blobs[0].track_id);

  // A detection far away gets a fresh id.
  auto fg3 = model.detect(frame_of(with_rect({240, 10, 60, 120}), 12));
  REQUIRE(fg3.blobs.size() == 1);
  CHECK(fg3.blobs[0].track_id != fg1.blobs[0].track_id);
}

TEST_CASE("merge_into_background absorbs the region in one step") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  const int w = 320, h = 240;
  auto frames = constant_frames(cfg.n_history, w, h, 3000);
  model.init(views(frames));

  DepthPlane d(w, h, 3000);
  for (int y = 60; y < 180; ++y)
    for (int x = 100; x < 160; ++x) d.at(x, y) = 800;
  auto fg = model.detect(frame_of(d, 10));
  REQUIRE(!fg.empty());
  model.merge_into_background(fg.bits);
  model.update(frame_of(d, 10), fg);

  // The same depth is background from the next frame on.
  auto fg2 = model.detect(frame_of(d, 11));
  CHECK(fg2.empty());
  CHECK(model.recent().size() == 1);  // ring was cleared by the merge
}

TEST_CASE("per-frame scratch is released and audited") {
  PipelineConfig cfg;
  BackgroundModel model(cfg, kern::Exec{false});
  auto frames = constant_frames(cfg.n_history, 32, 24, 3000);
  model.init(views(frames));
  CHECK(model.retained_depth_planes() == cfg.n_history + 1);
  auto fg = model.detect(frame_of(frames[0], 10));
  model.update(frame_of(frames[0], 10), fg);
  CHECK(model.retained_depth_planes() == cfg.n_history + 2);  // smoothed alive
  model.end_frame();
  CHECK(model.retained_depth_planes() == cfg.n_history + 1);
  CHECK(model.retained_masks() == 1);  // the recent ring entry
}
