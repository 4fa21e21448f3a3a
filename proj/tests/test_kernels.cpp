#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "imon/background.hpp"
#include "imon/kernels.hpp"
#include "test_support.hpp"

using namespace imon;
using namespace imon::test;
namespace k = imon::kern;

namespace {

// Brute-force median over the valid pixels of the clipped k x k window;
// even counts take the upper middle, all-invalid windows give 0.
u16 median_oracle(const DepthPlane& in, int x, int y, int ksize) {
  const int r = ksize / 2;
  std::vector<u16> vals;
  for (int yy = std::max(0, y - r); yy <= std::min(in.height() - 1, y + r); ++yy)
    for (int xx = std::max(0, x - r); xx <= std::min(in.width() - 1, x + r); ++xx)
      if (in.at(xx, yy) != kInvalidDepth) vals.push_back(in.at(xx, yy));
  if (vals.empty()) return kInvalidDepth;
  std::sort(vals.begin(), vals.end());
  return vals[vals.size() / 2];
}

Mask morph_oracle(const Mask& in, bool erode) {
  Mask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      u8 acc = erode ? 1 : 0;
      for (int yy = std::max(0, y - 1); yy <= std::min(in.height() - 1, y + 1); ++yy)
        for (int xx = std::max(0, x - 1); xx <= std::min(in.width() - 1, x + 1); ++xx)
          acc = erode ? u8(acc & in.at(xx, yy)) : u8(acc | in.at(xx, yy));
      out.at(x, y) = acc;
    }
  return out;
}

Mask box_majority_oracle(const Mask& in, int ksize) {
  const int r = ksize / 2;
  Mask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      int cnt = 0, area = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(in.height() - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(in.width() - 1, x + r); ++xx) {
          ++area;
          cnt += in.at(xx, yy);
        }
      out.at(x, y) = (2 * cnt > area) ? 1 : 0;
    }
  return out;
}

}  // namespace

TEST_CASE("depth median matches the brute-force oracle") {
  std::mt19937 rng(42);
  for (auto [w, h] : {std::pair{23, 17}, {5, 5}, {1, 9}, {9, 1}, {64, 48}}) {
    for (int ksize : {1, 3, 5, 7}) {
      DepthPlane in = random_depth(rng, w, h, 0, 400, 0.15);
      DepthPlane out;
      k::median_u16(in, ksize, out, k::Exec{false});
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          CAPTURE(w);
          CAPTURE(h);
          CAPTURE(ksize);
          CAPTURE(x);
          CAPTURE(y);
          CHECK(out.at(x, y) == median_oracle(in, x, y, ksize));
        }
    }
  }
}

TEST_CASE("depth median handles wide value ranges and sparse histograms") {
  std::mt19937 rng(7);
  // Values spread across distant histogram blocks exercise the block skips.
  DepthPlane in(31, 13);
  std::uniform_int_distribution<int> val(0, 65535);
  for (size_t i = 0; i < in.size(); ++i) in[i] = u16(val(rng));
  DepthPlane out;
  k::median_u16(in, 5, out, k::Exec{false});
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      CHECK(out.at(x, y) == median_oracle(in, x, y, 5));
}

TEST_CASE("depth median: all-invalid window yields invalid") {
  DepthPlane in(8, 8, kInvalidDepth);
  in.at(7, 7) = 1234;
  DepthPlane out;
  k::median_u16(in, 3, out, k::Exec{false});
  CHECK(out.at(0, 0) == kInvalidDepth);
  CHECK(out.at(3, 3) == kInvalidDepth);
  CHECK(out.at(7, 7) == 1234);  // its own window holds one valid sample
  CHECK(out.at(6, 6) == 1234);
}

TEST_CASE("foreground classification agrees with score_pixel") {
  std::mt19937 rng(3);
  const int w = 19, h = 11, n = 10;
  std::vector<Plane<float>> hist(n);
  std::uniform_real_distribution<float> hv(900.0f, 1100.0f);
  for (auto& p : hist) {
    p.resize(w, h);
    for (size_t i = 0; i < p.size(); ++i) p[i] = hv(rng);
  }
  std::vector<const Plane<float>*> view;
  for (auto& p : hist) view.push_back(&p);
  DepthPlane depth = random_depth(rng, w, h, 850, 1150, 0.1);

  for (double sigma : {2.0, 10.0, 50.0}) {
    for (double rho : {-6.907, -4.0, -12.0}) {
      Mask fg;
      k::classify_foreground(depth, view, sigma, rho, fg, k::Exec{false});
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          bool expect = false;
          if (depth.at(x, y) != kInvalidDepth) {
            std::vector<float> samples;
            for (auto& p : hist)
              if (p.at(x, y) > 0.0f) samples.push_back(p.at(x, y));
            if (!samples.empty())
              expect = score_pixel(double(depth.at(x, y)), samples, sigma) < rho;
          }
          CAPTURE(x);
          CAPTURE(y);
          CHECK(bool(fg.at(x, y)) == expect);
        }
    }
  }
}

TEST_CASE("classification skips invalid history samples") {
  const int w = 4, h = 1;
  Plane<float> a(w, h, 1000.0f), b(w, h, 0.0f);  // b: all samples invalid
  a.at(3, 0) = 0.0f;                             // no valid history at x=3
  DepthPlane depth(w, h, 1500);
  depth.at(2, 0) = kInvalidDepth;
  Mask fg;
  k::classify_foreground(depth, {&a, &b}, 10.0, -6.907, fg, k::Exec{false});
  CHECK(fg.at(0, 0) == 1);  // 500 mm off a 10 mm sigma model
  CHECK(fg.at(1, 0) == 1);
  CHECK(fg.at(2, 0) == 0);  // invalid depth never foreground
  CHECK(fg.at(3, 0) == 0);  // empty history never foreground
}

TEST_CASE("background update blends only valid background pixels") {
  const int w = 5, h = 2;
  DepthPlane depth(w, h, 2000);
  depth.at(1, 0) = kInvalidDepth;
  Mask fg(w, h, 0);
  fg.at(2, 0) = 1;
  Plane<float> bg(w, h, 1000.0f);
  Plane<float> before = bg;
  const float alpha = 0.25f;
  k::update_background(depth, fg, alpha, bg, k::Exec{false});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (fg.at(x, y) || depth.at(x, y) == kInvalidDepth) {
        CHECK(bg.at(x, y) == before.at(x, y));  // bit-exact freeze
      } else {
        float expect = (1.0f - alpha) * before.at(x, y) + alpha * float(depth.at(x, y));
        CHECK(bg.at(x, y) == expect);
      }
    }
}

TEST_CASE("erode and dilate match the clipped-window oracle") {
  std::mt19937 rng(11);
  for (auto [w, h] : {std::pair{17, 13}, {1, 7}, {6, 1}, {2, 2}}) {
    Mask in = random_mask(rng, w, h, 0.4);
    Mask er, di;
    k::erode3(in, er, k::Exec{false});
    k::dilate3(in, di, k::Exec{false});
    CHECK(er == morph_oracle(in, true));
    CHECK(di == morph_oracle(in, false));
  }
}

TEST_CASE("opening removes isolated pixels and keeps solid regions") {
  Mask in = mask_rect(20, 20, {4, 4, 8, 8});
  in.at(15, 15) = 1;  // lone spike
  Mask er, opened;
  k::erode3(in, er, k::Exec{false});
  k::dilate3(er, opened, k::Exec{false});
  CHECK(opened.at(15, 15) == 0);
  CHECK(opened == mask_rect(20, 20, {4, 4, 8, 8}));
}

TEST_CASE("color motion requires all three channels to change") {
  const int w = 6, h = 3, theta = 20;
  ColorFrame prev(w, h, 100), cur(w, h, 100);
  Mask gate(w, h, 1);
  // x=0: R only; x=1: R+G; x=2: all three at exactly theta; x=3: all three
  // at theta-1; x=4: all three, big; x=5: all three but gated off.
  cur.at(0, 0, 0) = 200;
  cur.at(0, 1, 0) = 200;
  cur.at(1, 1, 0) = 200;
  for (int c = 0; c < 3; ++c) cur.at(c, 2, 0) = u8(100 + theta);
  for (int c = 0; c < 3; ++c) cur.at(c, 3, 0) = u8(100 + theta - 1);
  for (int c = 0; c < 3; ++c) cur.at(c, 4, 0) = 250;
  for (int c = 0; c < 3; ++c) cur.at(c, 5, 0) = 250;
  gate.at(5, 0) = 0;

  Mask out;
  k::color_motion(cur, prev, gate, theta, out, k::Exec{false});
  CHECK(out.at(0, 0) == 0);
  CHECK(out.at(1, 0) == 0);
  CHECK(out.at(2, 0) == 1);
  CHECK(out.at(3, 0) == 0);
  CHECK(out.at(4, 0) == 1);
  CHECK(out.at(5, 0) == 0);
  CHECK(mask_count(out) == 2);
}

TEST_CASE("box majority matches the oracle on random masks") {
  std::mt19937 rng(5);
  for (auto [w, h] : {std::pair{21, 15}, {4, 4}, {1, 10}}) {
    for (int ksize : {3, 5}) {
      Mask in = random_mask(rng, w, h, 0.5);
      Mask out;
      k::box_majority(in, ksize, out, k::Exec{false});
      CHECK(out == box_majority_oracle(in, ksize));
    }
  }
}

TEST_CASE("5x5 majority keeps a 12-pixel core of a 4x6 rectangle") {
  // The smallest scripted moving part is 4x6; its filtered response must stay
  // at or above the 4-pixel motion floor. A pixel survives when the window
  // overlap ox*oy reaches 13, which leaves a plus-shaped core.
  Mask in = mask_rect(16, 16, {6, 5, 4, 6});
  Mask out;
  k::box_majority(in, 5, out, k::Exec{false});
  u64 kept = mask_count(out);
  CHECK(kept == 12);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      bool bar = x >= 7 && x <= 8 && y >= 6 && y <= 9;
      bool wing = (x == 6 || x == 9) && (y == 7 || y == 8);
      CHECK(bool(out.at(x, y)) == (bar || wing));
    }
}

TEST_CASE("stack majority is a strict per-pixel vote") {
  Mask a = mask_with(3, 1, {{0, 0}, {1, 0}});
  Mask b = mask_with(3, 1, {{0, 0}});
  Mask c = mask_with(3, 1, {{0, 0}, {1, 0}});
  Mask out;
  k::stack_majority({&a, &b, &c}, out, k::Exec{false});
  CHECK(out.at(0, 0) == 1);  // 3/3
  CHECK(out.at(1, 0) == 1);  // 2/3
  CHECK(out.at(2, 0) == 0);  // 0/3

  // 2/4 is not a strict majority.
  Mask d(3, 1, 0);
  k::stack_majority({&a, &b, &c, &d}, out, k::Exec{false});
  CHECK(out.at(1, 0) == 0);
  CHECK(out.at(0, 0) == 1);  // 3/4
}

TEST_CASE("band grow only adds pixels inside the clipped box and band") {
  DepthPlane depth(10, 10, 1000);
  depth.at(2, 2) = 1027;  // inside band (|27| < 28)
  depth.at(3, 2) = 1028;  // at band edge, excluded (strict <)
  depth.at(4, 2) = kInvalidDepth;
  Mask out(10, 10, 0);
  out.at(9, 9) = 1;  // pre-set bit must survive
  k::band_grow(depth, Rect{1, 1, 4, 4}, 1000.0, 28.0, out, k::Exec{false});
  CHECK(out.at(2, 2) == 1);
  CHECK(out.at(3, 2) == 0);
  CHECK(out.at(4, 2) == 0);
  CHECK(out.at(1, 1) == 1);    // plain background inside box and band
  CHECK(out.at(6, 6) == 0);    // outside box
  CHECK(out.at(9, 9) == 1);
  // A box hanging off the image is clipped, not an error.
  Mask out2(10, 10, 0);
  k::band_grow(depth, Rect{-5, -5, 8, 8}, 1000.0, 28.0, out2, k::Exec{false});
  CHECK(out2.at(0, 0) == 1);
  CHECK(mask_count(out2) > 0);
}

TEST_CASE("absolute difference stats skip invalid pixels") {
  DepthPlane a(4, 1), b(4, 1);
  a.at(0, 0) = 100; b.at(0, 0) = 110;   // diff 10
  a.at(1, 0) = 200; b.at(1, 0) = 190;   // diff 10
  a.at(2, 0) = 0;   b.at(2, 0) = 500;   // a invalid
  a.at(3, 0) = 500; b.at(3, 0) = 0;     // b invalid
  auto s = k::abs_diff_stats(a, b, k::Exec{false});
  CHECK(s.abs_sum == 20);
  CHECK(s.count == 2);
}

TEST_CASE("luma numerator applies Rec. 601 integer weights") {
  ColorFrame c(2, 1);
  c.at(0, 0, 0) = 255;  // red pixel
  c.at(1, 1, 0) = 255;  // green pixel
  CHECK(k::luma_numerator(c, k::Exec{false}) == 299u * 255 + 587u * 255);
}

TEST_CASE("blob labeling is 8-connected with raster-ordered dense ids") {
  //  A.B
  //  .A.   diagonal pixels join component A
  Mask m = mask_with(5, 3, {{0, 0}, {1, 1}, {3, 0}});
  DepthPlane d(5, 3, 0);
  d.at(0, 0) = 100;
  d.at(1, 1) = 200;
  d.at(3, 0) = kInvalidDepth;
  Plane<i32> labels;
  std::vector<Blob> blobs;
  int n = k::label_blobs(m, d, labels, blobs);
  REQUIRE(n == 2);
  CHECK(labels.at(0, 0) == 0);
  CHECK(labels.at(1, 1) == 0);
  CHECK(labels.at(3, 0) == 1);
  CHECK(labels.at(2, 2) == -1);
  CHECK(blobs[0].area == 2);
  CHECK(blobs[0].bbox == Rect{0, 0, 2, 2});
  CHECK(blobs[0].mean_depth_mm == doctest::Approx(150.0));
  CHECK(blobs[0].depth_stddev_mm == doctest::Approx(50.0));
  CHECK(blobs[1].area == 1);
  CHECK(blobs[1].mean_depth_mm == 0.0);  // no valid depth inside
}

TEST_CASE("blob labeling merges u-shaped components") {
  Mask m = mask_rect(9, 9, {1, 1, 7, 2});
  for (int y = 3; y < 8; ++y) {
    m.at(1, y) = 1;
    m.at(7, y) = 1;
  }
  Plane<i32> labels;
  std::vector<Blob> blobs;
  CHECK(k::label_blobs(m, DepthPlane(9, 9, 100), labels, blobs) == 1);
  CHECK(blobs[0].area == 7 * 2 + 2 * 5);
}

TEST_CASE("area filter drops small blobs and compacts labels") {
  Mask m = mask_rect(12, 6, {0, 0, 2, 2});
  for (int x = 5; x < 10; ++x)
    for (int y = 1; y < 5; ++y) m.at(x, y) = 1;
  DepthPlane d(12, 6, 100);
  Plane<i32> labels;
  std::vector<Blob> blobs;
  k::label_blobs(m, d, labels, blobs);
  REQUIRE(blobs.size() == 2);
  k::filter_blobs_by_area(m, labels, blobs, 10);
  REQUIRE(blobs.size() == 1);
  CHECK(blobs[0].area == 20);
  CHECK(labels.at(5, 1) == 0);
  CHECK(labels.at(0, 0) == -1);
  CHECK(m.at(0, 0) == 0);
  CHECK(m.at(5, 1) == 1);
}

TEST_CASE("parallel kernels are bitwise-identical to the serial ones") {
  std::mt19937 rng(2024);
  for (auto [w, h] : {std::pair{33, 25}, {160, 120}, {1, 64}}) {
    DepthPlane depth = random_depth(rng, w, h, 500, 4000, 0.05);
    DepthPlane m1, m2;
    k::median_u16_serial(depth, 5, m1);
    k::median_u16_omp(depth, 5, m2);
    CHECK(m1 == m2);

    std::vector<Plane<float>> hist(10);
    for (auto& p : hist) {
      p.resize(w, h);
      std::uniform_real_distribution<float> hv(900.0f, 3100.0f);
      for (size_t i = 0; i < p.size(); ++i) p[i] = hv(rng);
    }
    std::vector<const Plane<float>*> view;
    for (auto& p : hist) view.push_back(&p);
    Mask f1, f2;
    k::classify_foreground_serial(depth, view, 9.0, -6.907, f1);
    k::classify_foreground_omp(depth, view, 9.0, -6.907, f2);
    CHECK(f1 == f2);

    Mask bits = random_mask(rng, w, h, 0.3);
    Plane<float> bg1 = hist[0], bg2 = hist[0];
    k::update_background_serial(depth, bits, 0.05f, bg1);
    k::update_background_omp(depth, bits, 0.05f, bg2);
    CHECK(bg1 == bg2);

    Mask e1, e2, d1, d2, b1, b2;
    k::erode3_serial(bits, e1);
    k::erode3_omp(bits, e2);
    CHECK(e1 == e2);
    k::dilate3_serial(bits, d1);
    k::dilate3_omp(bits, d2);
    CHECK(d1 == d2);
    k::box_majority_serial(bits, 5, b1);
    k::box_majority_omp(bits, 5, b2);
    CHECK(b1 == b2);

    ColorFrame cur = random_color(rng, w, h), prev = random_color(rng, w, h);
    Mask c1, c2;
    k::color_motion_serial(cur, prev, bits, 20, c1);
    k::color_motion_omp(cur, prev, bits, 20, c2);
    CHECK(c1 == c2);

    Mask s1(w, h, 0), s2(w, h, 0);
    k::band_grow_serial(depth, {2, 2, w - 4, h - 4}, 2000.0, 500.0, s1);
    k::band_grow_omp(depth, {2, 2, w - 4, h - 4}, 2000.0, 500.0, s2);
    CHECK(s1 == s2);

    Mask t1, t2;
    std::vector<Mask> stack{random_mask(rng, w, h, 0.5),
                            random_mask(rng, w, h, 0.5),
                            random_mask(rng, w, h, 0.5)};
    std::vector<const Mask*> sv{&stack[0], &stack[1], &stack[2]};
    k::stack_majority_serial(sv, t1);
    k::stack_majority_omp(sv, t2);
    CHECK(t1 == t2);

    DepthPlane other = random_depth(rng, w, h, 500, 4000, 0.05);
    auto r1 = k::abs_diff_stats_serial(depth, other);
    auto r2 = k::abs_diff_stats_omp(depth, other);
    CHECK(r1.abs_sum == r2.abs_sum);
    CHECK(r1.count == r2.count);

    CHECK(k::luma_numerator_serial(cur) == k::luma_numerator_omp(cur));
  }
}
