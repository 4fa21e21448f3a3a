// Times the pixel kernels serial vs OpenMP on a noisy VGA frame and checks
// that both paths produce bitwise-identical output.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "imon/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace imon;

namespace {

u64 splitmix64(u64 x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double time_ms(const std::function<void()>& fn, int reps) {
  using Clock = std::chrono::steady_clock;
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
         reps;
}

void report(const std::string& name, double serial_ms, double omp_ms,
            bool equal) {
  std::printf("%-18s %9.3f ms %9.3f ms  x%5.2f  %s\n", name.c_str(), serial_ms,
              omp_ms, omp_ms > 0 ? serial_ms / omp_ms : 0.0,
              equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 10;
  const int w = 640, h = 480;
#ifdef _OPENMP
  std::printf("OpenMP: %d threads, %d reps\n", omp_get_max_threads(), reps);
#else
  std::printf("OpenMP: unavailable (both paths run serially), %d reps\n",
              reps);
#endif

  DepthPlane depth(w, h);
  for (size_t i = 0; i < depth.size(); ++i)
    depth[i] = u16(1500 + (splitmix64(i) % 2000));

  std::vector<Plane<float>> hist(10);
  for (size_t k = 0; k < hist.size(); ++k) {
    hist[k].resize(w, h);
    for (size_t i = 0; i < hist[k].size(); ++i)
      hist[k][i] = float(1500 + (splitmix64(i * 10 + k) % 2000));
  }
  std::vector<const Plane<float>*> hview;
  for (const auto& p : hist) hview.push_back(&p);

  ColorFrame cur(w, h), prev(w, h);
  for (int c = 0; c < 3; ++c)
    for (size_t i = 0; i < size_t(w) * size_t(h); ++i) {
      cur.plane(c)[i] = u8(splitmix64(i * 3 + size_t(c)) & 0xFF);
      prev.plane(c)[i] = u8(splitmix64(i * 7 + size_t(c)) & 0xFF);
    }

  Mask fg(w, h);
  for (size_t i = 0; i < fg.size(); ++i) fg[i] = splitmix64(i + 99) & 1;

  const kern::Exec ser{false}, par{true};
  std::printf("%-18s %12s %12s %7s\n", "kernel", "serial", "openmp",
              "ratio");

  {
    DepthPlane a, b;
    const double s =
        time_ms([&] { kern::median_u16(depth, 5, a, ser); }, reps);
    const double p =
        time_ms([&] { kern::median_u16(depth, 5, b, par); }, reps);
    report("median_u16 5x5", s, p, a == b);
  }
  {
    Mask a, b;
    const double s = time_ms(
        [&] { kern::classify_foreground(depth, hview, 30.0, -6.907, a, ser); },
        reps);
    const double p = time_ms(
        [&] { kern::classify_foreground(depth, hview, 30.0, -6.907, b, par); },
        reps);
    report("classify n=10", s, p, a == b);
  }
  {
    Mask a, b;
    const double s = time_ms([&] { kern::erode3(fg, a, ser); }, reps);
    const double p = time_ms([&] { kern::erode3(fg, b, par); }, reps);
    report("erode3", s, p, a == b);
  }
  {
    Mask a, b;
    const double s = time_ms([&] { kern::dilate3(fg, a, ser); }, reps);
    const double p = time_ms([&] { kern::dilate3(fg, b, par); }, reps);
    report("dilate3", s, p, a == b);
  }
  {
    Mask a, b;
    const double s =
        time_ms([&] { kern::color_motion(cur, prev, fg, 20, a, ser); }, reps);
    const double p =
        time_ms([&] { kern::color_motion(cur, prev, fg, 20, b, par); }, reps);
    report("color_motion", s, p, a == b);
  }
  {
    Mask a, b;
    const double s = time_ms([&] { kern::box_majority(fg, 5, a, ser); }, reps);
    const double p = time_ms([&] { kern::box_majority(fg, 5, b, par); }, reps);
    report("box_majority 5x5", s, p, a == b);
  }
  return 0;
}
