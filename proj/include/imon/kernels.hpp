#pragma once

#include "imon/core.hpp"

namespace imon::kern {

// Every pixel kernel comes in two variants: a plain serial reference and an
// OpenMP one parallelized over rows (or columns where noted). Both produce
// bitwise-identical output: cross-pixel reductions are integer, and per-pixel
// float work is independent of iteration order. The *_serial/*_omp pair is
// exposed for the equality tests and the benchmark; normal callers dispatch
// through Exec.
struct Exec {
  bool parallel = false;
};

// k x k median of a u16 plane, k odd. Invalid pixels (0) are excluded from
// the window; a window with no valid pixel yields 0. Border windows are
// clipped to the image. Sliding-histogram implementation, one window per row.
void median_u16(const DepthPlane& in, int k, DepthPlane& out, Exec e);
void median_u16_serial(const DepthPlane& in, int k, DepthPlane& out);
void median_u16_omp(const DepthPlane& in, int k, DepthPlane& out);

// Foreground classification against a model history. For pixel p with m >= 1
// valid history samples h_i and valid depth d:
//   f(d) = -log(sqrt(2*pi)*sigma) - (1/(2*m*sigma^2)) * sum_i (d - h_i)^2
// and p is foreground when f(d) < rho. Invalid depth or zero valid history
// never classifies as foreground. Residuals are summed in doubles, history
// index ascending, so results match score_pixel() exactly.
void classify_foreground(const DepthPlane& depth,
                         const std::vector<const Plane<float>*>& history,
                         double sigma, double rho, Mask& fg, Exec e);
void classify_foreground_serial(const DepthPlane& depth,
                                const std::vector<const Plane<float>*>& history,
                                double sigma, double rho, Mask& fg);
void classify_foreground_omp(const DepthPlane& depth,
                             const std::vector<const Plane<float>*>& history,
                             double sigma, double rho, Mask& fg);

// Selective exponential update: background pixels blend toward the new depth,
// foreground pixels and invalid measurements leave the model untouched.
void update_background(const DepthPlane& depth, const Mask& fg, float alpha,
                       Plane<float>& bg, Exec e);
void update_background_serial(const DepthPlane& depth, const Mask& fg,
                              float alpha, Plane<float>& bg);
void update_background_omp(const DepthPlane& depth, const Mask& fg,
                           float alpha, Plane<float>& bg);

// 3x3 binary erosion/dilation with windows clipped at the image border
// (a border pixel's window is just its in-image neighbourhood).
void erode3(const Mask& in, Mask& out, Exec e);
void erode3_serial(const Mask& in, Mask& out);
void erode3_omp(const Mask& in, Mask& out);
void dilate3(const Mask& in, Mask& out, Exec e);
void dilate3_serial(const Mask& in, Mask& out);
void dilate3_omp(const Mask& in, Mask& out);

// Frame-difference motion: out = gate && |dR|>=theta && |dG|>=theta && |dB|>=theta.
void color_motion(const ColorFrame& cur, const ColorFrame& prev,
                  const Mask& gate, int theta, Mask& out, Exec e);
void color_motion_serial(const ColorFrame& cur, const ColorFrame& prev,
                         const Mask& gate, int theta, Mask& out);
void color_motion_omp(const ColorFrame& cur, const ColorFrame& prev,
                      const Mask& gate, int theta, Mask& out);

// k x k binary median as a majority count: out = 1 iff more than half of the
// clipped window is set. Uses a summed-area table, all integer.
void box_majority(const Mask& in, int k, Mask& out, Exec e);
void box_majority_serial(const Mask& in, int k, Mask& out);
void box_majority_omp(const Mask& in, int k, Mask& out);

// Per-pixel majority across a stack of equally sized masks (temporal median).
void stack_majority(const std::vector<const Mask*>& masks, Mask& out, Exec e);
void stack_majority_serial(const std::vector<const Mask*>& masks, Mask& out);
void stack_majority_omp(const std::vector<const Mask*>& masks, Mask& out);

// Depth-band test inside a box: sets out pixels whose valid depth lies within
// |d - center| < band. Only sets bits, never clears.
void band_grow(const DepthPlane& depth, Rect box, double center, double band,
               Mask& out, Exec e);
void band_grow_serial(const DepthPlane& depth, Rect box, double center,
                      double band, Mask& out);
void band_grow_omp(const DepthPlane& depth, Rect box, double center,
                   double band, Mask& out);

// Mean absolute difference accumulator over pixels valid in both planes.
struct DiffStats {
  u64 abs_sum = 0;
  u64 count = 0;
};
DiffStats abs_diff_stats(const DepthPlane& a, const DepthPlane& b, Exec e);
DiffStats abs_diff_stats_serial(const DepthPlane& a, const DepthPlane& b);
DiffStats abs_diff_stats_omp(const DepthPlane& a, const DepthPlane& b);

// Integer luma sum: sum over pixels of 299*R + 587*G + 114*B.
// Mean luma = result / (1000 * w * h).
u64 luma_numerator(const ColorFrame& c, Exec e);
u64 luma_numerator_serial(const ColorFrame& c);
u64 luma_numerator_omp(const ColorFrame& c);

// 8-connected components of a binary mask, serial (label order is the raster
// order of each component's first pixel, so output is deterministic). Fills
// labels with the dense component id per pixel (-1 outside) and computes blob
// area, bbox and depth statistics over valid-depth pixels. Returns the count.
int label_blobs(const Mask& m, const DepthPlane& depth, Plane<i32>& labels,
                std::vector<Blob>& blobs);

// Drops blobs with area < min_area from mask, labels and blob list, keeping
// dense label ids compacted in order.
void filter_blobs_by_area(Mask& m, Plane<i32>& labels, std::vector<Blob>& blobs,
                          i64 min_area);

}  // namespace imon::kern
