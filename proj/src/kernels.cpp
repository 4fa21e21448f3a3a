#include "imon/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace imon::kern {

namespace {

// Sliding-histogram median for one output row. hist (65536) and coarse (256)
// must be all-zero on entry and are restored to all-zero before returning.
// Tracks the current median value and the count of window values below it, so
// each step only walks the few bins the window actually moved across.
void median_row_u16(const DepthPlane& in, int y, int r, DepthPlane& out,
                    u8* hist, u16* coarse) {
  const int w = in.width();
  const int h = in.height();
  const int y0 = std::max(0, y - r);
  const int y1 = std::min(h - 1, y + r);

  int cnt = 0;
  int med = 0;
  int nlt = 0;  // window values strictly below med
  bool have_med = false;

  auto add = [&](u16 v) {
    if (v == kInvalidDepth) return;
    ++hist[v];
    ++coarse[v >> 8];
    ++cnt;
    if (have_med && v < med) ++nlt;
  };
  auto remove = [&](u16 v) {
    --hist[v];
    --coarse[v >> 8];
    --cnt;
    if (have_med && v < med) --nlt;
  };
  auto add_col = [&](int x) {
    for (int yy = y0; yy <= y1; ++yy) add(in.at(x, yy));
  };
  auto remove_col = [&](int x) {
    for (int yy = y0; yy <= y1; ++yy) {
      u16 v = in.at(x, yy);
      if (v != kInvalidDepth) remove(v);
    }
  };
  // Largest set value below v / smallest above v; callers guarantee
  // existence. Entirely empty coarse blocks are skipped, non-empty ones are
  // scanned element-wise (v moves strictly toward the target either way).
  auto prev_set = [&](int v) {
    --v;
    while (hist[v] == 0) {
      if (coarse[v >> 8] == 0) {
        int b = (v >> 8) - 1;
        while (coarse[b] == 0) --b;
        v = (b << 8) | 255;
      } else {
        --v;
      }
    }
    return v;
  };
  auto next_set = [&](int v) {
    ++v;
    while (hist[v] == 0) {
      if (coarse[v >> 8] == 0) {
        int b = (v >> 8) + 1;
        while (coarse[b] == 0) ++b;
        v = b << 8;
      } else {
        ++v;
      }
    }
    return v;
  };

  for (int x = 0; x <= std::min(r, w - 1); ++x) add_col(x);

  for (int x = 0; x < w; ++x) {
    if (x > 0) {
      if (x + r < w) add_col(x + r);
      if (x - r - 1 >= 0) remove_col(x - r - 1);
    }
    if (cnt == 0) {
      out.at(x, y) = kInvalidDepth;
      have_med = false;
      continue;
    }
    const int k = cnt / 2;  // upper middle for even counts
    if (!have_med) {
      int c = 0, b = 0;
      while (c + coarse[b] <= k) c += coarse[b++];
      int v = b << 8;
      while (c + hist[v] <= k) c += hist[v++];
      med = v;
      nlt = c;
      have_med = true;
    } else {
      while (nlt > k) {
        med = prev_set(med);
        nlt -= hist[med];
      }
      while (nlt + hist[med] <= k) {
        nlt += hist[med];
        med = next_set(med);
      }
    }
    out.at(x, y) = u16(med);
  }

  // Drain the last window so the histograms are zero for the next row.
  for (int x = std::max(0, w - 1 - r); x <= w - 1; ++x) remove_col(x);
}

void median_rows_range(const DepthPlane& in, int r, DepthPlane& out, int ybegin,
                       int yend) {
  std::vector<u8> hist(65536, 0);
  std::vector<u16> coarse(256, 0);
  for (int y = ybegin; y < yend; ++y)
    median_row_u16(in, y, r, out, hist.data(), coarse.data());
}

}  // namespace

void median_u16_serial(const DepthPlane& in, int k, DepthPlane& out) {
  out.resize(in.width(), in.height());
  median_rows_range(in, k / 2, out, 0, in.height());
}

void median_u16_omp(const DepthPlane& in, int k, DepthPlane& out) {
  out.resize(in.width(), in.height());
  const int h = in.height();
  const int r = k / 2;
#ifdef _OPENMP
#pragma omp parallel
  {
    const int nt = omp_get_num_threads();
    const int id = omp_get_thread_num();
    const int chunk = (h + nt - 1) / nt;
    const int y0 = std::min(h, id * chunk);
    const int y1 = std::min(h, y0 + chunk);
    median_rows_range(in, r, out, y0, y1);
  }
#else
  median_rows_range(in, r, out, 0, h);
#endif
}

void median_u16(const DepthPlane& in, int k, DepthPlane& out, Exec e) {
  e.parallel ? median_u16_omp(in, k, out) : median_u16_serial(in, k, out);
}

namespace {

inline void classify_row(const u16* d, const float* const* hist, int nh,
                         double inv_2s2, double c0_minus_rho, u8* fg, int w) {
  for (int x = 0; x < w; ++x) {
    if (d[x] == kInvalidDepth) {
      fg[x] = 0;
      continue;
    }
    double ssq = 0.0;
    int m = 0;
    for (int j = 0; j < nh; ++j) {
      float hv = hist[j][x];
      if (hv > 0.0f) {
        double rdiff = double(d[x]) - double(hv);
        ssq += rdiff * rdiff;
        ++m;
      }
    }
    // f < rho  <=>  ssq * inv_2s2 / m > c0 - rho
    fg[x] = (m > 0 && ssq * inv_2s2 > c0_minus_rho * m) ? 1 : 0;
  }
}

}  // namespace

void classify_foreground_serial(const DepthPlane& depth,
                                const std::vector<const Plane<float>*>& history,
                                double sigma, double rho, Mask& fg) {
  const int w = depth.width(), h = depth.height();
  fg.resize(w, h);
  const int nh = int(history.size());
  std::vector<const float*> rows(nh);
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  const double c0 = -std::log(std::sqrt(2.0 * M_PI) * sigma);
  for (int y = 0; y < h; ++y) {
    for (int j = 0; j < nh; ++j) rows[j] = history[j]->row(y);
    classify_row(depth.row(y), rows.data(), nh, inv_2s2, c0 - rho, fg.row(y), w);
  }
}

void classify_foreground_omp(const DepthPlane& depth,
                             const std::vector<const Plane<float>*>& history,
                             double sigma, double rho, Mask& fg) {
  const int w = depth.width(), h = depth.height();
  fg.resize(w, h);
  const int nh = int(history.size());
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  const double c0 = -std::log(std::sqrt(2.0 * M_PI) * sigma);
#ifdef _OPENMP
#pragma omp parallel
  {
    std::vector<const float*> rows(nh);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      for (int j = 0; j < nh; ++j) rows[j] = history[j]->row(y);
      classify_row(depth.row(y), rows.data(), nh, inv_2s2, c0 - rho, fg.row(y),
                   w);
    }
  }
#else
  classify_foreground_serial(depth, history, sigma, rho, fg);
#endif
}

void classify_foreground(const DepthPlane& depth,
                         const std::vector<const Plane<float>*>& history,
                         double sigma, double rho, Mask& fg, Exec e) {
  e.parallel ? classify_foreground_omp(depth, history, sigma, rho, fg)
             : classify_foreground_serial(depth, history, sigma, rho, fg);
}

namespace {

inline void update_row(const u16* d, const u8* fg, float alpha, float* bg,
                       int w) {
  const float keep = 1.0f - alpha;
  for (int x = 0; x < w; ++x) {
    if (!fg[x] && d[x] != kInvalidDepth) bg[x] = keep * bg[x] + alpha * float(d[x]);
  }
}

}  // namespace

void update_background_serial(const DepthPlane& depth, const Mask& fg,
                              float alpha, Plane<float>& bg) {
  for (int y = 0; y < depth.height(); ++y)
    update_row(depth.row(y), fg.row(y), alpha, bg.row(y), depth.width());
}

void update_background_omp(const DepthPlane& depth, const Mask& fg, float alpha,
                           Plane<float>& bg) {
  const int h = depth.height();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int y = 0; y < h; ++y)
    update_row(depth.row(y), fg.row(y), alpha, bg.row(y), depth.width());
}

void update_background(const DepthPlane& depth, const Mask& fg, float alpha,
                       Plane<float>& bg, Exec e) {
  e.parallel ? update_background_omp(depth, fg, alpha, bg)
             : update_background_serial(depth, fg, alpha, bg);
}

namespace {

template <bool Erode>
inline void morph3_row(const Mask& in, int y, u8* out) {
  const int w = in.width(), h = in.height();
  const int ya = std::max(0, y - 1), yb = std::min(h - 1, y + 1);
  for (int x = 0; x < w; ++x) {
    const int xa = std::max(0, x - 1), xb = std::min(w - 1, x + 1);
    u8 acc = Erode ? 1 : 0;
    for (int yy = ya; yy <= yb; ++yy) {
      const u8* row = in.row(yy);
      for (int xx = xa; xx <= xb; ++xx) {
        if (Erode)
          acc &= row[xx];
        else
          acc |= row[xx];
      }
    }
    out[x] = acc;
  }
}

template <bool Erode>
void morph3(const Mask& in, Mask& out, bool parallel) {
  out.resize(in.width(), in.height());
  const int h = in.height();
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) morph3_row<Erode>(in, y, out.row(y));
  } else {
    for (int y = 0; y < h; ++y) morph3_row<Erode>(in, y, out.row(y));
  }
}

}  // namespace

void erode3_serial(const Mask& in, Mask& out) { morph3<true>(in, out, false); }
void erode3_omp(const Mask& in, Mask& out) { morph3<true>(in, out, true); }
void erode3(const Mask& in, Mask& out, Exec e) {
  morph3<true>(in, out, e.parallel);
}
void dilate3_serial(const Mask& in, Mask& out) { morph3<false>(in, out, false); }
void dilate3_omp(const Mask& in, Mask& out) { morph3<false>(in, out, true); }
void dilate3(const Mask& in, Mask& out, Exec e) {
  morph3<false>(in, out, e.parallel);
}

namespace {

inline void color_motion_row(const u8* cr, const u8* cg, const u8* cb,
                             const u8* pr, const u8* pg, const u8* pb,
                             const u8* gate, int theta, u8* out, int w) {
  for (int x = 0; x < w; ++x) {
    int dr = std::abs(int(cr[x]) - int(pr[x]));
    int dg = std::abs(int(cg[x]) - int(pg[x]));
    int db = std::abs(int(cb[x]) - int(pb[x]));
    out[x] = (gate[x] && dr >= theta && dg >= theta && db >= theta) ? 1 : 0;
  }
}

}  // namespace

void color_motion_serial(const ColorFrame& cur, const ColorFrame& prev,
                         const Mask& gate, int theta, Mask& out) {
  const int w = cur.w, h = cur.h;
  out.resize(w, h);
  for (int y = 0; y < h; ++y) {
    size_t off = size_t(y) * w;
    color_motion_row(cur.plane(0) + off, cur.plane(1) + off, cur.plane(2) + off,
                     prev.plane(0) + off, prev.plane(1) + off,
                     prev.plane(2) + off, gate.row(y), theta, out.row(y), w);
  }
}

void color_motion_omp(const ColorFrame& cur, const ColorFrame& prev,
                      const Mask& gate, int theta, Mask& out) {
  const int w = cur.w, h = cur.h;
  out.resize(w, h);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int y = 0; y < h; ++y) {
    size_t off = size_t(y) * w;
    color_motion_row(cur.plane(0) + off, cur.plane(1) + off, cur.plane(2) + off,
                     prev.plane(0) + off, prev.plane(1) + off,
                     prev.plane(2) + off, gate.row(y), theta, out.row(y), w);
  }
}

void color_motion(const ColorFrame& cur, const ColorFrame& prev,
                  const Mask& gate, int theta, Mask& out, Exec e) {
  e.parallel ? color_motion_omp(cur, prev, gate, theta, out)
             : color_motion_serial(cur, prev, gate, theta, out);
}

namespace {

// Summed-area table with a one-cell zero border: sat(x, y) = count of set
// pixels in [0,x) x [0,y).
void build_sat(const Mask& in, Plane<u32>& sat, bool parallel) {
  const int w = in.width(), h = in.height();
  sat.resize(w + 1, h + 1, 0);
  // Row prefix sums, independent per row.
  auto row_pass = [&](int y) {
    const u8* src = in.row(y);
    u32* dst = sat.row(y + 1);
    u32 run = 0;
    dst[0] = 0;
    for (int x = 0; x < w; ++x) {
      run += src[x];
      dst[x + 1] = run;
    }
  };
  // Column accumulation, independent per column.
  auto col_pass = [&](int x) {
    u32 run = 0;
    for (int y = 1; y <= h; ++y) {
      run += sat.at(x, y);
      sat.at(x, y) = run;
    }
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) row_pass(y);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int x = 1; x <= w; ++x) col_pass(x);
  } else {
    for (int y = 0; y < h; ++y) row_pass(y);
    for (int x = 1; x <= w; ++x) col_pass(x);
  }
}

void box_majority_impl(const Mask& in, int k, Mask& out, bool parallel) {
  const int w = in.width(), h = in.height();
  const int r = k / 2;
  out.resize(w, h);
  Plane<u32> sat;
  build_sat(in, sat, parallel);
  auto out_row = [&](int y) {
    const int ya = std::max(0, y - r), yb = std::min(h - 1, y + r);
    u8* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      const int xa = std::max(0, x - r), xb = std::min(w - 1, x + r);
      u32 cnt = sat.at(xb + 1, yb + 1) - sat.at(xa, yb + 1) -
                sat.at(xb + 1, ya) + sat.at(xa, ya);
      u32 area = u32(xb - xa + 1) * u32(yb - ya + 1);
      dst[x] = (2 * cnt > area) ? 1 : 0;
    }
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) out_row(y);
  } else {
    for (int y = 0; y < h; ++y) out_row(y);
  }
}

}  // namespace

void box_majority_serial(const Mask& in, int k, Mask& out) {
  box_majority_impl(in, k, out, false);
}
void box_majority_omp(const Mask& in, int k, Mask& out) {
  box_majority_impl(in, k, out, true);
}
void box_majority(const Mask& in, int k, Mask& out, Exec e) {
  box_majority_impl(in, k, out, e.parallel);
}

namespace {

void stack_majority_impl(const std::vector<const Mask*>& masks, Mask& out,
                         bool parallel) {
  const int w = masks.at(0)->width(), h = masks[0]->height();
  const int n = int(masks.size());
  out.resize(w, h);
  auto row_pass = [&](int y) {
    u8* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      int c = 0;
      for (int j = 0; j < n; ++j) c += masks[j]->row(y)[x];
      dst[x] = (2 * c > n) ? 1 : 0;
    }
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) row_pass(y);
  } else {
    for (int y = 0; y < h; ++y) row_pass(y);
  }
}

}  // namespace

void stack_majority_serial(const std::vector<const Mask*>& masks, Mask& out) {
  stack_majority_impl(masks, out, false);
}
void stack_majority_omp(const std::vector<const Mask*>& masks, Mask& out) {
  stack_majority_impl(masks, out, true);
}
void stack_majority(const std::vector<const Mask*>& masks, Mask& out, Exec e) {
  stack_majority_impl(masks, out, e.parallel);
}

namespace {

void band_grow_impl(const DepthPlane& depth, Rect box, double center,
                    double band, Mask& out, bool parallel) {
  const Rect b = box.clipped(depth.width(), depth.height());
  if (b.empty()) return;
  auto row_pass = [&](int y) {
    const u16* d = depth.row(y);
    u8* dst = out.row(y);
    for (int x = b.x; x < b.right(); ++x) {
      if (d[x] != kInvalidDepth && std::abs(double(d[x]) - center) < band)
        dst[x] = 1;
    }
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = b.y; y < b.bottom(); ++y) row_pass(y);
  } else {
    for (int y = b.y; y < b.bottom(); ++y) row_pass(y);
  }
}

}  // namespace

void band_grow_serial(const DepthPlane& depth, Rect box, double center,
                      double band, Mask& out) {
  band_grow_impl(depth, box, center, band, out, false);
}
void band_grow_omp(const DepthPlane& depth, Rect box, double center,
                   double band, Mask& out) {
  band_grow_impl(depth, box, center, band, out, true);
}
void band_grow(const DepthPlane& depth, Rect box, double center, double band,
               Mask& out, Exec e) {
  band_grow_impl(depth, box, center, band, out, e.parallel);
}

DiffStats abs_diff_stats_serial(const DepthPlane& a, const DepthPlane& b) {
  DiffStats s;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != kInvalidDepth && b[i] != kInvalidDepth) {
      s.abs_sum += u64(std::abs(int(a[i]) - int(b[i])));
      ++s.count;
    }
  }
  return s;
}

DiffStats abs_diff_stats_omp(const DepthPlane& a, const DepthPlane& b) {
  u64 sum = 0, count = 0;
  const i64 n = i64(a.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : sum, count)
#endif
  for (i64 i = 0; i < n; ++i) {
    if (a[i] != kInvalidDepth && b[i] != kInvalidDepth) {
      sum += u64(std::abs(int(a[i]) - int(b[i])));
      ++count;
    }
  }
  return {sum, count};
}

DiffStats abs_diff_stats(const DepthPlane& a, const DepthPlane& b, Exec e) {
  return e.parallel ? abs_diff_stats_omp(a, b) : abs_diff_stats_serial(a, b);
}

u64 luma_numerator_serial(const ColorFrame& c) {
  u64 acc = 0;
  const size_t n = size_t(c.w) * c.h;
  const u8* r = c.plane(0);
  const u8* g = c.plane(1);
  const u8* b = c.plane(2);
  for (size_t i = 0; i < n; ++i)
    acc += 299u * r[i] + 587u * g[i] + 114u * b[i];
  return acc;
}

u64 luma_numerator_omp(const ColorFrame& c) {
  u64 acc = 0;
  const i64 n = i64(c.w) * c.h;
  const u8* r = c.plane(0);
  const u8* g = c.plane(1);
  const u8* b = c.plane(2);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : acc)
#endif
  for (i64 i = 0; i < n; ++i)
    acc += 299u * r[i] + 587u * g[i] + 114u * b[i];
  return acc;
}

u64 luma_numerator(const ColorFrame& c, Exec e) {
  return e.parallel ? luma_numerator_omp(c) : luma_numerator_serial(c);
}

int label_blobs(const Mask& m, const DepthPlane& depth, Plane<i32>& labels,
                std::vector<Blob>& blobs) {
  const int w = m.width(), h = m.height();
  labels.resize(w, h, -1);
  std::vector<i32> parent;
  parent.reserve(64);
  auto find = [&](i32 a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };

  for (int y = 0; y < h; ++y) {
    const u8* row = m.row(y);
    for (int x = 0; x < w; ++x) {
      if (!row[x]) continue;
      i32 best = -1;
      auto consider = [&](int xx, int yy) {
        if (xx < 0 || xx >= w || yy < 0) return;
        i32 l = labels.at(xx, yy);
        if (l < 0) return;
        l = find(l);
        if (best < 0) {
          best = l;
        } else if (l != best) {
          i32 lo = std::min(best, l), hi = std::max(best, l);
          parent[hi] = lo;
          best = lo;
        }
      };
      consider(x - 1, y);
      consider(x - 1, y - 1);
      consider(x, y - 1);
      consider(x + 1, y - 1);
      if (best < 0) {
        best = i32(parent.size());
        parent.push_back(best);
      }
      labels.at(x, y) = best;
    }
  }

  std::vector<i32> dense(parent.size(), -1);
  blobs.clear();
  struct Acc {
    int x0, y0, x1, y1;
    i64 area = 0;
    u64 dsum = 0, dssq = 0;
    i64 dcnt = 0;
  };
  std::vector<Acc> accs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      i32 l = labels.at(x, y);
      if (l < 0) continue;
      l = find(l);
      i32 id = dense[l];
      if (id < 0) {
        id = i32(accs.size());
        dense[l] = id;
        accs.push_back({x, y, x, y, 0, 0, 0, 0});
      }
      labels.at(x, y) = id;
      Acc& a = accs[id];
      a.x0 = std::min(a.x0, x);
      a.y0 = std::min(a.y0, y);
      a.x1 = std::max(a.x1, x);
      a.y1 = std::max(a.y1, y);
      ++a.area;
      u16 d = depth.at(x, y);
      if (d != kInvalidDepth) {
        a.dsum += d;
        a.dssq += u64(d) * u64(d);
        ++a.dcnt;
      }
    }
  }

  blobs.resize(accs.size());
  for (size_t i = 0; i < accs.size(); ++i) {
    const Acc& a = accs[i];
    Blob& b = blobs[i];
    b.bbox = {a.x0, a.y0, a.x1 - a.x0 + 1, a.y1 - a.y0 + 1};
    b.area = a.area;
    if (a.dcnt > 0) {
      double mean = double(a.dsum) / double(a.dcnt);
      double var = double(a.dssq) / double(a.dcnt) - mean * mean;
      b.mean_depth_mm = mean;
      b.depth_stddev_mm = std::sqrt(std::max(0.0, var));
    }
  }
  return int(blobs.size());
}

void filter_blobs_by_area(Mask& m, Plane<i32>& labels, std::vector<Blob>& blobs,
                          i64 min_area) {
  std::vector<i32> remap(blobs.size(), -1);
  std::vector<Blob> kept;
  for (size_t i = 0; i < blobs.size(); ++i) {
    if (blobs[i].area >= min_area) {
      remap[i] = i32(kept.size());
      kept.push_back(blobs[i]);
    }
  }
  if (kept.size() == blobs.size()) return;
  for (size_t i = 0; i < labels.size(); ++i) {
    i32 l = labels[i];
    if (l < 0) continue;
    i32 r = remap[l];
    labels[i] = r;
    if (r < 0) m[i] = 0;
  }
  blobs = std::move(kept);
}

}  // namespace imon::kern
