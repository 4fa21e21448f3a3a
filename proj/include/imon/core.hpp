#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace imon {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i32 = std::int32_t;
using i64 = std::int64_t;

// Depth value 0 marks an invalid measurement (sensor dropout, out of range).
inline constexpr u16 kInvalidDepth = 0;

// Thrown for malformed input data (containers, configs, scripts, JSONL).
// The CLI maps it to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  i64 area() const { return w <= 0 || h <= 0 ? 0 : i64(w) * i64(h); }
  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int px, int py) const {
    return px >= x && px < right() && py >= y && py < bottom();
  }

  Rect clipped(int width, int height) const {
    int x0 = std::max(x, 0), y0 = std::max(y, 0);
    int x1 = std::min(right(), width), y1 = std::min(bottom(), height);
    return {x0, y0, x1 - x0, y1 - y0};
  }

  // Symmetric margin on all four sides.
  Rect inflated(int margin) const {
    return {x - margin, y - margin, w + 2 * margin, h + 2 * margin};
  }

  bool operator==(const Rect&) const = default;
};

inline Rect rect_intersection(const Rect& a, const Rect& b) {
  int x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  int x1 = std::min(a.right(), b.right()), y1 = std::min(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

inline double rect_iou(const Rect& a, const Rect& b) {
  i64 inter = rect_intersection(a, b).area();
  if (inter <= 0) return 0.0;
  i64 uni = a.area() + b.area() - inter;
  return uni > 0 ? double(inter) / double(uni) : 0.0;
}

// Row-major single-channel image plane.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int w, int h, T fill = T{}) : w_(w), h_(h), data_(size_t(w) * h, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }
  size_t size() const { return data_.size(); }
  bool same_shape(int w, int h) const { return w_ == w && h_ == h; }

  T* row(int y) { return data_.data() + size_t(y) * w_; }
  const T* row(int y) const { return data_.data() + size_t(y) * w_; }
  T& at(int x, int y) { return data_[size_t(y) * w_ + x]; }
  const T& at(int x, int y) const { return data_[size_t(y) * w_ + x]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void resize(int w, int h, T fill = T{}) {
    w_ = w;
    h_ = h;
    data_.assign(size_t(w) * h, fill);
  }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Plane&) const = default;

 private:
  int w_ = 0, h_ = 0;
  std::vector<T> data_;
};

using DepthPlane = Plane<u16>;
// Binary masks use 0/1 per pixel; u8 keeps the kernels branch-light.
using Mask = Plane<u8>;

// Planar RGB frame: R plane, then G, then B, each width*height bytes.
struct ColorFrame {
  int w = 0, h = 0;
  std::vector<u8> data;  // 3 * w * h

  ColorFrame() = default;
  ColorFrame(int width, int height, u8 fill = 0)
      : w(width), h(height), data(size_t(3) * width * height, fill) {}

  u8* plane(int c) { return data.data() + size_t(c) * w * h; }
  const u8* plane(int c) const { return data.data() + size_t(c) * w * h; }
  u8& at(int c, int x, int y) { return data[size_t(c) * w * h + size_t(y) * w + x]; }
  u8 at(int c, int x, int y) const { return data[size_t(c) * w * h + size_t(y) * w + x]; }

  bool operator==(const ColorFrame&) const = default;
};

struct RgbdFrame {
  int index = 0;
  i64 timestamp_ms = 0;
  ColorFrame color;
  DepthPlane depth;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

inline u64 mask_count(const Mask& m) {
  u64 n = 0;
  for (size_t i = 0; i < m.size(); ++i) n += m[i];
  return n;
}

// Connected foreground component with depth statistics used by the
// misdetection-suppression stage.
struct Blob {
  Rect bbox;
  i64 area = 0;               // pixel count
  double mean_depth_mm = 0;   // over valid-depth pixels
  double depth_stddev_mm = 0; // population stddev over valid-depth pixels
  int track_id = -1;
};

struct ForegroundMask {
  int frame_index = -1;
  Mask bits;
  std::vector<Blob> blobs;

  bool empty() const { return blobs.empty(); }
};

}  // namespace imon
