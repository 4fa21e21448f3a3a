#include "imon/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace imon {

namespace {

double mean_of(const double* v, size_t n) {
  return std::accumulate(v, v + n, 0.0) / static_cast<double>(n);
}

// Linear-interpolated percentile of sorted data, p in [0,100].
double percentile(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p / 100.0 * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

SummaryStats summarize(std::vector<double> durations, TailMode mode) {
  if (durations.empty()) throw DataError("summarize: no durations");
  std::sort(durations.begin(), durations.end());
  const size_t n = durations.size();

  SummaryStats s;
  s.count = n;
  s.median_s = (n % 2 == 1)
                   ? durations[n / 2]
                   : 0.5 * (durations[n / 2 - 1] + durations[n / 2]);
  if (mode == TailMode::QuartileMean) {
    const size_t q = (n + 3) / 4;  // ceil(n/4)
    s.min25_s = mean_of(durations.data(), q);
    s.max25_s = mean_of(durations.data() + (n - q), q);
  } else {
    s.min25_s = percentile(durations, 25.0);
    s.max25_s = percentile(durations, 75.0);
  }
  return s;
}

std::array<double, 8> histogram(const std::vector<double>& durations) {
  if (durations.empty()) throw DataError("histogram: no durations");
  std::array<u64, 8> counts{};
  for (double d : durations) {
    if (d < kBucketEdges[0])
      throw DataError("histogram: duration below 1s: " + std::to_string(d));
    size_t b = kBucketEdges.size() - 1;
    while (b > 0 && d < kBucketEdges[b]) --b;
    ++counts[b];
  }
  std::array<double, 8> pct{};
  for (size_t i = 0; i < counts.size(); ++i)
    pct[i] = 100.0 * static_cast<double>(counts[i]) /
             static_cast<double>(durations.size());
  return pct;
}

ExponentialFit fit_exponential(const std::vector<double>& durations) {
  if (durations.empty()) throw DataError("fit_exponential: no durations");
  const double mean =
      mean_of(durations.data(), durations.size());
  if (mean <= 0.0) throw DataError("fit_exponential: mean duration is zero");
  return {1.0 / mean, mean};
}

std::array<SummaryStats, 24> hourly_profile(
    const std::vector<InactivityEvent>& events, i64 day_origin_ms,
    TailMode mode) {
  std::array<std::vector<double>, 24> buckets;
  for (const auto& e : events) {
    i64 wall = e.start_ms + day_origin_ms;
    if (wall < 0) throw DataError("hourly_profile: negative wall time");
    buckets[static_cast<size_t>((wall / 3600000) % 24)].push_back(e.dur_s);
  }
  std::array<SummaryStats, 24> out{};
  for (size_t h = 0; h < 24; ++h)
    if (!buckets[h].empty()) out[h] = summarize(std::move(buckets[h]), mode);
  return out;
}

}  // namespace imon
