#pragma once

#include <array>
#include <vector>

#include "imon/core.hpp"
#include "imon/tracker.hpp"

namespace imon {

// How the Max25%/Min25% columns are computed: means of the largest/smallest
// ceil(count/4) values (default), or plain 75th/25th percentiles with linear
// interpolation.
enum class TailMode { QuartileMean, Percentile };

struct SummaryStats {
  double median_s = 0.0;
  double max25_s = 0.0;
  double min25_s = 0.0;
  size_t count = 0;
};

// Median is the middle order statistic (mean of the two middles for even
// counts). Throws DataError on empty input.
SummaryStats summarize(std::vector<double> durations,
                       TailMode mode = TailMode::QuartileMean);

// Duration-range buckets, closed-open, seconds.
inline constexpr std::array<double, 8> kBucketEdges = {1, 2, 5, 10, 30, 60,
                                                       200, 500};  // last: inf
std::array<double, 8> histogram(const std::vector<double>& durations);

struct ExponentialFit {
  double lambda = 0.0;  // 1/s
  double mean_s = 0.0;  // 1/lambda
};

// Maximum-likelihood fit: lambda = 1/mean, exactly.
ExponentialFit fit_exponential(const std::vector<double>& durations);

// Events bucketed by local hour of start_ms. Timestamps are interpreted as ms
// since local midnight; day_origin_ms shifts them (e.g. a sequence recorded
// from 10:00 passes 10*3600*1000). Empty hours report count 0.
std::array<SummaryStats, 24> hourly_profile(
    const std::vector<InactivityEvent>& events, i64 day_origin_ms = 0,
    TailMode mode = TailMode::QuartileMean);

}  // namespace imon
