#pragma once

#include <filesystem>
#include <string>

#include "imon/core.hpp"

namespace imon {

// Thrown for invalid configuration (bad value, unknown key). CLI exit code 2.
struct ConfigError : DataError {
  using DataError::DataError;
};

struct PipelineConfig {
  // Background model
  int n_history = 10;          // depth frames kept in the model
  double rho = -6.907;         // log-likelihood foreground threshold (log 0.001)
  double alpha = 0.05;         // background update rate
  double sigma_floor_mm = 1.0; // lower bound for the model sigma
  int min_blob_area = 100;     // at 640x480; scaled by W*H/(640*480)
  int median_kernel = 5;       // depth median filter size (odd)

  // Motion detection
  int theta = 20;              // per-channel frame-difference threshold
  int min_motion_pixels = 4;   // frame counts as motion at/above this

  // Misdetection suppression
  double box_margin = 0.10;        // bbox enlargement, fraction of image width
  double band_k = 2.8;             // depth band half-width in sigma_f units
  double sigma_f_floor_mm = 5.0;   // lower bound for blob sigma_f
  double vote_threshold = 0.80;    // not-human fraction that triggers a purge
  double vote_window_s = 60.0;     // vote window span
  double detector_period_s = 10.0; // detector cadence when no pet is around

  // min_blob_area scaled to the sequence resolution, minimum 1.
  i64 scaled_min_blob_area(int width, int height) const;

  void validate() const;  // throws ConfigError
};

// JSON object of known keys; unknown keys are rejected. Missing keys keep
// their defaults.
PipelineConfig load_config(const std::filesystem::path& file);

// Applies one "key=value" override (CLI --set).
void apply_override(PipelineConfig& cfg, const std::string& assignment);

std::string config_to_json(const PipelineConfig& cfg);

}  // namespace imon
