#include "imon/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace imon {

using json = nlohmann::ordered_json;

i64 PipelineConfig::scaled_min_blob_area(int width, int height) const {
  double scaled = double(min_blob_area) * width * height / (640.0 * 480.0);
  return std::max<i64>(1, std::llround(scaled));
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (n_history < 1) fail("n_history must be >= 1");
  if (!(rho < 0.0)) fail("rho must be negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must be in [0,1]");
  if (!(sigma_floor_mm > 0.0)) fail("sigma_floor_mm must be positive");
  if (min_blob_area < 1) fail("min_blob_area must be >= 1");
  if (median_kernel < 1 || median_kernel % 2 == 0)
    fail("median_kernel must be odd and >= 1");
  if (theta < 1 || theta > 255) fail("theta must be in [1,255]");
  if (min_motion_pixels < 1) fail("min_motion_pixels must be >= 1");
  if (!(box_margin >= 0.0 && box_margin < 1.0)) fail("box_margin must be in [0,1)");
  if (!(band_k > 0.0)) fail("band_k must be positive");
  if (!(sigma_f_floor_mm > 0.0)) fail("sigma_f_floor_mm must be positive");
  if (!(vote_threshold > 0.0 && vote_threshold <= 1.0))
    fail("vote_threshold must be in (0,1]");
  if (!(vote_window_s > 0.0)) fail("vote_window_s must be positive");
  if (!(detector_period_s > 0.0)) fail("detector_period_s must be positive");
  if (detector_period_s > vote_window_s)
    fail("detector_period_s must not exceed vote_window_s");
}

namespace {

void set_key(PipelineConfig& cfg, const std::string& key, const json& v) {
  try {
    if (key == "n_history")
      cfg.n_history = v.get<int>();
    else if (key == "rho")
      cfg.rho = v.get<double>();
    else if (key == "alpha")
      cfg.alpha = v.get<double>();
    else if (key == "sigma_floor_mm")
      cfg.sigma_floor_mm = v.get<double>();
    else if (key == "min_blob_area")
      cfg.min_blob_area = v.get<int>();
    else if (key == "median_kernel")
      cfg.median_kernel = v.get<int>();
    else if (key == "theta")
      cfg.theta = v.get<int>();
    else if (key == "min_motion_pixels")
      cfg.min_motion_pixels = v.get<int>();
    else if (key == "box_margin")
      cfg.box_margin = v.get<double>();
    else if (key == "band_k")
      cfg.band_k = v.get<double>();
    else if (key == "sigma_f_floor_mm")
      cfg.sigma_f_floor_mm = v.get<double>();
    else if (key == "vote_threshold")
      cfg.vote_threshold = v.get<double>();
    else if (key == "vote_window_s")
      cfg.vote_window_s = v.get<double>();
    else if (key == "detector_period_s")
      cfg.detector_period_s = v.get<double>();
    else
      throw ConfigError("config: unknown key '" + key + "'");
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) set_key(cfg, it.key(), it.value());
  cfg.validate();
  return cfg;
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must be key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    throw ConfigError("override value is not a number: " + assignment);
  }
  set_key(cfg, key, v);
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j{{"n_history", cfg.n_history},
         {"rho", cfg.rho},
         {"alpha", cfg.alpha},
         {"sigma_floor_mm", cfg.sigma_floor_mm},
         {"min_blob_area", cfg.min_blob_area},
         {"median_kernel", cfg.median_kernel},
         {"theta", cfg.theta},
         {"min_motion_pixels", cfg.min_motion_pixels},
         {"box_margin", cfg.box_margin},
         {"band_k", cfg.band_k},
         {"sigma_f_floor_mm", cfg.sigma_f_floor_mm},
         {"vote_threshold", cfg.vote_threshold},
         {"vote_window_s", cfg.vote_window_s},
         {"detector_period_s", cfg.detector_period_s}};
  return j.dump(2);
}

}  // namespace imon
