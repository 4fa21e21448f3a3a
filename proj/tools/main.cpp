#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imon/analytics.hpp"
#include "imon/pipeline.hpp"
#include "imon/score.hpp"
#include "imon/synth.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace imon;

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw DataError("short write to " + path.string());
}

struct RunArgs {
  std::string seq, config, detections, process, stub_labels;
  std::string out, report, frames, pid;
  std::vector<std::string> sets;
  bool no_pet_exclusion = false;
  bool fsync = false;
  int threads = 1;
};

int cmd_run(const RunArgs& a) {
  int backends = 0;
  for (const auto& s : {a.detections, a.process, a.stub_labels})
    if (!s.empty()) ++backends;
  if (backends > 1) {
    std::cerr << "run: use at most one of --detections, --process, "
                 "--stub-labels\n";
    return 1;
  }

  PipelineConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  for (const auto& kv : a.sets) apply_override(cfg, kv);
  cfg.validate();

#ifdef _OPENMP
  if (a.threads > 1) omp_set_num_threads(a.threads);
#endif

  RunOptions opt;
  opt.cfg = cfg;
  opt.pet_exclusion = !a.no_pet_exclusion;
  opt.parallel = a.threads > 1;
  opt.pid_override = a.pid;

  SequenceReader src(a.seq);

  std::unique_ptr<DetectorBackend> backend;
  if (!a.detections.empty())
    backend = std::make_unique<FileBackend>(a.detections);
  else if (!a.stub_labels.empty())
    backend = std::make_unique<StubBackend>(load_labels(a.stub_labels));
  else if (!a.process.empty()) {
    auto tmp = std::filesystem::temp_directory_path() /
               ("inactmon-" + std::to_string(::getpid()));
    std::filesystem::create_directories(tmp);
    backend = std::make_unique<ProcessBackend>(a.process, tmp);
  }

  std::optional<EventLog> log;
  if (!a.out.empty()) log.emplace(a.out, a.fsync);

  RunOutput res = run_pipeline(src, opt, std::move(backend),
                               log ? &*log : nullptr);

  if (!a.frames.empty()) save_frames(res.states, a.frames);
  if (!a.report.empty())
    write_text_file(a.report, report_to_json(res.report) + "\n");

  for (const auto& w : res.report.warnings)
    std::cerr << "warning: " << w << "\n";
  std::printf("frames=%d events=%d fps=%.2f\n", res.report.frames,
              res.report.events, res.report.fps);
  return 0;
}

struct SynthArgs {
  std::string script, out;
};

int cmd_synth(const SynthArgs& a) {
  SceneScript script = load_script(a.script);
  generate_to_dir(script, a.out);
  std::printf("rendered %d frames at %dx%d into %s\n", script.frame_count(),
              script.width, script.height, a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string pred, frames, gt, out;
  std::string tolerance = "0,1,3,5";
};

std::vector<int> parse_tolerances(const std::string& s) {
  std::vector<int> ks;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) {
        size_t pos = 0;
        int k = 0;
        try {
          k = std::stoi(cur, &pos);
        } catch (const std::exception&) {
          throw DataError("bad tolerance list: " + s);
        }
        if (pos != cur.size() || k < 0)
          throw DataError("bad tolerance list: " + s);
        ks.push_back(k);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (ks.empty()) throw DataError("empty tolerance list");
  return ks;
}

int cmd_eval(const EvalArgs& a) {
  const GroundTruth gt = load_labels(a.gt);
  const auto states = load_frames(a.frames);
  const auto events = read_events(a.pred);
  const auto ks = parse_tolerances(a.tolerance);

  nlohmann::ordered_json j;
  j["frames"] = states.size();
  j["tolerances"] = nlohmann::json::array();
  std::printf("  k     HuFP(1e-2)  HuFN(1e-2)  MoFP(1e-3)  MoFN(1e-2)\n");
  for (int k : ks) {
    FrameScores s = score_frames(states, gt, k);
    nlohmann::ordered_json t;
    t["k"] = s.k;
    t["hufp"] = s.hufp;
    t["hufn"] = s.hufn;
    t["mofp"] = s.mofp;
    t["mofn"] = s.mofn;
    t["hufp_count"] = s.hufp_count;
    t["hufn_count"] = s.hufn_count;
    t["mofp_count"] = s.mofp_count;
    t["mofn_count"] = s.mofn_count;
    j["tolerances"].push_back(t);
    std::printf("%3d   %10.4f  %10.4f  %10.4f  %10.4f\n", k, s.hufp * 1e2,
                s.hufn * 1e2, s.mofp * 1e3, s.mofn * 1e2);
  }

  double fps = 0;
  if (states.size() >= 2) {
    const double span_ms =
        double(states.back().ts_ms - states.front().ts_ms);
    if (span_ms > 0) fps = double(states.size() - 1) * 1000.0 / span_ms;
  }
  const int min_frames = std::max(1, int(std::lround(fps)));
  const auto gt_events =
      gt_inactivity_spans(gt, int(states.size()), min_frames);
  const auto pred_events = events_to_spans(events, states);
  const EventAccuracy acc = event_accuracy(pred_events, gt_events);
  j["events"]["predicted"] = pred_events.size();
  j["events"]["ground_truth"] = gt_events.size();
  j["events"]["matched"] = acc.matched;
  j["events"]["misses"] = acc.misses;
  j["events"]["ghosts"] = acc.ghosts;
  j["events"]["mean_abs_offset_frames"] = acc.mean_abs_offset;
  std::printf(
      "events: %d matched, %d misses, %d ghosts, mean |offset| %.2f frames\n",
      acc.matched, acc.misses, acc.ghosts, acc.mean_abs_offset);

  if (!a.out.empty()) write_text_file(a.out, j.dump(2) + "\n");
  return 0;
}

struct StatsArgs {
  std::string events, out, csv;
  std::string mode = "quartile";
  i64 day_origin_ms = 0;
};

int cmd_stats(const StatsArgs& a) {
  const auto events = read_events(a.events);
  if (events.empty()) throw DataError("stats: no events in " + a.events);
  std::vector<double> durations;
  durations.reserve(events.size());
  for (const auto& e : events) durations.push_back(e.dur_s);

  TailMode mode;
  if (a.mode == "quartile")
    mode = TailMode::QuartileMean;
  else if (a.mode == "percentile")
    mode = TailMode::Percentile;
  else
    throw DataError("stats: mode must be quartile or percentile");

  const SummaryStats sum = summarize(durations, mode);
  const auto hist = histogram(durations);
  const ExponentialFit fit = fit_exponential(durations);
  const auto hourly = hourly_profile(events, a.day_origin_ms, mode);

  nlohmann::ordered_json j;
  j["count"] = sum.count;
  j["summary"]["median_s"] = sum.median_s;
  j["summary"]["max25_s"] = sum.max25_s;
  j["summary"]["min25_s"] = sum.min25_s;
  j["summary"]["mode"] =
      mode == TailMode::QuartileMean ? "quartile-mean" : "percentile";
  j["fit"]["lambda"] = fit.lambda;
  j["fit"]["mean_s"] = fit.mean_s;

  std::printf("events: %zu\n", sum.count);
  std::printf("median %.2f s, max25%% %.2f s, min25%% %.2f s (%s)\n",
              sum.median_s, sum.max25_s, sum.min25_s,
              j["summary"]["mode"].get<std::string>().c_str());
  std::printf("exponential fit: lambda %.6f 1/s (mean %.2f s)\n", fit.lambda,
              fit.mean_s);

  j["histogram"] = nlohmann::json::array();
  std::string csv =
      "bucket_lo_s,bucket_hi_s,observed_pct,observed_cum_pct,model_pct,"
      "model_cum_pct\n";
  double cum = 0, model_cum = 0;
  std::printf("%12s %10s %8s\n", "bucket (s)", "pct", "cum");
  for (size_t b = 0; b < hist.size(); ++b) {
    const double lo = kBucketEdges[b];
    const bool last = b + 1 == hist.size();
    const double hi = last ? 0 : kBucketEdges[b + 1];
    cum += hist[b];
    const double model =
        100.0 * (std::exp(-fit.lambda * lo) -
                 (last ? 0.0 : std::exp(-fit.lambda * hi)));
    model_cum += model;
    nlohmann::ordered_json row;
    row["lo_s"] = lo;
    if (!last) row["hi_s"] = hi;
    row["pct"] = hist[b];
    row["cum_pct"] = cum;
    j["histogram"].push_back(row);
    char line[160];
    if (last) {
      std::snprintf(line, sizeof line, "%.0f,inf,%.6f,%.6f,%.6f,%.6f\n", lo,
                    hist[b], cum, model, model_cum);
      std::printf("%7.0f-inf  %9.2f%% %7.2f%%\n", lo, hist[b], cum);
    } else {
      std::snprintf(line, sizeof line, "%.0f,%.0f,%.6f,%.6f,%.6f,%.6f\n", lo,
                    hi, hist[b], cum, model, model_cum);
      std::printf("%6.0f-%-5.0f %9.2f%% %7.2f%%\n", lo, hi, hist[b], cum);
    }
    csv += line;
  }

  j["hourly"] = nlohmann::json::array();
  for (int h = 0; h < 24; ++h) {
    const auto& s = hourly[size_t(h)];
    nlohmann::ordered_json row;
    row["hour"] = h;
    row["count"] = s.count;
    if (s.count > 0) {
      row["median_s"] = s.median_s;
      row["max25_s"] = s.max25_s;
      row["min25_s"] = s.min25_s;
      std::printf("hour %02d: %zu events, median %.2f s\n", h, s.count,
                  s.median_s);
    }
    j["hourly"].push_back(row);
  }

  if (!a.out.empty()) write_text_file(a.out, j.dump(2) + "\n");
  if (!a.csv.empty()) write_text_file(a.csv, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anonymous RGB-D inactivity monitor"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand(
      "run", "process a sequence directory into an event log");
  run_cmd->add_option("--seq", run.seq, "sequence directory")->required();
  run_cmd->add_option("--config", run.config, "pipeline config file (JSON)");
  run_cmd->add_option("--set", run.sets, "config override key=value");
  run_cmd->add_option("--detections", run.detections,
                      "precomputed detections.jsonl backend");
  run_cmd->add_option("--process", run.process,
                      "external detector command (DETECT/END protocol)");
  run_cmd->add_option("--stub-labels", run.stub_labels,
                      "labels.jsonl used as an oracle detector");
  run_cmd->add_option("--out", run.out, "events.jsonl output");
  run_cmd->add_option("--report", run.report, "report.json output");
  run_cmd->add_option("--frames", run.frames, "frames.jsonl output");
  run_cmd->add_option("--pid", run.pid, "participant id override");
  run_cmd->add_option("--threads", run.threads, "worker threads (OpenMP)")
      ->check(CLI::Range(1, 64));
  run_cmd->add_flag("--no-pet-exclusion", run.no_pet_exclusion,
                    "keep pet regions in the foreground");
  run_cmd->add_flag("--fsync", run.fsync, "fsync the event log per line");

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "render a scripted synthetic sequence");
  synth_cmd->add_option("--script", synth.script, "scene script JSON")
      ->required();
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  EvalArgs eval;
  auto* eval_cmd =
      app.add_subcommand("eval", "score a run against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "events.jsonl from run")
      ->required();
  eval_cmd->add_option("--frames", eval.frames, "frames.jsonl from run")
      ->required();
  eval_cmd->add_option("--gt", eval.gt, "labels.jsonl ground truth")
      ->required();
  eval_cmd->add_option("--tolerance", eval.tolerance,
                       "comma-separated frame tolerances");
  eval_cmd->add_option("--out", eval.out, "scores.json output");

  StatsArgs stats;
  auto* stats_cmd =
      app.add_subcommand("stats", "behavior statistics from an event log");
  stats_cmd->add_option("--events", stats.events, "events.jsonl")->required();
  stats_cmd->add_option("--out", stats.out, "stats.json output");
  stats_cmd->add_option("--csv", stats.csv, "plot-ready distribution CSV");
  stats_cmd->add_option("--mode", stats.mode,
                        "tail statistic: quartile | percentile");
  stats_cmd->add_option("--day-origin-ms", stats.day_origin_ms,
                        "wall-clock ms at sequence start for hourly buckets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run);
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (stats_cmd->parsed()) return cmd_stats(stats);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
