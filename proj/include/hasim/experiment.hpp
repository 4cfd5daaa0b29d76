#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hasim/abr.hpp"
#include "hasim/metrics.hpp"
#include "hasim/trace.hpp"

namespace hasim {

struct TraceSpec {
  std::string label;
  std::string path;
  TraceFormat format = TraceFormat::kCsvRate;
};

struct AlgorithmSpec {
  std::string id;
  ParamMap params;
};

struct LadderSpec {
  std::string mode = "default";  // default | quantiles | explicit
  std::vector<double> quantiles;
  std::string quantile_profile;  // label feeding the CDF; first profile if empty
  std::vector<int64_t> rates_bps;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::vector<TraceSpec> traces;
  LadderSpec ladder;
  double segment_duration_s = 4.0;
  std::vector<double> buffer_sizes_s = {16, 92};
  int omega = 2;
  std::vector<AlgorithmSpec> algorithms;  // defaults to the five of the study
  uint64_t master_seed = 1;
  double vbr_cv = 0.2;
  std::vector<int64_t> k_total_choices = {149, 864, 1455};
  double session_end_s = -1;
  std::string map_cache_dir;  // resolved relative to the config file
};

// Reads the config and its trace manifests; trace files are checked for
// existence here so a broken setup fails before any session runs.
ExperimentConfig load_config(const std::string& path);

struct MatrixSummary {
  int cells = 0;
  int sessions = 0;
  int flagged = 0;
};

// Runs profile x buffer x algorithm over all traces and writes sessions.csv,
// aggregates.csv, bundle.json and per-session logs under out_dir. Outputs
// are byte-identical across reruns of the same config.
MatrixSummary run_matrix(const ExperimentConfig& config,
                         const std::string& out_dir);

// Reads bundle.json from bundle_dir and writes one plot-ready CSV per metric
// into out_dir.
void emit_plot_data(const std::string& bundle_dir, const std::string& out_dir);

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_pass() const;
};

// Replays the controlled square-wave profile with a buffer-based, a
// smoothed-rate and a probe-window algorithm, writes per-second traces plus
// validation_report.json into out_dir, and checks the expected signatures.
ValidationReport validate_controlled(const std::string& out_dir);

void write_validation_report(const ValidationReport& report, std::ostream& out);
ValidationReport parse_validation_report(std::istream& in);

}  // namespace hasim
