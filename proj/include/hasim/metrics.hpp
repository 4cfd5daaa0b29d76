#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hasim/engine.hpp"

namespace hasim {

// Per-session quality metrics. Optional fields are genuinely undefined for
// some sessions (no usable capacity samples, no switches, nothing played)
// and are skipped during aggregation rather than coerced to zero.
struct MetricsReport {
  std::optional<double> adaptability;
  int adaptability_excluded = 0;  // segments without a positive capacity mean
  double adaptation_frequency = 0;
  std::optional<double> adaptation_amplitude;
  std::optional<double> rebuffer_duration;
  double rebuffer_frequency = 0;
  int64_t segment_count = 0;
  double played_s = 0;
  bool truncated = false;
  bool flagged = false;
};

// Mean over segments of chosen rate / min(top rate, mean capacity during the
// download); segments with no positive capacity are excluded and counted.
std::optional<double> adaptability(const SessionLog& log,
                                   int* excluded = nullptr);

// Level switches between consecutive segments, per segment.
double adaptation_frequency(const SessionLog& log);

// Mean switch magnitude relative to the top rate; absent with no switches.
std::optional<double> adaptation_amplitude(const SessionLog& log);

// Stall time after the startup phase relative to played time; absent when
// nothing was played.
std::optional<double> rebuffer_duration(const SessionLog& log);

// Stalls after the startup phase, per segment.
double rebuffer_frequency(const SessionLog& log);

MetricsReport compute_metrics(const SessionLog& log);

struct AggregateEntry {
  int n = 0;
  double mean = 0;
  double stderr_ = 0;
  double half_width = 0;  // 1.96 * stderr
  bool has_interval = false;
};

struct AggregateReport {
  AggregateEntry adaptability;
  AggregateEntry adaptation_frequency;
  AggregateEntry adaptation_amplitude;
  AggregateEntry rebuffer_duration;
  AggregateEntry rebuffer_frequency;
};

AggregateEntry aggregate_values(std::span<const double> values);
AggregateReport aggregate(std::span<const MetricsReport> reports);

}  // namespace hasim
