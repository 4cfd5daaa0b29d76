#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hasim {

enum class ProfileClass { kControlled, kNormal, kChallenging, kCustom };

std::string to_string(ProfileClass c);
ProfileClass profile_class_from_string(const std::string& s);

struct TraceSample {
  double time_s = 0;
  double throughput_bps = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line);
  int line() const { return line_; }

 private:
  int line_;
};

class OrderingError : public ParseError {
 public:
  using ParseError::ParseError;
};

class EmptyTraceError : public std::runtime_error {
 public:
  EmptyTraceError() : std::runtime_error("trace has no samples") {}
};

// Piecewise-constant throughput over time. Each sample's value holds until
// the next timestamp; past the last timestamp the final value holds forever.
class ThroughputTrace {
 public:
  ThroughputTrace(std::vector<TraceSample> samples,
                  ProfileClass label = ProfileClass::kCustom);

  const std::vector<TraceSample>& samples() const { return samples_; }
  ProfileClass label() const { return label_; }
  double duration_s() const { return samples_.back().time_s; }

  double value_at(double t) const;

  // Bits delivered over [t0, t1], hold-extended past the trace end.
  double integrate(double t0, double t1) const;

  // Mean throughput over [t0, t1]; requires 0 <= t0 < t1 <= duration.
  double avg_throughput(double t0, double t1) const;

  // Seconds to deliver size_bits starting at start_s, or nullopt when the
  // held terminal value is zero and the transfer can never finish.
  std::optional<double> download_time(double start_s, double size_bits) const;

 private:
  std::vector<TraceSample> samples_;
  ProfileClass label_;
};

enum class TraceFormat { kCsvRate, kCsvBytes };

TraceFormat trace_format_from_string(const std::string& s);

ThroughputTrace parse_trace(std::istream& in, TraceFormat format,
                            ProfileClass label = ProfileClass::kCustom);
ThroughputTrace load_trace(const std::string& path, TraceFormat format,
                           ProfileClass label = ProfileClass::kCustom);
void serialize_trace(const ThroughputTrace& trace, std::ostream& out);

// Square wave alternating high/low each phase_length_s, starting high.
ThroughputTrace synth_controlled(double high_bps, double low_bps,
                                 double phase_length_s, double total_s);

class EmpiricalCdf {
 public:
  // Pairs of (value, weight); weights need not be normalized.
  EmpiricalCdf(std::vector<double> values, std::vector<double> weights);

  double cdf(double value_bps) const;

  // Smallest value whose CDF reaches q; q must lie in (0, 1].
  double quantile(double q) const;

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& cum_probs() const { return cum_probs_; }

 private:
  std::vector<double> values_;
  std::vector<double> cum_probs_;
};

// Duration-weighted distribution of the trace's throughput values.
EmpiricalCdf ecdf(const ThroughputTrace& trace);
EmpiricalCdf ecdf(std::span<const ThroughputTrace> traces);

}  // namespace hasim
