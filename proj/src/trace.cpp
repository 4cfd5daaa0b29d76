#include "hasim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace hasim {

std::string to_string(ProfileClass c) {
  switch (c) {
    case ProfileClass::kControlled: return "controlled";
    case ProfileClass::kNormal: return "normal";
    case ProfileClass::kChallenging: return "challenging";
    case ProfileClass::kCustom: return "custom";
  }
  return "custom";
}

ProfileClass profile_class_from_string(const std::string& s) {
  if (s == "controlled") return ProfileClass::kControlled;
  if (s == "normal") return ProfileClass::kNormal;
  if (s == "challenging") return ProfileClass::kChallenging;
  if (s == "custom") return ProfileClass::kCustom;
  throw std::invalid_argument("unknown profile class: " + s);
}

TraceFormat trace_format_from_string(const std::string& s) {
  if (s == "csv-rate") return TraceFormat::kCsvRate;
  if (s == "csv-bytes") return TraceFormat::kCsvBytes;
  throw std::invalid_argument("unknown trace format: " + s);
}

ParseError::ParseError(const std::string& message, int line)
    : std::runtime_error("line " + std::to_string(line) + ": " + message),
      line_(line) {}

ThroughputTrace::ThroughputTrace(std::vector<TraceSample> samples,
                                 ProfileClass label)
    : samples_(std::move(samples)), label_(label) {
  if (samples_.empty()) throw EmptyTraceError();
  if (samples_.front().time_s != 0.0)
    throw std::invalid_argument("trace must start at t=0");
  for (size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.time_s) || !std::isfinite(s.throughput_bps))
      throw std::invalid_argument("non-finite trace sample");
    if (s.throughput_bps < 0)
      throw std::invalid_argument("negative throughput in trace");
    if (i > 0 && !(s.time_s > samples_[i - 1].time_s))
      throw std::invalid_argument("trace timestamps must be strictly increasing");
  }
}

namespace {

// Index of the piece that covers time t (last sample with time <= t).
size_t piece_index(const std::vector<TraceSample>& samples, double t) {
  auto it = std::upper_bound(
      samples.begin(), samples.end(), t,
      [](double value, const TraceSample& s) { return value < s.time_s; });
  if (it == samples.begin()) return 0;
  return static_cast<size_t>(it - samples.begin()) - 1;
}

}  // namespace

double ThroughputTrace::value_at(double t) const {
  return samples_[piece_index(samples_, t)].throughput_bps;
}

double ThroughputTrace::integrate(double t0, double t1) const {
  if (!(t0 <= t1)) throw std::invalid_argument("integrate: t0 must be <= t1");
  double bits = 0;
  double t = t0;
  size_t idx = piece_index(samples_, t0);
  while (t < t1) {
    double next = idx + 1 < samples_.size()
                      ? samples_[idx + 1].time_s
                      : std::numeric_limits<double>::infinity();
    double end = std::min(next, t1);
    bits += samples_[idx].throughput_bps * (end - t);
    t = end;
    ++idx;
  }
  return bits;
}

double ThroughputTrace::avg_throughput(double t0, double t1) const {
  if (!(t0 >= 0 && t0 < t1 && t1 <= duration_s()))
    throw std::out_of_range("avg_throughput: need 0 <= t0 < t1 <= duration");
  return integrate(t0, t1) / (t1 - t0);
}

std::optional<double> ThroughputTrace::download_time(double start_s,
                                                     double size_bits) const {
  if (!(size_bits > 0)) throw std::invalid_argument("size_bits must be > 0");
  if (!(start_s >= 0)) throw std::invalid_argument("start_s must be >= 0");
  double remaining = size_bits;
  double t = start_s;
  size_t idx = piece_index(samples_, start_s);
  for (;;) {
    double v = samples_[idx].throughput_bps;
    bool last = idx + 1 >= samples_.size();
    double next = last ? std::numeric_limits<double>::infinity()
                       : samples_[idx + 1].time_s;
    if (v > 0) {
      double need = remaining / v;
      if (t + need <= next) return t + need - start_s;
      remaining -= v * (next - t);
      if (remaining <= 0) return next - start_s;
    } else if (last) {
      return std::nullopt;
    }
    t = next;
    ++idx;
  }
}

namespace {

struct Row {
  double a = 0;
  double b = 0;
  int line = 0;
};

bool parse_number(const std::string& field, double* out) {
  size_t begin = field.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return false;
  size_t end = field.find_last_not_of(" \t\r") + 1;
  const char* first = field.data() + begin;
  const char* last = field.data() + end;
  auto res = std::from_chars(first, last, *out);
  return res.ec == std::errc() && res.ptr == last;
}

std::vector<Row> read_rows(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  int lineno = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    size_t content = line.find_first_not_of(" \t\r");
    if (content == std::string::npos || line[content] == '#') continue;
    size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("expected two comma-separated fields", lineno);
    Row row{0, 0, lineno};
    bool ok = parse_number(line.substr(0, comma), &row.a) &&
              parse_number(line.substr(comma + 1), &row.b);
    if (!ok) {
      if (!saw_data) continue;  // header line
      throw ParseError("malformed numeric field", lineno);
    }
    saw_data = true;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ThroughputTrace parse_trace(std::istream& in, TraceFormat format,
                            ProfileClass label) {
  std::vector<Row> rows = read_rows(in);
  if (rows.empty()) throw EmptyTraceError();
  std::vector<TraceSample> samples;
  samples.reserve(rows.size() + 1);
  if (format == TraceFormat::kCsvRate) {
    if (rows.front().a != 0.0)
      throw OrderingError("rate trace must start at t=0", rows.front().line);
    for (size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      if (r.b < 0 || !std::isfinite(r.b))
        throw ParseError("throughput must be finite and >= 0", r.line);
      if (i > 0 && !(r.a > rows[i - 1].a))
        throw OrderingError("timestamps must be strictly increasing", r.line);
      samples.push_back({r.a, r.b});
    }
  } else {
    double prev_t = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      if (r.b < 0 || !std::isfinite(r.b))
        throw ParseError("byte count must be finite and >= 0", r.line);
      if (!(r.a > prev_t))
        throw OrderingError(i == 0 ? "first interval must end after t=0"
                                   : "timestamps must be strictly increasing",
                            r.line);
      double rate = 8.0 * r.b / (r.a - prev_t);
      samples.push_back({prev_t, rate});
      prev_t = r.a;
    }
    samples.push_back({prev_t, samples.back().throughput_bps});
  }
  return ThroughputTrace(std::move(samples), label);
}

ThroughputTrace load_trace(const std::string& path, TraceFormat format,
                           ProfileClass label) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  try {
    return parse_trace(in, format, label);
  } catch (const EmptyTraceError&) {
    throw std::runtime_error("trace file has no samples: " + path);
  }
}

void serialize_trace(const ThroughputTrace& trace, std::ostream& out) {
  char buf[64];
  for (const auto& s : trace.samples()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", s.time_s,
                  s.throughput_bps);
    out << buf;
  }
}

ThroughputTrace synth_controlled(double high_bps, double low_bps,
                                 double phase_length_s, double total_s) {
  if (!(high_bps > low_bps && low_bps > 0))
    throw std::invalid_argument("need high > low > 0");
  if (!(phase_length_s > 0 && total_s > 0))
    throw std::invalid_argument("need positive phase length and total");
  std::vector<TraceSample> samples;
  double t = 0;
  bool high = true;
  while (t < total_s) {
    samples.push_back({t, high ? high_bps : low_bps});
    t += phase_length_s;
    high = !high;
  }
  samples.push_back({total_s, samples.back().throughput_bps});
  return ThroughputTrace(std::move(samples), ProfileClass::kControlled);
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values,
                           std::vector<double> weights) {
  if (values.size() != weights.size())
    throw std::invalid_argument("values and weights must have equal length");
  if (values.empty()) throw std::invalid_argument("empty distribution");
  double total = 0;
  for (double w : weights) {
    if (w < 0 || !std::isfinite(w))
      throw std::invalid_argument("weights must be finite and >= 0");
    total += w;
  }
  std::map<double, double> mass;
  if (total > 0) {
    for (size_t i = 0; i < values.size(); ++i)
      if (weights[i] > 0) mass[values[i]] += weights[i];
  } else {
    // Degenerate all-zero weighting: fall back to a uniform point mass.
    for (double v : values) mass[v] += 1.0;
    total = static_cast<double>(values.size());
  }
  double cum = 0;
  for (const auto& [v, w] : mass) {
    cum += w;
    values_.push_back(v);
    cum_probs_.push_back(cum / total);
  }
  cum_probs_.back() = 1.0;
}

double EmpiricalCdf::cdf(double value_bps) const {
  auto it = std::upper_bound(values_.begin(), values_.end(), value_bps);
  if (it == values_.begin()) return 0.0;
  return cum_probs_[static_cast<size_t>(it - values_.begin()) - 1];
}

double EmpiricalCdf::quantile(double q) const {
  if (!(q > 0 && q <= 1)) throw std::invalid_argument("q must be in (0, 1]");
  for (size_t i = 0; i < cum_probs_.size(); ++i)
    if (cum_probs_[i] >= q - 1e-12) return values_[i];
  return values_.back();
}

EmpiricalCdf ecdf(const ThroughputTrace& trace) {
  return ecdf(std::span<const ThroughputTrace>(&trace, 1));
}

EmpiricalCdf ecdf(std::span<const ThroughputTrace> traces) {
  std::vector<double> values;
  std::vector<double> weights;
  for (const auto& trace : traces) {
    const auto& s = trace.samples();
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      values.push_back(s[i].throughput_bps);
      weights.push_back(s[i + 1].time_s - s[i].time_s);
    }
    if (s.size() == 1) {
      values.push_back(s[0].throughput_bps);
      weights.push_back(0);
    }
  }
  return EmpiricalCdf(std::move(values), std::move(weights));
}

}  // namespace hasim
