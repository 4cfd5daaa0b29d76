#include "hasim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hasim {

namespace {

void check(const SessionLog& log) {
  if (log.ladder_bps.empty())
    throw std::invalid_argument("session log carries no ladder");
  for (const auto& r : log.records)
    if (r.level < 1 || static_cast<size_t>(r.level) > log.ladder_bps.size())
      throw std::invalid_argument("segment level outside the ladder");
}

}  // namespace

std::optional<double> adaptability(const SessionLog& log, int* excluded) {
  check(log);
  double top = static_cast<double>(log.ladder_bps.back());
  double sum = 0;
  int dropped = 0;
  int64_t included = 0;
  for (const auto& r : log.records) {
    double cap = std::min(top, r.avg_throughput_bps);
    if (cap <= 0) {
      ++dropped;
      continue;
    }
    sum += static_cast<double>(
               log.ladder_bps[static_cast<size_t>(r.level) - 1]) /
           cap;
    ++included;
  }
  if (excluded) *excluded = dropped;
  if (included == 0) return std::nullopt;
  return sum / static_cast<double>(included);
}

double adaptation_frequency(const SessionLog& log) {
  check(log);
  int64_t k = log.segment_count();
  if (k == 0) return 0;
  int64_t switches = 0;
  for (size_t i = 1; i < log.records.size(); ++i)
    if (log.records[i].level != log.records[i - 1].level) ++switches;
  return static_cast<double>(switches) / static_cast<double>(k);
}

std::optional<double> adaptation_amplitude(const SessionLog& log) {
  check(log);
  int64_t jump_sum = 0;
  int64_t switches = 0;
  for (size_t i = 1; i < log.records.size(); ++i) {
    int64_t a = log.ladder_bps[static_cast<size_t>(log.records[i].level) - 1];
    int64_t b =
        log.ladder_bps[static_cast<size_t>(log.records[i - 1].level) - 1];
    if (a != b) {
      jump_sum += a > b ? a - b : b - a;
      ++switches;
    }
  }
  if (switches == 0) return std::nullopt;
  return static_cast<double>(jump_sum) /
         static_cast<double>(switches * log.ladder_bps.back());
}

std::optional<double> rebuffer_duration(const SessionLog& log) {
  if (!(log.played_s > 0)) return std::nullopt;
  double total = 0;
  for (const auto& s : log.stalls)
    if (s.segment >= log.omega + 1) total += s.end_s - s.start_s;
  return total / log.played_s;
}

double rebuffer_frequency(const SessionLog& log) {
  int64_t k = log.segment_count();
  if (k == 0) return 0;
  int64_t events = 0;
  for (const auto& s : log.stalls)
    if (s.segment >= log.omega + 1) ++events;
  return static_cast<double>(events) / static_cast<double>(k);
}

MetricsReport compute_metrics(const SessionLog& log) {
  MetricsReport r;
  r.adaptability = adaptability(log, &r.adaptability_excluded);
  r.adaptation_frequency = adaptation_frequency(log);
  r.adaptation_amplitude = adaptation_amplitude(log);
  r.rebuffer_duration = rebuffer_duration(log);
  r.rebuffer_frequency = rebuffer_frequency(log);
  r.segment_count = log.segment_count();
  r.played_s = log.played_s;
  r.truncated = log.truncated;
  r.flagged = log.truncated || r.adaptability_excluded > 0;
  return r;
}

AggregateEntry aggregate_values(std::span<const double> values) {
  AggregateEntry e;
  e.n = static_cast<int>(values.size());
  if (e.n == 0) return e;
  double sum = 0;
  for (double v : values) sum += v;
  e.mean = sum / e.n;
  if (e.n >= 2) {
    double ss = 0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    double var = ss / (e.n - 1);
    e.stderr_ = std::sqrt(var / e.n);
    e.half_width = 1.96 * e.stderr_;
    e.has_interval = true;
  }
  return e;
}

AggregateReport aggregate(std::span<const MetricsReport> reports) {
  std::vector<double> a, af, aa, rd, rf;
  for (const auto& r : reports) {
    if (r.adaptability) a.push_back(*r.adaptability);
    af.push_back(r.adaptation_frequency);
    if (r.adaptation_amplitude) aa.push_back(*r.adaptation_amplitude);
    if (r.rebuffer_duration) rd.push_back(*r.rebuffer_duration);
    rf.push_back(r.rebuffer_frequency);
  }
  AggregateReport out;
  out.adaptability = aggregate_values(a);
  out.adaptation_frequency = aggregate_values(af);
  out.adaptation_amplitude = aggregate_values(aa);
  out.rebuffer_duration = aggregate_values(rd);
  out.rebuffer_frequency = aggregate_values(rf);
  return out;
}

}  // namespace hasim
