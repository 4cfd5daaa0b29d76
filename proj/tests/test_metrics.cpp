#include <doctest.h>

#include <cmath>
#include <vector>

#include "hasim/metrics.hpp"

using namespace hasim;

namespace {

SessionLog make_log(const std::vector<int>& levels,
                    const std::vector<double>& cbars,
                    const std::vector<StallEvent>& stalls, double played_s,
                    int omega = 2) {
  SessionLog log;
  log.ladder_bps = {1000000, 2000000, 4000000};
  log.tau_s = 4;
  log.omega = omega;
  log.b_max_s = 16;
  log.playback_started = played_s > 0;
  log.played_s = played_s;
  for (size_t i = 0; i < levels.size(); ++i) {
    SegmentRecord r;
    r.index = static_cast<int64_t>(i) + 1;
    r.level = levels[i];
    r.avg_throughput_bps = cbars[i];
    log.records.push_back(r);
  }
  log.stalls = stalls;
  for (const auto& s : log.stalls)
    if (s.segment >= 1 && s.segment <= log.segment_count())
      log.records[static_cast<size_t>(s.segment) - 1].stalled = true;
  log.initial_buffering_s = 1;
  log.close_s = 1 + played_s;
  for (const auto& s : log.stalls) log.close_s += s.end_s - s.start_s;
  return log;
}

}  // namespace

TEST_CASE("worked example covers all five metrics") {
  // Levels 1,2,2,1 over capacities 2, 8, 1, 2 Mb/s; top rate 4 Mb/s.
  SessionLog log = make_log({1, 2, 2, 1}, {2e6, 8e6, 1e6, 2e6},
                            {{10, 12, 3}}, 16.0);
  MetricsReport m = compute_metrics(log);
  // Terms: 0.5, 0.5, 2.0, 0.5 -> mean 0.875.
  REQUIRE(m.adaptability.has_value());
  CHECK(*m.adaptability == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(m.adaptability_excluded == 0);
  CHECK(m.adaptation_frequency == doctest::Approx(0.5).epsilon(1e-12));
  // Two switches of 1 Mb/s each against a 4 Mb/s top rate.
  REQUIRE(m.adaptation_amplitude.has_value());
  CHECK(*m.adaptation_amplitude == doctest::Approx(0.25).epsilon(1e-12));
  // One two-second stall past the startup window over 16 s played.
  REQUIRE(m.rebuffer_duration.has_value());
  CHECK(*m.rebuffer_duration == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(m.rebuffer_frequency == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(!m.flagged);
}

TEST_CASE("capacity never above the top rate caps the denominator") {
  // A capacity far above the ladder is clamped to the top rate.
  SessionLog log = make_log({3, 3}, {1e9, 1e9}, {}, 8.0);
  MetricsReport m = compute_metrics(log);
  CHECK(*m.adaptability == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("segments with no usable capacity are excluded and flagged") {
  SessionLog log = make_log({1, 1, 2}, {0.0, 2e6, -5.0}, {}, 12.0);
  int excluded = 0;
  auto a = adaptability(log, &excluded);
  REQUIRE(a.has_value());
  CHECK(excluded == 2);
  CHECK(*a == doctest::Approx(0.5).epsilon(1e-12));
  MetricsReport m = compute_metrics(log);
  CHECK(m.adaptability_excluded == 2);
  CHECK(m.flagged);

  SessionLog none = make_log({1, 1}, {0.0, 0.0}, {}, 8.0);
  CHECK(!adaptability(none).has_value());
}

TEST_CASE("amplitude is undefined without switches") {
  SessionLog log = make_log({2, 2, 2}, {2e6, 2e6, 2e6}, {}, 12.0);
  MetricsReport m = compute_metrics(log);
  CHECK(m.adaptation_frequency == 0.0);
  CHECK(!m.adaptation_amplitude.has_value());
}

TEST_CASE("startup-window stalls are not rebuffering") {
  // omega = 2: stalls attributed to segments 1..2 fall inside startup.
  SessionLog log = make_log({1, 1, 1, 1}, {1e6, 1e6, 1e6, 1e6},
                            {{5, 7, 2}}, 16.0);
  MetricsReport m = compute_metrics(log);
  CHECK(*m.rebuffer_duration == 0.0);
  CHECK(m.rebuffer_frequency == 0.0);

  SessionLog edge = make_log({1, 1, 1, 1}, {1e6, 1e6, 1e6, 1e6},
                             {{5, 7, 3}}, 16.0);
  MetricsReport me = compute_metrics(edge);
  CHECK(*me.rebuffer_duration == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(me.rebuffer_frequency == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("stalls attributed past the last segment still count") {
  SessionLog log = make_log({1, 1, 1, 1}, {1e6, 1e6, 1e6, 1e6},
                            {{20, 30, 5}}, 16.0);
  log.truncated = true;
  MetricsReport m = compute_metrics(log);
  CHECK(*m.rebuffer_duration == doctest::Approx(10.0 / 16.0).epsilon(1e-12));
  CHECK(m.rebuffer_frequency == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m.flagged);
}

TEST_CASE("nothing played leaves rebuffer duration undefined") {
  SessionLog log = make_log({1, 1}, {1e6, 1e6}, {}, 0.0);
  MetricsReport m = compute_metrics(log);
  CHECK(!m.rebuffer_duration.has_value());
  CHECK(m.rebuffer_frequency == 0.0);
}

TEST_CASE("empty session yields zero frequencies and no means") {
  SessionLog log = make_log({}, {}, {}, 0.0);
  MetricsReport m = compute_metrics(log);
  CHECK(!m.adaptability.has_value());
  CHECK(m.adaptation_frequency == 0.0);
  CHECK(!m.adaptation_amplitude.has_value());
  CHECK(m.rebuffer_frequency == 0.0);
}

TEST_CASE("metric computation validates the log") {
  SessionLog log = make_log({1}, {1e6}, {}, 4.0);
  log.ladder_bps.clear();
  CHECK_THROWS_AS(compute_metrics(log), std::invalid_argument);
  SessionLog bad = make_log({5}, {1e6}, {}, 4.0);
  CHECK_THROWS_AS(compute_metrics(bad), std::invalid_argument);
}

TEST_CASE("aggregation reports mean and confidence half-width") {
  std::vector<double> values = {1, 2, 3, 4};
  AggregateEntry e = aggregate_values(values);
  CHECK(e.n == 4);
  CHECK(e.mean == doctest::Approx(2.5).epsilon(1e-12));
  // Sample variance 5/3; stderr sqrt(5/12).
  CHECK(e.stderr_ == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-12));
  CHECK(e.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 12.0)).epsilon(1e-12));
  CHECK(e.has_interval);

  AggregateEntry one = aggregate_values(std::vector<double>{7});
  CHECK(one.n == 1);
  CHECK(one.mean == 7.0);
  CHECK(!one.has_interval);

  AggregateEntry none = aggregate_values(std::vector<double>{});
  CHECK(none.n == 0);
}

TEST_CASE("aggregation skips undefined metrics per session") {
  SessionLog a = make_log({1, 2}, {2e6, 2e6}, {}, 8.0);   // has AA
  SessionLog b = make_log({2, 2}, {2e6, 2e6}, {}, 8.0);   // no AA
  SessionLog c = make_log({1, 1}, {1e6, 1e6}, {}, 0.0);   // no RD
  std::vector<MetricsReport> reports = {compute_metrics(a), compute_metrics(b),
                                        compute_metrics(c)};
  AggregateReport ag = aggregate(reports);
  CHECK(ag.adaptation_frequency.n == 3);
  CHECK(ag.adaptation_amplitude.n == 1);
  CHECK(ag.rebuffer_duration.n == 2);
  CHECK(ag.rebuffer_frequency.n == 3);
  CHECK(ag.adaptability.n == 3);
}
