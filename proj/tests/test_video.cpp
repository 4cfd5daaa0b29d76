#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hasim/video.hpp"

using namespace hasim;

TEST_CASE("default ladder carries the seven-level set") {
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  REQUIRE(ladder.level_count() == 7);
  CHECK(ladder.segment_duration_s() == 4.0);
  const int64_t expect[] = {129000,  378000,  578000, 985000,
                            1536000, 2353000, 2969000};
  for (int i = 1; i <= 7; ++i) CHECK(ladder.nominal_bps(i) == expect[i - 1]);
  CHECK(ladder.levels().front().width == 320);
  CHECK(ladder.levels().front().height == 240);
  CHECK(ladder.levels().back().width == 1920);
  CHECK(ladder.levels().back().height == 1080);
  CHECK(ladder.min_bps() == 129000);
  CHECK(ladder.max_bps() == 2969000);
}

TEST_CASE("highest_level_at_most walks the ladder") {
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  CHECK(ladder.highest_level_at_most(1e3) == 0);
  CHECK(ladder.highest_level_at_most(129000) == 1);
  CHECK(ladder.highest_level_at_most(500000) == 2);
  CHECK(ladder.highest_level_at_most(1e9) == 7);
}

TEST_CASE("ladder validation") {
  CHECK_THROWS_AS(RepresentationLadder({{1, 100, 0, 0}}, 4.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(RepresentationLadder({{1, 100, 0, 0}, {2, 100, 0, 0}}, 4.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(RepresentationLadder({{1, 100, 0, 0}, {2, 200, 0, 0}}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(RepresentationLadder({{1, 0, 0, 0}, {2, 200, 0, 0}}, 4.0),
                  std::invalid_argument);
}

TEST_CASE("ladder_from_quantiles collapses duplicates") {
  // Two-valued distribution: low quantiles all hit 1 Mb/s, high ones 2 Mb/s.
  EmpiricalCdf cdf({1e6, 2e6}, {0.5, 0.5});
  const double qs[] = {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.95};
  RepresentationLadder ladder = ladder_from_quantiles(cdf, qs, 4.0);
  REQUIRE(ladder.level_count() == 2);
  CHECK(ladder.nominal_bps(1) == 1000000);
  CHECK(ladder.nominal_bps(2) == 2000000);

  SUBCASE("degenerate single-value distribution is rejected") {
    EmpiricalCdf one({5e5}, {1.0});
    CHECK_THROWS_AS(ladder_from_quantiles(one, qs, 4.0),
                    std::invalid_argument);
  }
  SUBCASE("quantiles must be strictly increasing inside (0,1)") {
    const double bad1[] = {0.5, 0.5};
    CHECK_THROWS_AS(ladder_from_quantiles(cdf, bad1, 4.0),
                    std::invalid_argument);
    const double bad2[] = {0.0, 0.5};
    CHECK_THROWS_AS(ladder_from_quantiles(cdf, bad2, 4.0),
                    std::invalid_argument);
  }
}

TEST_CASE("segment table lookup wraps past the end") {
  SegmentSizeTable table({{10, 20, 30}, {11, 21, 31}});
  CHECK(table.level_count() == 2);
  CHECK(table.segment_count() == 3);
  CHECK(table.size_bits(1, 1) == 10);
  CHECK(table.size_bits(1, 3) == 30);
  CHECK(table.size_bits(1, 4) == 10);  // wraps to the first segment
  CHECK(table.size_bits(2, 5) == 21);
  CHECK(table.size_bits(2, 3 + 3 * 100) == 31);
  CHECK_THROWS_AS(table.size_bits(0, 1), std::out_of_range);
  CHECK_THROWS_AS(table.size_bits(1, 0), std::out_of_range);
  CHECK(table.avg_segment_size_bits(1) == doctest::Approx(20.0));
  CHECK(!table.cross_level_monotonic_violated());
}

TEST_CASE("segment table flags non-monotonic levels instead of throwing") {
  SegmentSizeTable table({{10, 20}, {11, 15}, {12, 14}});
  CHECK(table.cross_level_monotonic_violated());
}

TEST_CASE("segment table rejects malformed matrices") {
  CHECK_THROWS_AS(SegmentSizeTable({}), std::invalid_argument);
  CHECK_THROWS_AS(SegmentSizeTable({{10, 20}, {11}}), std::invalid_argument);
  CHECK_THROWS_AS(SegmentSizeTable({{10, 0}}), std::invalid_argument);
}

TEST_CASE("synth_segments with zero variation is exactly nominal") {
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  SegmentSizeTable table = synth_segments(ladder, 5, 0.0, 42);
  for (int lv = 1; lv <= ladder.level_count(); ++lv)
    for (int64_t k = 1; k <= 5; ++k)
      CHECK(table.size_bits(lv, k) == ladder.nominal_bps(lv) * 4);
}

TEST_CASE("synth_segments is deterministic per seed") {
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  SegmentSizeTable a = synth_segments(ladder, 100, 0.2, 7);
  SegmentSizeTable b = synth_segments(ladder, 100, 0.2, 7);
  SegmentSizeTable c = synth_segments(ladder, 100, 0.2, 8);
  bool identical = true, differs = false;
  for (int lv = 1; lv <= ladder.level_count(); ++lv)
    for (int64_t k = 1; k <= 100; ++k) {
      if (a.size_bits(lv, k) != b.size_bits(lv, k)) identical = false;
      if (a.size_bits(lv, k) != c.size_bits(lv, k)) differs = true;
    }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("synth_segments mean stays on the nominal rate") {
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  const int64_t k_total = 10000;
  SegmentSizeTable table = synth_segments(ladder, k_total, 0.2, 12345);
  for (int lv = 1; lv <= ladder.level_count(); ++lv) {
    double nominal_bits = static_cast<double>(ladder.nominal_bps(lv)) * 4.0;
    double mean = table.avg_segment_size_bits(lv);
    CHECK(std::abs(mean / nominal_bits - 1.0) < 0.01);
    for (int64_t k = 1; k <= k_total; ++k) {
      double f = static_cast<double>(table.size_bits(lv, k)) / nominal_bits;
      CHECK(f >= 0.4 - 1e-6);
      CHECK(f <= 1.6 + 1e-6);
    }
  }
  CHECK(!table.cross_level_monotonic_violated());
}

TEST_CASE("synth_segments shares one multiplier across levels") {
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  SegmentSizeTable table = synth_segments(ladder, 50, 0.2, 9);
  for (int64_t k = 1; k <= 50; ++k) {
    double f1 = static_cast<double>(table.size_bits(1, k)) /
                (static_cast<double>(ladder.nominal_bps(1)) * 4.0);
    double f7 = static_cast<double>(table.size_bits(7, k)) /
                (static_cast<double>(ladder.nominal_bps(7)) * 4.0);
    CHECK(f1 == doctest::Approx(f7).epsilon(1e-4));
  }
}

TEST_CASE("load_segments parses the level,index,bytes matrix") {
  std::istringstream in(
      "level,segment_index,bytes\n"
      "1,1,1000\n1,2,1100\n"
      "2,1,2000\n2,2,2100\n");
  SegmentSizeTable table = load_segments(in);
  CHECK(table.level_count() == 2);
  CHECK(table.segment_count() == 2);
  CHECK(table.size_bits(1, 1) == 8000);
  CHECK(table.size_bits(2, 2) == 16800);
  CHECK(!table.cross_level_monotonic_violated());
}

TEST_CASE("load_segments accepts non-monotonic data with the warning flag") {
  std::istringstream in("1,1,1000\n2,1,900\n");
  SegmentSizeTable table = load_segments(in);
  CHECK(table.cross_level_monotonic_violated());
}

TEST_CASE("load_segments rejects gaps and duplicates") {
  SUBCASE("duplicate cell") {
    std::istringstream in("1,1,1000\n1,1,1100\n");
    CHECK_THROWS_AS(load_segments(in), ParseError);
  }
  SUBCASE("missing cell") {
    std::istringstream in("1,1,1000\n1,3,1100\n");
    CHECK_THROWS_AS(load_segments(in), std::invalid_argument);
  }
  SUBCASE("missing level") {
    std::istringstream in("1,1,1000\n3,1,1100\n");
    CHECK_THROWS_AS(load_segments(in), std::invalid_argument);
  }
  SUBCASE("bad row") {
    std::istringstream in("1,1,1000\n1,x,1100\n");
    CHECK_THROWS_AS(load_segments(in), ParseError);
  }
}
