#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hasim/trace.hpp"

namespace hasim {

struct RepresentationLevel {
  int index = 0;  // 1-based
  int64_t nominal_bps = 0;
  int width = 0;
  int height = 0;
};

class RepresentationLadder {
 public:
  RepresentationLadder(std::vector<RepresentationLevel> levels,
                       double segment_duration_s);

  // Big Buck Bunny ladder: 129..2969 kbps over seven levels.
  static RepresentationLadder default_ladder(double segment_duration_s = 4.0);

  int level_count() const { return static_cast<int>(levels_.size()); }
  double segment_duration_s() const { return segment_duration_s_; }
  const std::vector<RepresentationLevel>& levels() const { return levels_; }
  int64_t nominal_bps(int level) const;  // 1-based
  int64_t min_bps() const { return levels_.front().nominal_bps; }
  int64_t max_bps() const { return levels_.back().nominal_bps; }

  // Highest level whose nominal rate is <= rate_bps, or 0 when even the
  // lowest level exceeds it.
  int highest_level_at_most(double rate_bps) const;

 private:
  std::vector<RepresentationLevel> levels_;
  double segment_duration_s_;
};

// Ladder built from CDF quantiles; equal quantile values collapse into one
// level. Quantiles must be strictly increasing within (0, 1).
RepresentationLadder ladder_from_quantiles(const EmpiricalCdf& cdf,
                                           std::span<const double> quantiles,
                                           double segment_duration_s);

class SegmentSizeTable {
 public:
  // size_bits[level-1][k-1]; every size must be positive.
  explicit SegmentSizeTable(std::vector<std::vector<int64_t>> size_bits);

  int level_count() const { return static_cast<int>(sizes_.size()); }
  int64_t segment_count() const {
    return static_cast<int64_t>(sizes_.front().size());
  }

  // 1-based level and segment index; indices past the table wrap around so
  // arbitrarily long sessions can loop the same movie.
  int64_t size_bits(int level, int64_t k) const;

  double avg_segment_size_bits(int level) const;

  // True when some segment is not strictly larger at a higher level.
  bool cross_level_monotonic_violated() const { return monotonic_violated_; }

 private:
  std::vector<std::vector<int64_t>> sizes_;
  std::vector<double> avg_bits_;
  bool monotonic_violated_ = false;
};

// Draws one shared VBR multiplier per segment index (unit mean, coefficient
// of variation vbr_cv, clipped to 1 +- 3*cv) and applies it across levels.
SegmentSizeTable synth_segments(const RepresentationLadder& ladder,
                                int64_t k_total, double vbr_cv, uint64_t seed);

// CSV rows "level,segment_index,bytes" (1-based indices, full matrix).
SegmentSizeTable load_segments(std::istream& in);

}  // namespace hasim
