#include "hasim/video.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

namespace hasim {

namespace {

const std::vector<std::pair<int, int>>& default_resolutions() {
  static const std::vector<std::pair<int, int>> res = {
      {320, 240},  {480, 360},  {854, 480},  {1280, 720},
      {1280, 720}, {1920, 1080}, {1920, 1080}};
  return res;
}

}  // namespace

RepresentationLadder::RepresentationLadder(
    std::vector<RepresentationLevel> levels, double segment_duration_s)
    : levels_(std::move(levels)), segment_duration_s_(segment_duration_s) {
  if (!(segment_duration_s_ > 0))
    throw std::invalid_argument("segment duration must be > 0");
  if (levels_.size() < 2)
    throw std::invalid_argument("ladder needs at least two levels");
  for (size_t i = 0; i < levels_.size(); ++i) {
    levels_[i].index = static_cast<int>(i) + 1;
    if (levels_[i].nominal_bps <= 0)
      throw std::invalid_argument("nominal rates must be > 0");
    if (i > 0 && levels_[i].nominal_bps <= levels_[i - 1].nominal_bps)
      throw std::invalid_argument("nominal rates must be strictly increasing");
  }
}

RepresentationLadder RepresentationLadder::default_ladder(
    double segment_duration_s) {
  static const int64_t kbps[] = {129, 378, 578, 985, 1536, 2353, 2969};
  std::vector<RepresentationLevel> levels;
  const auto& res = default_resolutions();
  for (size_t i = 0; i < std::size(kbps); ++i)
    levels.push_back({static_cast<int>(i) + 1, kbps[i] * 1000, res[i].first,
                      res[i].second});
  return RepresentationLadder(std::move(levels), segment_duration_s);
}

int64_t RepresentationLadder::nominal_bps(int level) const {
  if (level < 1 || level > level_count())
    throw std::out_of_range("level out of range");
  return levels_[static_cast<size_t>(level) - 1].nominal_bps;
}

int RepresentationLadder::highest_level_at_most(double rate_bps) const {
  int best = 0;
  for (const auto& lv : levels_) {
    if (static_cast<double>(lv.nominal_bps) <= rate_bps) best = lv.index;
  }
  return best;
}

RepresentationLadder ladder_from_quantiles(const EmpiricalCdf& cdf,
                                           std::span<const double> quantiles,
                                           double segment_duration_s) {
  if (quantiles.empty()) throw std::invalid_argument("no quantiles given");
  for (size_t i = 0; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > 0 && quantiles[i] < 1))
      throw std::invalid_argument("quantiles must lie in (0, 1)");
    if (i > 0 && !(quantiles[i] > quantiles[i - 1]))
      throw std::invalid_argument("quantiles must be strictly increasing");
  }
  std::vector<int64_t> rates;
  for (double q : quantiles) {
    int64_t r = std::llround(cdf.quantile(q));
    if (r <= 0) continue;
    if (rates.empty() || r > rates.back()) rates.push_back(r);
  }
  if (rates.size() < 2)
    throw std::invalid_argument(
        "quantiles yield fewer than two distinct positive rates");
  std::vector<RepresentationLevel> levels;
  const auto& res = default_resolutions();
  for (size_t i = 0; i < rates.size(); ++i) {
    auto [w, h] = i < res.size() ? res[i] : res.back();
    levels.push_back({static_cast<int>(i) + 1, rates[i], w, h});
  }
  return RepresentationLadder(std::move(levels), segment_duration_s);
}

SegmentSizeTable::SegmentSizeTable(std::vector<std::vector<int64_t>> size_bits)
    : sizes_(std::move(size_bits)) {
  if (sizes_.empty() || sizes_.front().empty())
    throw std::invalid_argument("segment table must be non-empty");
  size_t k_total = sizes_.front().size();
  for (const auto& row : sizes_) {
    if (row.size() != k_total)
      throw std::invalid_argument("segment table rows must have equal length");
    for (int64_t s : row)
      if (s <= 0) throw std::invalid_argument("segment sizes must be > 0");
  }
  for (size_t lv = 1; lv < sizes_.size() && !monotonic_violated_; ++lv)
    for (size_t k = 0; k < k_total; ++k)
      if (sizes_[lv][k] <= sizes_[lv - 1][k]) {
        monotonic_violated_ = true;
        break;
      }
  for (const auto& row : sizes_) {
    int64_t sum = 0;
    for (int64_t s : row) sum += s;
    avg_bits_.push_back(static_cast<double>(sum) /
                        static_cast<double>(k_total));
  }
}

int64_t SegmentSizeTable::size_bits(int level, int64_t k) const {
  if (level < 1 || level > level_count())
    throw std::out_of_range("level out of range");
  if (k < 1) throw std::out_of_range("segment index must be >= 1");
  int64_t idx = (k - 1) % segment_count();
  return sizes_[static_cast<size_t>(level) - 1][static_cast<size_t>(idx)];
}

double SegmentSizeTable::avg_segment_size_bits(int level) const {
  if (level < 1 || level > level_count())
    throw std::out_of_range("level out of range");
  return avg_bits_[static_cast<size_t>(level) - 1];
}

SegmentSizeTable synth_segments(const RepresentationLadder& ladder,
                                int64_t k_total, double vbr_cv,
                                uint64_t seed) {
  if (k_total < 1) throw std::invalid_argument("k_total must be >= 1");
  if (!(vbr_cv >= 0 && vbr_cv < 1))
    throw std::invalid_argument("vbr_cv must lie in [0, 1)");
  double tau = ladder.segment_duration_s();
  std::vector<double> factor(static_cast<size_t>(k_total), 1.0);
  if (vbr_cv > 0) {
    // Unit-mean log-normal so per-level averages stay on the nominal rate.
    double sigma2 = std::log(1.0 + vbr_cv * vbr_cv);
    std::lognormal_distribution<double> dist(-0.5 * sigma2,
                                             std::sqrt(sigma2));
    std::mt19937_64 rng(seed);
    double lo = std::max(0.0, 1.0 - 3.0 * vbr_cv);
    double hi = 1.0 + 3.0 * vbr_cv;
    for (auto& f : factor) f = std::clamp(dist(rng), lo, hi);
  }
  std::vector<std::vector<int64_t>> sizes;
  for (const auto& lv : ladder.levels()) {
    std::vector<int64_t> row;
    row.reserve(static_cast<size_t>(k_total));
    for (double f : factor) {
      double bits = static_cast<double>(lv.nominal_bps) * tau * f;
      row.push_back(std::max<int64_t>(1, std::llround(bits)));
    }
    sizes.push_back(std::move(row));
  }
  return SegmentSizeTable(std::move(sizes));
}

SegmentSizeTable load_segments(std::istream& in) {
  std::map<int, std::map<int64_t, int64_t>> cells;
  std::string line;
  int lineno = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    size_t content = line.find_first_not_of(" \t\r");
    if (content == std::string::npos || line[content] == '#') continue;
    long long level = 0, k = 0, bytes = 0;
    char extra = 0;
    int fields = std::sscanf(line.c_str(), " %lld , %lld , %lld %c", &level,
                             &k, &bytes, &extra);
    if (fields != 3) {
      if (!saw_data && fields <= 0) continue;  // header line
      throw ParseError("expected level,segment_index,bytes", lineno);
    }
    saw_data = true;
    if (level < 1 || k < 1 || bytes <= 0)
      throw ParseError("indices must be >= 1 and bytes > 0", lineno);
    auto [it, inserted] =
        cells[static_cast<int>(level)].try_emplace(k, bytes * 8);
    if (!inserted) throw ParseError("duplicate table cell", lineno);
  }
  if (cells.empty()) throw std::invalid_argument("empty segment table");
  int n_levels = cells.rbegin()->first;
  int64_t k_total = 0;
  for (const auto& [lv, row] : cells)
    k_total = std::max(k_total, row.rbegin()->first);
  std::vector<std::vector<int64_t>> sizes(
      static_cast<size_t>(n_levels),
      std::vector<int64_t>(static_cast<size_t>(k_total), 0));
  for (int lv = 1; lv <= n_levels; ++lv) {
    auto it = cells.find(lv);
    if (it == cells.end() ||
        static_cast<int64_t>(it->second.size()) != k_total)
      throw std::invalid_argument("segment table has missing cells");
    for (const auto& [k, bits] : it->second)
      sizes[static_cast<size_t>(lv) - 1][static_cast<size_t>(k) - 1] = bits;
  }
  return SegmentSizeTable(std::move(sizes));
}

}  // namespace hasim
