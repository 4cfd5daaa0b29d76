#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace hasim {

struct BufferMapSpec {
  double tau_s = 4.0;
  double b_max_s = 16.0;
  int omega = 2;
  double buffer_step_s = 2.0;   // grid step along the buffer axis
  double mean_max_tau = 2.0;    // mean download time axis, in units of tau
  int mean_bins = 21;
  double dev_max_tau = 1.0;     // download time deviation axis, in units of tau
  int dev_bins = 11;
  int runs = 200;               // Monte Carlo runs per cell
  int horizon = 20;             // segments simulated per run
  uint64_t seed = 1;

  uint64_t content_hash() const;
};

// Precomputed probability of an under-run within the horizon, indexed by
// (current buffer level, mean segment download time, download time deviation).
class BufferMap {
 public:
  static BufferMap precompute(const BufferMapSpec& spec);

  // Nearest-bin lookup, clamped to the grid.
  double stall_probability(double buffer_s, double mean_download_s,
                           double dev_download_s) const;

  const BufferMapSpec& spec() const { return spec_; }

  void serialize(std::ostream& out) const;
  static BufferMap deserialize(std::istream& in);

  // Loads a cached map for this spec from cache_dir, computing and storing
  // it on a miss. Empty cache_dir skips the disk cache. Results are shared
  // process-wide, so repeated sessions reuse one map.
  static std::shared_ptr<const BufferMap> load_or_precompute(
      const BufferMapSpec& spec, const std::string& cache_dir);

 private:
  BufferMap() = default;

  size_t cell_index(size_t b, size_t m, size_t d) const;

  BufferMapSpec spec_;
  std::vector<double> buffer_grid_;
  std::vector<double> mean_grid_;
  std::vector<double> dev_grid_;
  std::vector<double> probs_;
};

}  // namespace hasim
