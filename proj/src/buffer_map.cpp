#include "hasim/buffer_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hasim/seed.hpp"

namespace hasim {

namespace {

std::vector<double> uniform_grid(double max_value, int bins) {
  std::vector<double> g(static_cast<size_t>(bins));
  for (int i = 0; i < bins; ++i)
    g[static_cast<size_t>(i)] = max_value * i / (bins - 1);
  return g;
}

size_t nearest_bin(double value, double max_value, size_t bins) {
  if (bins == 1 || max_value <= 0) return 0;
  double step = max_value / static_cast<double>(bins - 1);
  long idx = std::lround(value / step);
  return static_cast<size_t>(std::clamp<long>(idx, 0, static_cast<long>(bins) - 1));
}

}  // namespace

uint64_t BufferMapSpec::content_hash() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "v1|%.17g|%.17g|%d|%.17g|%.17g|%d|%.17g|%d|%d|%d|%llu",
                tau_s, b_max_s, omega, buffer_step_s, mean_max_tau, mean_bins,
                dev_max_tau, dev_bins, runs, horizon,
                static_cast<unsigned long long>(seed));
  return fnv1a64(buf);
}

size_t BufferMap::cell_index(size_t b, size_t m, size_t d) const {
  return (b * mean_grid_.size() + m) * dev_grid_.size() + d;
}

BufferMap BufferMap::precompute(const BufferMapSpec& spec) {
  if (!(spec.tau_s > 0 && spec.b_max_s >= spec.tau_s))
    throw std::invalid_argument("buffer map needs tau > 0 and b_max >= tau");
  if (!(spec.buffer_step_s > 0) || spec.mean_bins < 2 || spec.dev_bins < 2 ||
      spec.runs < 1 || spec.horizon < 1)
    throw std::invalid_argument("bad buffer map grid parameters");

  BufferMap map;
  map.spec_ = spec;
  int buffer_bins =
      static_cast<int>(std::floor(spec.b_max_s / spec.buffer_step_s + 1e-9)) + 1;
  map.buffer_grid_.resize(static_cast<size_t>(buffer_bins));
  for (int i = 0; i < buffer_bins; ++i)
    map.buffer_grid_[static_cast<size_t>(i)] = spec.buffer_step_s * i;
  map.mean_grid_ = uniform_grid(spec.mean_max_tau * spec.tau_s, spec.mean_bins);
  map.dev_grid_ = uniform_grid(spec.dev_max_tau * spec.tau_s, spec.dev_bins);
  map.probs_.assign(
      map.buffer_grid_.size() * map.mean_grid_.size() * map.dev_grid_.size(),
      0.0);

  double tau = spec.tau_s;
  double b_max = spec.b_max_s;
  for (size_t bi = 0; bi < map.buffer_grid_.size(); ++bi) {
    for (size_t mi = 0; mi < map.mean_grid_.size(); ++mi) {
      double m = map.mean_grid_[mi];
      for (size_t di = 0; di < map.dev_grid_.size(); ++di) {
        double d = map.dev_grid_[di];
        if (m <= 0) continue;  // instantaneous downloads never stall
        uint64_t cell_seed = splitmix64(
            spec.seed ^ splitmix64((bi << 42) ^ (mi << 21) ^ di));
        std::mt19937_64 rng(cell_seed);
        double mu = 0, sigma = 0;
        if (d > 0) {
          double sigma2 = std::log(1.0 + (d / m) * (d / m));
          sigma = std::sqrt(sigma2);
          mu = std::log(m) - 0.5 * sigma2;
        }
        std::lognormal_distribution<double> dist(mu, sigma);
        int stalls = 0;
        for (int r = 0; r < spec.runs; ++r) {
          double buf = map.buffer_grid_[bi];
          for (int h = 0; h < spec.horizon; ++h) {
            buf -= std::max(0.0, buf + tau - b_max);  // wait for room
            double dl = d > 0 ? dist(rng) : m;
            if (dl > buf) {
              ++stalls;
              break;
            }
            buf += tau - dl;
          }
        }
        map.probs_[map.cell_index(bi, mi, di)] =
            static_cast<double>(stalls) / spec.runs;
      }
    }
  }
  return map;
}

double BufferMap::stall_probability(double buffer_s, double mean_download_s,
                                    double dev_download_s) const {
  size_t bi = nearest_bin(buffer_s, spec_.buffer_step_s * (buffer_grid_.size() - 1),
                          buffer_grid_.size());
  size_t mi = nearest_bin(mean_download_s, spec_.mean_max_tau * spec_.tau_s,
                          mean_grid_.size());
  size_t di = nearest_bin(dev_download_s, spec_.dev_max_tau * spec_.tau_s,
                          dev_grid_.size());
  return probs_[cell_index(bi, mi, di)];
}

void BufferMap::serialize(std::ostream& out) const {
  char buf[256];
  out << "hasim-buffer-map v1\n";
  std::snprintf(buf, sizeof(buf), "tau %.17g b_max %.17g omega %d\n",
                spec_.tau_s, spec_.b_max_s, spec_.omega);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "buffer_step %.17g mean_max %.17g mean_bins %d dev_max %.17g "
                "dev_bins %d\n",
                spec_.buffer_step_s, spec_.mean_max_tau, spec_.mean_bins,
                spec_.dev_max_tau, spec_.dev_bins);
  out << buf;
  std::snprintf(buf, sizeof(buf), "runs %d horizon %d seed %llu\n", spec_.runs,
                spec_.horizon, static_cast<unsigned long long>(spec_.seed));
  out << buf;
  out << "probs " << probs_.size() << "\n";
  for (size_t i = 0; i < probs_.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", probs_[i],
                  (i + 1) % 16 == 0 || i + 1 == probs_.size() ? '\n' : ' ');
    out << buf;
  }
}

BufferMap BufferMap::deserialize(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "hasim-buffer-map" || version != "v1")
    throw std::runtime_error("unrecognized buffer map header");
  BufferMapSpec spec;
  std::string key;
  unsigned long long seed = 0;
  size_t count = 0;
  in >> key >> spec.tau_s >> key >> spec.b_max_s >> key >> spec.omega;
  in >> key >> spec.buffer_step_s >> key >> spec.mean_max_tau >> key >>
      spec.mean_bins >> key >> spec.dev_max_tau >> key >> spec.dev_bins;
  in >> key >> spec.runs >> key >> spec.horizon >> key >> seed;
  spec.seed = seed;
  in >> key >> count;
  if (!in || key != "probs")
    throw std::runtime_error("malformed buffer map file");
  BufferMap map;
  map.spec_ = spec;
  int buffer_bins =
      static_cast<int>(std::floor(spec.b_max_s / spec.buffer_step_s + 1e-9)) + 1;
  map.buffer_grid_.resize(static_cast<size_t>(buffer_bins));
  for (int i = 0; i < buffer_bins; ++i)
    map.buffer_grid_[static_cast<size_t>(i)] = spec.buffer_step_s * i;
  map.mean_grid_ = uniform_grid(spec.mean_max_tau * spec.tau_s, spec.mean_bins);
  map.dev_grid_ = uniform_grid(spec.dev_max_tau * spec.tau_s, spec.dev_bins);
  if (count != map.buffer_grid_.size() * map.mean_grid_.size() *
                   map.dev_grid_.size())
    throw std::runtime_error("buffer map cell count mismatch");
  map.probs_.resize(count);
  for (auto& p : map.probs_) in >> p;
  if (!in) throw std::runtime_error("truncated buffer map file");
  return map;
}

std::shared_ptr<const BufferMap> BufferMap::load_or_precompute(
    const BufferMapSpec& spec, const std::string& cache_dir) {
  static std::mutex mu;
  static std::map<uint64_t, std::shared_ptr<const BufferMap>> registry;
  uint64_t hash = spec.content_hash();
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = registry.find(hash);
    if (it != registry.end()) return it->second;
  }
  std::shared_ptr<const BufferMap> result;
  std::filesystem::path cache_path;
  if (!cache_dir.empty()) {
    char name[64];
    std::snprintf(name, sizeof(name), "abma_map_%016llx.txt",
                  static_cast<unsigned long long>(hash));
    cache_path = std::filesystem::path(cache_dir) / name;
    std::ifstream in(cache_path);
    if (in) {
      BufferMap map = deserialize(in);
      if (map.spec().content_hash() == hash)
        result = std::make_shared<BufferMap>(std::move(map));
    }
  }
  if (!result) {
    result = std::make_shared<BufferMap>(precompute(spec));
    if (!cache_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(cache_dir, ec);
      std::ofstream out(cache_path);
      if (out) result->serialize(out);
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  registry.emplace(hash, result);
  return result;
}

}  // namespace hasim
