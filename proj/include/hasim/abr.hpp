#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hasim/buffer_map.hpp"
#include "hasim/video.hpp"

namespace hasim {

struct LastDownload {
  int64_t segment = 0;
  int level = 1;
  int64_t size_bits = 0;
  double start_s = 0;
  double end_s = 0;
  double measured_bps = 0;
};

struct DecisionContext {
  int64_t next_segment = 1;
  double clock_s = 0;
  double buffer_s = 0;
  double b_max_s = 0;
  std::optional<LastDownload> last;
  const RepresentationLadder* ladder = nullptr;
  const SegmentSizeTable* table = nullptr;
};

struct Decision {
  int level = 1;
  double delay_s = 0;
};

class Algorithm {
 public:
  virtual ~Algorithm() = default;
  virtual std::string_view name() const = 0;
  virtual Decision decide(const DecisionContext& ctx) = 0;
};

double ewma(double previous, double sample, double alpha);

// Level for `rate_bps` with hysteresis: switch up only to the highest level
// whose rate fits under rate*(1-up_margin); switch down only when the current
// level's rate exceeds rate*(1+down_margin); otherwise hold.
int dead_zone_quantize(double rate_bps, int current_level,
                       const RepresentationLadder& ladder, double up_margin,
                       double down_margin);

struct ConventionalParams {
  double alpha = 0.2;
  double up_margin = 0.15;
  double down_margin = 0.0;
  double full_delay_s = -1;  // < 0: one segment duration
};

class ConventionalAlgorithm : public Algorithm {
 public:
  explicit ConventionalAlgorithm(ConventionalParams params);
  std::string_view name() const override { return "conventional"; }
  Decision decide(const DecisionContext& ctx) override;

 private:
  ConventionalParams params_;
  std::optional<double> smoothed_bps_;
  int current_level_ = 1;
};

struct PandaParams {
  double kappa = 0.28;     // probing aggressiveness, 1/s
  double w_bps = 300000;   // additive probe increment
  double alpha = 0.2;      // smoothing convergence rate, 1/s
  double beta = 0.2;       // buffer feedback gain, 1/s
  double epsilon = 0.15;   // quantizer up-switch margin
  double b_target_s = -1;  // < 0: fill toward b_max
};

class PandaAlgorithm : public Algorithm {
 public:
  explicit PandaAlgorithm(PandaParams params);
  std::string_view name() const override { return "panda"; }
  Decision decide(const DecisionContext& ctx) override;

  double target_rate_bps() const { return x_hat_; }
  double smoothed_rate_bps() const { return y_hat_; }

 private:
  PandaParams params_;
  bool primed_ = false;
  double x_hat_ = 0;
  double y_hat_ = 0;
  double last_target_interval_s_ = 0;
  int current_level_ = 1;
};

struct BbaParams {
  double reservoir_s = -1;  // < 0: 0.375 * b_max
  double cushion_s = -1;    // < 0: 0.525 * b_max
};

class BbaAlgorithm : public Algorithm {
 public:
  explicit BbaAlgorithm(BbaParams params);
  std::string_view name() const override { return "bba"; }
  Decision decide(const DecisionContext& ctx) override;

 private:
  BbaParams params_;
  int current_level_ = 1;
};

struct BolaParams {
  double gp = 5.0;  // gamma * tau, utility offset
  double v = -1;    // < 0: derived so the buffer target sits at b_max - tau
  bool cap_to_throughput = true;  // BOLA-O when true, BOLA-U otherwise
};

class BolaAlgorithm : public Algorithm {
 public:
  explicit BolaAlgorithm(BolaParams params);
  std::string_view name() const override {
    return params_.cap_to_throughput ? "bola-o" : "bola-u";
  }
  Decision decide(const DecisionContext& ctx) override;

 private:
  BolaParams params_;
  int prev_level_ = 0;
};

struct AbmaParams {
  int probe_window = 50;
  int min_probes = 10;
  double eps_stall = 0.01;
};

class AbmaAlgorithm : public Algorithm {
 public:
  AbmaAlgorithm(AbmaParams params, std::shared_ptr<const BufferMap> map);
  std::string_view name() const override { return "abma"; }
  Decision decide(const DecisionContext& ctx) override;

 private:
  AbmaParams params_;
  std::shared_ptr<const BufferMap> map_;
  std::deque<double> unit_times_;  // seconds per bit of recent downloads
};

using ParamMap = std::map<std::string, double>;

struct AlgorithmEnv {
  const RepresentationLadder* ladder = nullptr;
  double b_max_s = 0;
  int omega = 2;
  std::string map_cache_dir;
};

// ids: conventional, panda, bba, bola-o, bola-u, abma
std::unique_ptr<Algorithm> make_algorithm(const std::string& id,
                                          const ParamMap& params,
                                          const AlgorithmEnv& env);

// The five algorithms of the study, in canonical order.
const std::vector<std::string>& algorithm_ids();

}  // namespace hasim
