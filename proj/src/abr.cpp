#include "hasim/abr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hasim {

double ewma(double previous, double sample, double alpha) {
  if (!(alpha >= 0 && alpha <= 1))
    throw std::invalid_argument("ewma alpha must lie in [0, 1]");
  return previous + alpha * (sample - previous);
}

int dead_zone_quantize(double rate_bps, int current_level,
                       const RepresentationLadder& ladder, double up_margin,
                       double down_margin) {
  if (current_level < 1 || current_level > ladder.level_count())
    throw std::out_of_range("current level out of range");
  if (!(up_margin >= 0 && down_margin >= 0))
    throw std::invalid_argument("margins must be >= 0");
  if (!(rate_bps >= 0)) rate_bps = 0;
  int target =
      std::max(1, ladder.highest_level_at_most(rate_bps * (1.0 - up_margin)));
  if (target > current_level) return target;
  if (static_cast<double>(ladder.nominal_bps(current_level)) >
      rate_bps * (1.0 + down_margin))
    return target;
  return current_level;
}

ConventionalAlgorithm::ConventionalAlgorithm(ConventionalParams params)
    : params_(params) {
  if (!(params_.alpha > 0 && params_.alpha <= 1))
    throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(params_.up_margin >= 0 && params_.down_margin >= 0))
    throw std::invalid_argument("margins must be >= 0");
}

Decision ConventionalAlgorithm::decide(const DecisionContext& ctx) {
  double tau = ctx.ladder->segment_duration_s();
  double full_delay =
      params_.full_delay_s >= 0 ? params_.full_delay_s : tau;
  if (!ctx.last) {
    current_level_ = 1;
    return {1, 0};
  }
  double measured = ctx.last->measured_bps;
  smoothed_bps_ = smoothed_bps_
                      ? ewma(*smoothed_bps_, measured, params_.alpha)
                      : measured;
  current_level_ =
      dead_zone_quantize(*smoothed_bps_, current_level_, *ctx.ladder,
                         params_.up_margin, params_.down_margin);
  double delay = ctx.buffer_s + tau > ctx.b_max_s + 1e-9 ? full_delay : 0;
  return {current_level_, delay};
}

PandaAlgorithm::PandaAlgorithm(PandaParams params) : params_(params) {
  if (!(params_.kappa > 0 && params_.w_bps > 0))
    throw std::invalid_argument("kappa and w must be > 0");
  if (!(params_.alpha > 0 && params_.beta >= 0 && params_.epsilon >= 0))
    throw std::invalid_argument("bad panda smoothing parameters");
}

Decision PandaAlgorithm::decide(const DecisionContext& ctx) {
  if (!ctx.last) {
    current_level_ = 1;
    return {1, 0};
  }
  const LastDownload& last = *ctx.last;
  double measured = last.measured_bps;
  if (!primed_) {
    x_hat_ = measured;
    y_hat_ = measured;
    primed_ = true;
  } else {
    // Actual inter-request interval: the scheduler waits out the target
    // interval or the download itself, whichever is longer.
    double interval =
        std::max(last_target_interval_s_, last.end_s - last.start_s);
    x_hat_ += interval * params_.kappa *
              (params_.w_bps - std::max(0.0, x_hat_ - measured + params_.w_bps));
    x_hat_ = std::max(x_hat_, 0.0);
    y_hat_ += std::min(1.0, params_.alpha * interval) * (x_hat_ - y_hat_);
  }
  current_level_ = dead_zone_quantize(y_hat_, current_level_, *ctx.ladder,
                                      params_.epsilon, 0.0);
  double b_target =
      params_.b_target_s >= 0 ? params_.b_target_s : ctx.b_max_s;
  double target_interval = 0;
  if (y_hat_ > 0)
    target_interval = ctx.table->avg_segment_size_bits(current_level_) / y_hat_ +
                      params_.beta * (ctx.buffer_s - b_target);
  target_interval = std::max(0.0, target_interval);
  last_target_interval_s_ = target_interval;
  double delay = std::max(0.0, last.start_s + target_interval - ctx.clock_s);
  return {current_level_, delay};
}

BbaAlgorithm::BbaAlgorithm(BbaParams params) : params_(params) {}

Decision BbaAlgorithm::decide(const DecisionContext& ctx) {
  double reservoir =
      params_.reservoir_s >= 0 ? params_.reservoir_s : 0.375 * ctx.b_max_s;
  double cushion =
      params_.cushion_s >= 0 ? params_.cushion_s : 0.525 * ctx.b_max_s;
  if (!(reservoir > 0 && cushion > 0 && reservoir + cushion <= ctx.b_max_s))
    throw std::invalid_argument("need 0 < reservoir, cushion, sum <= b_max");
  if (!ctx.last) {
    current_level_ = 1;
    return {1, 0};
  }
  const RepresentationLadder& ladder = *ctx.ladder;
  int n = ladder.level_count();
  double b = ctx.buffer_s;
  double r_min = static_cast<double>(ladder.min_bps());
  double r_max = static_cast<double>(ladder.max_bps());
  int next = current_level_;
  if (b <= reservoir) {
    next = 1;
  } else if (b >= reservoir + cushion) {
    next = n;
  } else {
    double f = r_min + (r_max - r_min) * (b - reservoir) / cushion;
    double rate_up = static_cast<double>(
        ladder.nominal_bps(std::min(current_level_ + 1, n)));
    double rate_down = static_cast<double>(
        ladder.nominal_bps(std::max(current_level_ - 1, 1)));
    if (current_level_ < n && f >= rate_up) {
      next = current_level_;
      while (next < n &&
             static_cast<double>(ladder.nominal_bps(next + 1)) < f)
        ++next;
      next = std::max(next, current_level_ + 1);
    } else if (current_level_ > 1 && f <= rate_down) {
      next = current_level_;
      while (next > 1 && static_cast<double>(ladder.nominal_bps(next - 1)) > f)
        --next;
      next = std::min(next, current_level_ - 1);
    }
  }
  current_level_ = next;
  return {next, 0};
}

BolaAlgorithm::BolaAlgorithm(BolaParams params) : params_(params) {
  if (!(params_.gp > 0)) throw std::invalid_argument("gp must be > 0");
}

Decision BolaAlgorithm::decide(const DecisionContext& ctx) {
  const RepresentationLadder& ladder = *ctx.ladder;
  const SegmentSizeTable& table = *ctx.table;
  double tau = ladder.segment_duration_s();
  int n = ladder.level_count();
  double s1 = table.avg_segment_size_bits(1);
  double vn = std::log(table.avg_segment_size_bits(n) / s1);
  double v = params_.v;
  if (v < 0) {
    double q_max = ctx.b_max_s / tau;
    v = (q_max - 1.0) / (vn + params_.gp);
  }
  v = std::max(v, 1e-12);
  double q = ctx.buffer_s / tau;
  int best = 1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= n; ++i) {
    double si = table.avg_segment_size_bits(i);
    double vi = std::log(si / s1);
    double score = (v * (vi + params_.gp) - q) / si;
    if (score >= best_score) {  // ties go to the higher level
      best_score = score;
      best = i;
    }
  }
  double delay = 0;
  if (best_score < 0) {
    // No level has positive utility yet; wait for the buffer to drain to
    // the point where the top level's score reaches zero.
    delay = (q - v * (vn + params_.gp)) * tau;
    delay = std::max(0.0, delay);
    best = n;
  }
  if (params_.cap_to_throughput && ctx.last && prev_level_ >= 1 &&
      best > prev_level_) {
    int cap = std::max(1, ladder.highest_level_at_most(ctx.last->measured_bps));
    best = std::max(prev_level_, std::min(best, cap));
  }
  prev_level_ = best;
  return {best, delay};
}

AbmaAlgorithm::AbmaAlgorithm(AbmaParams params,
                             std::shared_ptr<const BufferMap> map)
    : params_(params), map_(std::move(map)) {
  if (!map_) throw std::invalid_argument("abma needs a buffer map");
  if (params_.probe_window < 1 || params_.min_probes < 1 ||
      params_.min_probes > params_.probe_window)
    throw std::invalid_argument("bad abma probe window");
  if (!(params_.eps_stall > 0 && params_.eps_stall < 1))
    throw std::invalid_argument("eps_stall must lie in (0, 1)");
}

Decision AbmaAlgorithm::decide(const DecisionContext& ctx) {
  if (ctx.last && ctx.last->size_bits > 0) {
    unit_times_.push_back((ctx.last->end_s - ctx.last->start_s) /
                          static_cast<double>(ctx.last->size_bits));
    while (unit_times_.size() > static_cast<size_t>(params_.probe_window))
      unit_times_.pop_front();
  }
  if (unit_times_.size() < static_cast<size_t>(params_.min_probes))
    return {1, 0};
  double mean = 0;
  for (double u : unit_times_) mean += u;
  mean /= static_cast<double>(unit_times_.size());
  double var = 0;
  for (double u : unit_times_) var += (u - mean) * (u - mean);
  var /= static_cast<double>(unit_times_.size() - 1);
  double dev = std::sqrt(var);
  const SegmentSizeTable& table = *ctx.table;
  int chosen = 1;
  for (int j = ctx.ladder->level_count(); j >= 1; --j) {
    double s = table.avg_segment_size_bits(j);
    double p = map_->stall_probability(ctx.buffer_s, mean * s, dev * s);
    if (p <= params_.eps_stall) {
      chosen = j;
      break;
    }
  }
  return {chosen, 0};
}

namespace {

double take(ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  double v = it->second;
  params.erase(it);
  return v;
}

void expect_empty(const ParamMap& params, const std::string& id) {
  if (!params.empty())
    throw std::invalid_argument("unknown parameter for " + id + ": " +
                                params.begin()->first);
}

}  // namespace

std::unique_ptr<Algorithm> make_algorithm(const std::string& id,
                                          const ParamMap& params,
                                          const AlgorithmEnv& env) {
  if (!env.ladder) throw std::invalid_argument("algorithm env needs a ladder");
  ParamMap p = params;
  std::unique_ptr<Algorithm> algo;
  if (id == "conventional") {
    ConventionalParams cp;
    cp.alpha = take(p, "alpha", cp.alpha);
    cp.up_margin = take(p, "up_margin", cp.up_margin);
    cp.down_margin = take(p, "down_margin", cp.down_margin);
    cp.full_delay_s = take(p, "full_delay_s", cp.full_delay_s);
    algo = std::make_unique<ConventionalAlgorithm>(cp);
  } else if (id == "panda") {
    PandaParams pp;
    pp.kappa = take(p, "kappa", pp.kappa);
    pp.w_bps = take(p, "w_bps", pp.w_bps);
    pp.alpha = take(p, "alpha", pp.alpha);
    pp.beta = take(p, "beta", pp.beta);
    pp.epsilon = take(p, "epsilon", pp.epsilon);
    pp.b_target_s = take(p, "b_target_s", pp.b_target_s);
    algo = std::make_unique<PandaAlgorithm>(pp);
  } else if (id == "bba") {
    BbaParams bp;
    bp.reservoir_s = take(p, "reservoir_s", bp.reservoir_s);
    bp.cushion_s = take(p, "cushion_s", bp.cushion_s);
    double rf = take(p, "reservoir_frac", -1);
    double cf = take(p, "cushion_frac", -1);
    if (rf >= 0) bp.reservoir_s = rf * env.b_max_s;
    if (cf >= 0) bp.cushion_s = cf * env.b_max_s;
    algo = std::make_unique<BbaAlgorithm>(bp);
  } else if (id == "bola-o" || id == "bola-u") {
    BolaParams lp;
    lp.gp = take(p, "gp", lp.gp);
    lp.v = take(p, "v", lp.v);
    lp.cap_to_throughput = id == "bola-o";
    algo = std::make_unique<BolaAlgorithm>(lp);
  } else if (id == "abma") {
    AbmaParams ap;
    ap.probe_window = static_cast<int>(take(p, "probe_window", ap.probe_window));
    ap.min_probes = static_cast<int>(take(p, "min_probes", ap.min_probes));
    ap.eps_stall = take(p, "eps_stall", ap.eps_stall);
    BufferMapSpec spec;
    spec.tau_s = env.ladder->segment_duration_s();
    spec.b_max_s = env.b_max_s;
    spec.omega = env.omega;
    spec.buffer_step_s = take(p, "map_buffer_step_s", spec.tau_s / 2);
    spec.mean_max_tau = take(p, "map_mean_max_tau", spec.mean_max_tau);
    spec.mean_bins = static_cast<int>(take(p, "map_mean_bins", spec.mean_bins));
    spec.dev_max_tau = take(p, "map_dev_max_tau", spec.dev_max_tau);
    spec.dev_bins = static_cast<int>(take(p, "map_dev_bins", spec.dev_bins));
    spec.runs = static_cast<int>(take(p, "map_runs", spec.runs));
    spec.horizon = static_cast<int>(take(p, "map_horizon", spec.horizon));
    spec.seed = static_cast<uint64_t>(take(p, "map_seed", 1));
    auto map = BufferMap::load_or_precompute(spec, env.map_cache_dir);
    algo = std::make_unique<AbmaAlgorithm>(ap, std::move(map));
  } else {
    throw std::invalid_argument("unknown algorithm id: " + id);
  }
  expect_empty(p, id);
  return algo;
}

const std::vector<std::string>& algorithm_ids() {
  static const std::vector<std::string> ids = {"conventional", "panda", "bba",
                                               "bola-o", "abma"};
  return ids;
}

}  // namespace hasim
