#include "hasim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <queue>
#include <stdexcept>

#include <json.hpp>

namespace hasim {

double SessionLog::total_stall_s() const {
  double total = 0;
  for (const auto& s : stalls) total += s.end_s - s.start_s;
  return total;
}

namespace {

constexpr double kEps = 1e-9;

enum class EventKind : int {
  kDownloadComplete = 0,
  kBufferEmpty = 1,
  kPlaybackStart = 2,
  kPlaybackResume = 3,
  kSchedulerWakeup = 4,
};

struct Event {
  double time = 0;
  EventKind kind = EventKind::kSchedulerWakeup;
  uint64_t seq = 0;
  uint64_t gen = 0;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.seq > b.seq;
  }
};

struct InFlight {
  int64_t k = 0;
  int level = 1;
  int64_t size_bits = 0;
  double request_s = 0;
  double buffer_at_decision_s = 0;
};

struct StallCursor {
  double start_s = 0;
  int64_t segment = -1;  // -1: waiting segment not yet known
};

class Session {
 public:
  Session(const ThroughputTrace& trace, const RepresentationLadder& ladder,
          const SegmentSizeTable& table, const ClientConfig& cfg,
          Algorithm& algorithm)
      : trace_(trace),
        ladder_(ladder),
        table_(table),
        cfg_(cfg),
        algo_(algorithm),
        tau_(ladder.segment_duration_s()) {
    if (cfg_.omega < 1) throw std::invalid_argument("omega must be >= 1");
    if (!(cfg_.b_max_s >= cfg_.omega * tau_))
      throw std::invalid_argument("b_max must be >= omega * tau");
    session_end_ = cfg_.session_end_s >= 0
                       ? std::min(cfg_.session_end_s, trace_.duration_s())
                       : trace_.duration_s();
  }

  SessionLog run() {
    if (session_end_ > 0) decide_next();
    while (!queue_.empty() && !closed_) {
      Event ev = queue_.top();
      queue_.pop();
      if (ev.kind == EventKind::kBufferEmpty && ev.gen != empty_gen_) continue;
      if (truncated_pending_ && ev.time >= session_end_ - 1e-12) break;
      advance_to(ev.time);
      dispatch(ev);
    }
    if (!closed_) {
      if (truncated_pending_) {
        advance_to(session_end_);
        playing_ = false;
        close(session_end_);
      } else {
        close(clock_);
      }
    }
    return std::move(log_);
  }

 private:
  void advance_to(double t) {
    if (t > clock_) {
      if (playing_) {
        double d = t - clock_;
        played_ += d;
        buffer_ = std::max(0.0, buffer_ - d);
      }
      clock_ = t;
    }
  }

  void schedule(EventKind kind, double t, uint64_t gen = 0) {
    queue_.push(Event{std::max(t, clock_), kind, seq_++, gen});
  }

  void schedule_empty() {
    ++empty_gen_;
    schedule(EventKind::kBufferEmpty, clock_ + buffer_, empty_gen_);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::kDownloadComplete: on_download_complete(); break;
      case EventKind::kBufferEmpty: on_buffer_empty(ev); break;
      case EventKind::kPlaybackStart: on_playback_start(); break;
      case EventKind::kPlaybackResume: on_playback_resume(); break;
      case EventKind::kSchedulerWakeup: on_wakeup(); break;
    }
  }

  void on_download_complete() {
    const InFlight& inf = *in_flight_;
    double dur = clock_ - inf.request_s;
    SegmentRecord rec;
    rec.index = inf.k;
    rec.level = inf.level;
    rec.request_s = inf.request_s;
    rec.start_s = inf.request_s;
    rec.end_s = clock_;
    rec.size_bits = inf.size_bits;
    rec.buffer_at_decision_s = inf.buffer_at_decision_s;
    rec.avg_throughput_bps =
        dur > 0 ? trace_.integrate(inf.request_s, clock_) / dur : 0;
    log_.records.push_back(rec);
    last_ = LastDownload{inf.k,    inf.level, inf.size_bits, inf.request_s,
                         clock_,  dur > 0 ? inf.size_bits / dur : 0};
    in_flight_.reset();
    buffer_ += tau_;
    if (!playback_started_ && buffer_ + kEps >= cfg_.omega * tau_)
      schedule(EventKind::kPlaybackStart, clock_);
    else if (stall_ && buffer_ + kEps >= cfg_.omega * tau_)
      schedule(EventKind::kPlaybackResume, clock_);
    if (playing_) schedule_empty();
    decide_next();
  }

  void on_buffer_empty(const Event& ev) {
    if (!playing_ || ev.gen != empty_gen_) return;
    buffer_ = 0;
    playing_ = false;
    if (eos_ && !in_flight_ && !truncated_pending_) {
      close(clock_);
      return;
    }
    int64_t waiting = in_flight_           ? in_flight_->k
                      : truncated_pending_ ? hung_segment_
                                           : int64_t{-1};
    stall_ = StallCursor{clock_, waiting};
  }

  void on_playback_start() {
    if (playback_started_) return;
    playback_started_ = true;
    log_.initial_buffering_s = clock_;
    begin_playing();
  }

  void on_playback_resume() {
    if (!stall_) return;
    log_.stalls.push_back({stall_->start_s, clock_, stall_->segment});
    stall_.reset();
    begin_playing();
  }

  void begin_playing() {
    playing_ = true;
    schedule_empty();
    if (waiting_for_room_) {
      waiting_for_room_ = false;
      schedule(EventKind::kSchedulerWakeup, clock_);
    }
  }

  void decide_next() {
    if (eos_) {
      maybe_close_idle();
      return;
    }
    if (clock_ >= session_end_ - 1e-12) {
      eos_ = true;
      maybe_close_idle();
      return;
    }
    DecisionContext ctx;
    ctx.next_segment = next_k_;
    ctx.clock_s = clock_;
    ctx.buffer_s = buffer_;
    ctx.b_max_s = cfg_.b_max_s;
    ctx.last = last_;
    ctx.ladder = &ladder_;
    ctx.table = &table_;
    Decision d = algo_.decide(ctx);
    if (d.level < 1 || d.level > ladder_.level_count())
      throw std::logic_error("algorithm chose a level outside the ladder");
    if (!(d.delay_s >= 0) || !std::isfinite(d.delay_s))
      throw std::logic_error("algorithm returned a bad delay");
    pending_ = InFlight{next_k_, d.level, 0, 0, buffer_};
    schedule(EventKind::kSchedulerWakeup,
             std::min(clock_ + d.delay_s, session_end_));
  }

  void on_wakeup() {
    if (eos_ || !pending_) return;
    if (clock_ >= session_end_ - 1e-12) {
      eos_ = true;
      pending_.reset();
      maybe_close_idle();
      return;
    }
    double overshoot = buffer_ + tau_ - cfg_.b_max_s;
    if (overshoot > kEps) {
      if (playing_) {
        schedule(EventKind::kSchedulerWakeup,
                 std::min(clock_ + overshoot, session_end_));
      } else {
        if (!in_flight_)
          throw std::logic_error("buffer full with nothing in flight");
        waiting_for_room_ = true;
      }
      return;
    }
    InFlight inf = *pending_;
    pending_.reset();
    inf.size_bits = table_.size_bits(inf.level, inf.k);
    inf.request_s = clock_;
    if (stall_ && stall_->segment < 0) stall_->segment = inf.k;
    for (auto& s : log_.stalls)
      if (s.segment < 0) s.segment = inf.k;
    auto dt = trace_.download_time(clock_, static_cast<double>(inf.size_bits));
    if (!dt) {
      // The network died for good; this download can never finish. The
      // session is cut off at session_end with the request still hanging.
      truncated_pending_ = true;
      log_.truncated = true;
      eos_ = true;
      hung_segment_ = inf.k;
      if (stall_ && stall_->segment < 0) stall_->segment = inf.k;
      return;
    }
    in_flight_ = inf;
    next_k_ = inf.k + 1;
    schedule(EventKind::kDownloadComplete, clock_ + *dt);
  }

  void maybe_close_idle() {
    if (!eos_ || in_flight_ || truncated_pending_) return;
    if (playing_) return;  // plays out; the empty event closes the session
    if (buffer_ + kEps >= cfg_.omega * tau_) return;  // start/resume pending
    close(clock_);
  }

  void close(double t) {
    closed_ = true;
    if (stall_) {
      log_.stalls.push_back({stall_->start_s, t, stall_->segment});
      stall_.reset();
    }
    for (auto& s : log_.stalls)
      if (s.segment < 0)
        s.segment = log_.records.empty() ? 0 : log_.records.back().index;
    for (const auto& s : log_.stalls)
      if (s.segment >= 1 && s.segment <= log_.segment_count())
        log_.records[static_cast<size_t>(s.segment) - 1].stalled = true;
    log_.close_s = t;
    if (!playback_started_) log_.initial_buffering_s = t;
    log_.playback_started = playback_started_;
    log_.played_s = played_;
    log_.residual_buffer_s = buffer_;
    log_.tau_s = tau_;
    log_.omega = cfg_.omega;
    log_.b_max_s = cfg_.b_max_s;
    for (const auto& lv : ladder_.levels()) log_.ladder_bps.push_back(lv.nominal_bps);
  }

  const ThroughputTrace& trace_;
  const RepresentationLadder& ladder_;
  const SegmentSizeTable& table_;
  ClientConfig cfg_;
  Algorithm& algo_;
  double tau_;
  double session_end_ = 0;

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  uint64_t seq_ = 0;
  uint64_t empty_gen_ = 0;

  double clock_ = 0;
  double buffer_ = 0;
  double played_ = 0;
  bool playing_ = false;
  bool playback_started_ = false;
  bool eos_ = false;
  bool closed_ = false;
  bool waiting_for_room_ = false;
  bool truncated_pending_ = false;
  int64_t next_k_ = 1;
  int64_t hung_segment_ = -1;
  std::optional<InFlight> in_flight_;
  std::optional<InFlight> pending_;
  std::optional<LastDownload> last_;
  std::optional<StallCursor> stall_;

  SessionLog log_;
};

}  // namespace

SessionLog run_session(const ThroughputTrace& trace,
                       const RepresentationLadder& ladder,
                       const SegmentSizeTable& table, const ClientConfig& cfg,
                       Algorithm& algorithm) {
  return Session(trace, ladder, table, cfg, algorithm).run();
}

double buffer_level_at(const SessionLog& log, double t) {
  if (t < 0) return 0;
  t = std::min(t, log.close_s);
  double media = 0;
  for (const auto& rec : log.records)
    if (rec.end_s <= t) media += log.tau_s;
  if (!log.playback_started || t <= log.initial_buffering_s) return media;
  // Subtract played time: the span since playback start minus stall overlap.
  double stalled = 0;
  for (const auto& s : log.stalls)
    stalled += std::max(0.0, std::min(t, s.end_s) - s.start_s);
  double played = (t - log.initial_buffering_s) - stalled;
  return std::max(0.0, media - played);
}

double selected_rate_at(const SessionLog& log, double t) {
  double rate = 0;
  for (const auto& rec : log.records) {
    if (rec.request_s <= t)
      rate = static_cast<double>(log.ladder_bps[static_cast<size_t>(rec.level) - 1]);
    else
      break;
  }
  return rate;
}

void write_session_csv(const SessionLog& log, std::ostream& out) {
  out << "index,level,request_s,start_s,end_s,size_bits,buffer_at_decision_s,"
         "avg_throughput_bps,stalled\n";
  char buf[256];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof(buf),
                  "%lld,%d,%.17g,%.17g,%.17g,%lld,%.17g,%.17g,%d\n",
                  static_cast<long long>(r.index), r.level, r.request_s,
                  r.start_s, r.end_s, static_cast<long long>(r.size_bits),
                  r.buffer_at_decision_s, r.avg_throughput_bps,
                  r.stalled ? 1 : 0);
    out << buf;
  }
}

void write_session_json(const SessionLog& log, std::ostream& out) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["tau_s"] = log.tau_s;
  j["omega"] = log.omega;
  j["b_max_s"] = log.b_max_s;
  j["ladder_bps"] = log.ladder_bps;
  j["initial_buffering_s"] = log.initial_buffering_s;
  j["played_s"] = log.played_s;
  j["close_s"] = log.close_s;
  j["residual_buffer_s"] = log.residual_buffer_s;
  j["playback_started"] = log.playback_started;
  j["truncated"] = log.truncated;
  j["segments"] = nlohmann::json::array();
  for (const auto& r : log.records)
    j["segments"].push_back({{"index", r.index},
                             {"level", r.level},
                             {"request_s", r.request_s},
                             {"start_s", r.start_s},
                             {"end_s", r.end_s},
                             {"size_bits", r.size_bits},
                             {"buffer_at_decision_s", r.buffer_at_decision_s},
                             {"avg_throughput_bps", r.avg_throughput_bps},
                             {"stalled", r.stalled}});
  j["stalls"] = nlohmann::json::array();
  for (const auto& s : log.stalls)
    j["stalls"].push_back(
        {{"start_s", s.start_s}, {"end_s", s.end_s}, {"segment", s.segment}});
  out << j.dump(2) << "\n";
}

SessionLog read_session_json(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  SessionLog log;
  log.tau_s = j.at("tau_s").get<double>();
  log.omega = j.at("omega").get<int>();
  log.b_max_s = j.at("b_max_s").get<double>();
  log.ladder_bps = j.at("ladder_bps").get<std::vector<int64_t>>();
  log.initial_buffering_s = j.at("initial_buffering_s").get<double>();
  log.played_s = j.at("played_s").get<double>();
  log.close_s = j.at("close_s").get<double>();
  log.residual_buffer_s = j.at("residual_buffer_s").get<double>();
  log.playback_started = j.at("playback_started").get<bool>();
  log.truncated = j.at("truncated").get<bool>();
  for (const auto& s : j.at("segments")) {
    SegmentRecord r;
    r.index = s.at("index").get<int64_t>();
    r.level = s.at("level").get<int>();
    r.request_s = s.at("request_s").get<double>();
    r.start_s = s.at("start_s").get<double>();
    r.end_s = s.at("end_s").get<double>();
    r.size_bits = s.at("size_bits").get<int64_t>();
    r.buffer_at_decision_s = s.at("buffer_at_decision_s").get<double>();
    r.avg_throughput_bps = s.at("avg_throughput_bps").get<double>();
    r.stalled = s.at("stalled").get<bool>();
    log.records.push_back(r);
  }
  for (const auto& s : j.at("stalls"))
    log.stalls.push_back({s.at("start_s").get<double>(),
                          s.at("end_s").get<double>(),
                          s.at("segment").get<int64_t>()});
  return log;
}

}  // namespace hasim
