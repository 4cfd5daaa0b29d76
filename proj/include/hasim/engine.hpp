#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hasim/abr.hpp"
#include "hasim/trace.hpp"
#include "hasim/video.hpp"

namespace hasim {

struct ClientConfig {
  double b_max_s = 16;
  int omega = 2;             // segments buffered before playback starts/resumes
  double session_end_s = -1; // < 0: run to the end of the trace
};

struct SegmentRecord {
  int64_t index = 0;  // 1-based position in the session
  int level = 1;
  double request_s = 0;
  double start_s = 0;
  double end_s = 0;
  int64_t size_bits = 0;
  double buffer_at_decision_s = 0;
  double avg_throughput_bps = 0;  // mean available throughput over the download
  bool stalled = false;           // a stall was attributed to this segment
};

struct StallEvent {
  double start_s = 0;
  double end_s = 0;
  int64_t segment = 0;  // segment being waited on; may exceed the last logged
                        // index when the session was cut off mid-download
};

struct SessionLog {
  std::vector<SegmentRecord> records;
  std::vector<StallEvent> stalls;
  std::vector<int64_t> ladder_bps;  // nominal rate per level, for offline use
  double tau_s = 0;
  int omega = 0;
  double b_max_s = 0;
  double initial_buffering_s = 0;  // time until playback first started
  double played_s = 0;             // media seconds rendered
  double close_s = 0;              // wall-clock session close
  double residual_buffer_s = 0;    // media downloaded but never played
  bool playback_started = false;
  bool truncated = false;  // ended with a download that could never finish

  int64_t segment_count() const {
    return static_cast<int64_t>(records.size());
  }
  double total_stall_s() const;
};

SessionLog run_session(const ThroughputTrace& trace,
                       const RepresentationLadder& ladder,
                       const SegmentSizeTable& table, const ClientConfig& cfg,
                       Algorithm& algorithm);

// Buffer level reconstructed from the log at time t.
double buffer_level_at(const SessionLog& log, double t);

// Nominal rate of the most recently requested segment at time t, or 0
// before the first request.
double selected_rate_at(const SessionLog& log, double t);

void write_session_csv(const SessionLog& log, std::ostream& out);
void write_session_json(const SessionLog& log, std::ostream& out);
SessionLog read_session_json(std::istream& in);

}  // namespace hasim
