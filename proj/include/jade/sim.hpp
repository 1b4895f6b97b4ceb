#ifndef JADE_SIM_HPP
#define JADE_SIM_HPP

#include <functional>
#include <vector>

#include "jade/data.hpp"

namespace jade {

struct SimConfig {
  double buffer_cap_s = 60.0;
  double per_chunk_rtt_s = 0.08;
  double drain_granularity_s = 0.5;  // reserved for event-granular players
  bool trace_wraps = true;

  void validate(const VideoManifest& manifest) const;
};

struct TraceCursor {
  std::size_t segment = 0;  // segment i spans [t_i, t_{i+1}) at bandwidth b_i
  double offset_s = 0;      // seconds into the segment

  bool operator==(const TraceCursor&) const = default;
};

struct SimState {
  double buffer_s = 0;
  std::size_t chunk_index = 0;
  TraceCursor cursor;
  double wall_clock_s = 0;
  int last_action = -1;  // bitrate index of the previous chunk, -1 before any

  bool operator==(const SimState&) const = default;
};

struct StepOutcome {
  double download_time_s = 0;
  double rebuffer_s = 0;
  double sleep_s = 0;
  double chunk_vmaf = 0;
  double chunk_bitrate_mbps = 0;
  double vmaf_change = 0;  // vs previous delivered chunk, 0 for the first
  bool done = false;
};

// Buffer bookkeeping for one chunk arrival; shared verbatim by the MPC
// lookahead so both sides run the same arithmetic.
struct BufferAdvance {
  double rebuffer_s = 0;
  double sleep_s = 0;
  double buffer_after_s = 0;
};
BufferAdvance advance_buffer(double buffer_before_s, double download_time_s,
                             double chunk_duration_s, double buffer_cap_s);

SimState sim_reset(const VideoManifest& manifest, const NetworkTrace& trace,
                   const SimConfig& cfg, double start_offset_s);

std::pair<SimState, StepOutcome> sim_step(const VideoManifest& manifest,
                                          const NetworkTrace& trace, const SimConfig& cfg,
                                          const SimState& state, int action);

// observation -> bitrate index; past outcomes arrive in playback order
using PolicyFn = std::function<int(const SimState&, const std::vector<StepOutcome>&)>;

struct RolloutResult {
  SessionRecord session;
  std::vector<StepOutcome> outcomes;
};

RolloutResult rollout(const PolicyFn& policy, const VideoManifest& manifest,
                      const NetworkTrace& trace, const SimConfig& cfg,
                      double start_offset_s = 0, const std::string& session_id = "session");

// One StepOutcome per line.
std::string outcomes_to_jsonl(const std::vector<StepOutcome>& outcomes);

// Past chunk throughputs in Mbps (delivered size / download time), oldest
// first; chunk sizes recovered from the ladder level of each outcome.
std::vector<double> throughput_history(const VideoManifest& manifest,
                                       const std::vector<StepOutcome>& outcomes);

}  // namespace jade

#endif
