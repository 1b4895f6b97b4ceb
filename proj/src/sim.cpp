#include "jade/sim.hpp"

#include <cmath>

#include <json.hpp>

namespace jade {

void SimConfig::validate(const VideoManifest& manifest) const {
  if (!(buffer_cap_s > manifest.chunk_duration_s))
    throw Error(Err::RangeError, "buffer_cap_s must exceed chunk_duration_s");
  if (!(per_chunk_rtt_s >= 0)) throw Error(Err::RangeError, "per_chunk_rtt_s must be >= 0");
  if (!(drain_granularity_s > 0)) throw Error(Err::RangeError, "drain_granularity_s must be > 0");
}

BufferAdvance advance_buffer(double buffer_before_s, double download_time_s,
                             double chunk_duration_s, double buffer_cap_s) {
  BufferAdvance adv;
  adv.rebuffer_s = std::max(0.0, download_time_s - buffer_before_s);
  double buffer_mid = std::max(buffer_before_s - download_time_s, 0.0) + chunk_duration_s;
  if (buffer_mid > buffer_cap_s) {
    adv.sleep_s = buffer_mid - buffer_cap_s;
    buffer_mid = buffer_cap_s;
  }
  adv.buffer_after_s = buffer_mid;
  return adv;
}

namespace {

// Segment i covers [t_i, t_{i+1}) at bandwidth b_i. In wrap mode the last
// sample only marks the end of the loop; otherwise its bandwidth extends
// indefinitely past the end (cursor pinned to the final segment).
struct TraceView {
  const NetworkTrace& trace;
  bool wraps;

  std::size_t num_segments() const { return trace.samples.size() - 1; }

  double segment_len(std::size_t seg) const {
    return trace.samples[seg + 1].first - trace.samples[seg].first;
  }

  double bandwidth(std::size_t seg) const { return trace.samples[seg].second; }

  // Advance by dt seconds of pure time.
  void advance_time(TraceCursor& cur, double dt) const {
    while (dt > 0) {
      if (cur.segment >= num_segments()) {  // non-wrap tail: infinite segment
        cur.offset_s += dt;
        return;
      }
      const double remain = segment_len(cur.segment) - cur.offset_s;
      if (dt < remain) {
        cur.offset_s += dt;
        return;
      }
      dt -= remain;
      next_segment(cur);
    }
  }

  // Seconds needed to move `mbit` of data from the cursor, advancing it.
  double transfer(TraceCursor& cur, double mbit) const {
    double elapsed = 0;
    while (mbit > 0) {
      if (cur.segment >= num_segments()) {
        const double bw = trace.samples.back().second;
        const double dt = mbit / bw;
        cur.offset_s += dt;
        return elapsed + dt;
      }
      const double bw = bandwidth(cur.segment);
      const double remain = segment_len(cur.segment) - cur.offset_s;
      const double capacity = bw * remain;
      if (mbit < capacity) {
        const double dt = mbit / bw;
        cur.offset_s += dt;
        return elapsed + dt;
      }
      elapsed += remain;
      mbit -= capacity;
      next_segment(cur);
    }
    return elapsed;
  }

 private:
  void next_segment(TraceCursor& cur) const {
    cur.offset_s = 0;
    ++cur.segment;
    if (cur.segment >= num_segments() && wraps) cur.segment = 0;
  }
};

}  // namespace

SimState sim_reset(const VideoManifest& manifest, const NetworkTrace& trace,
                   const SimConfig& cfg, double start_offset_s) {
  manifest.validate();
  trace.validate();
  cfg.validate(manifest);
  const double span = trace.span_s();
  double off = start_offset_s;
  if (cfg.trace_wraps) {
    off = std::fmod(off, span);
    if (off < 0) off += span;
  } else if (!(off >= 0 && off < span)) {
    throw Error(Err::OffsetOutOfRange,
                "start_offset " + fmt_double(start_offset_s) + " outside trace span");
  }
  SimState s;
  TraceView view{trace, cfg.trace_wraps};
  view.advance_time(s.cursor, off);
  return s;
}

std::pair<SimState, StepOutcome> sim_step(const VideoManifest& manifest,
                                          const NetworkTrace& trace, const SimConfig& cfg,
                                          const SimState& state, int action) {
  const std::size_t n_chunks = manifest.num_chunks();
  if (state.chunk_index >= n_chunks)
    throw Error(Err::EpisodeFinished, "chunk_index = " + std::to_string(state.chunk_index));
  if (action < 0 || action >= static_cast<int>(manifest.num_levels()))
    throw Error(Err::RangeError, "action " + std::to_string(action) + " outside ladder");

  SimState next = state;
  TraceView view{trace, cfg.trace_wraps};

  const double mbit = manifest.sizes_bytes[state.chunk_index][action] * 8.0 / 1e6;
  view.advance_time(next.cursor, cfg.per_chunk_rtt_s);
  const double download = cfg.per_chunk_rtt_s + view.transfer(next.cursor, mbit);

  const BufferAdvance adv =
      advance_buffer(state.buffer_s, download, manifest.chunk_duration_s, cfg.buffer_cap_s);
  view.advance_time(next.cursor, adv.sleep_s);

  next.buffer_s = adv.buffer_after_s;
  next.wall_clock_s = state.wall_clock_s + (download + adv.sleep_s);
  next.chunk_index = state.chunk_index + 1;
  next.last_action = action;

  StepOutcome out;
  out.download_time_s = download;
  out.rebuffer_s = adv.rebuffer_s;
  out.sleep_s = adv.sleep_s;
  out.chunk_vmaf = manifest.vmaf[state.chunk_index][action];
  out.chunk_bitrate_mbps = manifest.ladder_mbps[action];
  out.vmaf_change = state.last_action < 0
                        ? 0.0
                        : out.chunk_vmaf - manifest.vmaf[state.chunk_index - 1][state.last_action];
  out.done = next.chunk_index == n_chunks;
  return {next, out};
}

RolloutResult rollout(const PolicyFn& policy, const VideoManifest& manifest,
                      const NetworkTrace& trace, const SimConfig& cfg, double start_offset_s,
                      const std::string& session_id) {
  RolloutResult result;
  result.session.session_id = session_id;
  SimState state = sim_reset(manifest, trace, cfg, start_offset_s);
  while (state.chunk_index < manifest.num_chunks()) {
    int action;
    try {
      action = policy(state, result.outcomes);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (policy at chunk " +
                                std::to_string(state.chunk_index) + ")");
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(e.what()) + " (policy at chunk " +
                               std::to_string(state.chunk_index) + ")");
    }
    auto [next, out] = sim_step(manifest, trace, cfg, state, action);
    result.outcomes.push_back(out);
    result.session.vmaf.push_back(out.chunk_vmaf);
    result.session.bitrate_mbps.push_back(out.chunk_bitrate_mbps);
    result.session.rebuffer_s.push_back(out.rebuffer_s);
    state = next;
  }
  return result;
}

std::vector<double> throughput_history(const VideoManifest& manifest,
                                       const std::vector<StepOutcome>& outcomes) {
  std::vector<double> hist;
  hist.reserve(outcomes.size());
  for (std::size_t c = 0; c < outcomes.size() && c < manifest.num_chunks(); ++c) {
    const auto& ladder = manifest.ladder_mbps;
    std::size_t level = 0;
    for (std::size_t l = 0; l < ladder.size(); ++l)
      if (ladder[l] == outcomes[c].chunk_bitrate_mbps) level = l;
    const double mbit = manifest.sizes_bytes[c][level] * 8.0 / 1e6;
    hist.push_back(outcomes[c].download_time_s > 0 ? mbit / outcomes[c].download_time_s : 0.0);
  }
  return hist;
}

std::string outcomes_to_jsonl(const std::vector<StepOutcome>& outcomes) {
  std::string out;
  for (const auto& o : outcomes) {
    nlohmann::json j;
    j["download_time_s"] = o.download_time_s;
    j["rebuffer_s"] = o.rebuffer_s;
    j["sleep_s"] = o.sleep_s;
    j["chunk_vmaf"] = o.chunk_vmaf;
    j["chunk_bitrate_mbps"] = o.chunk_bitrate_mbps;
    j["vmaf_change"] = o.vmaf_change;
    j["done"] = o.done;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace jade
