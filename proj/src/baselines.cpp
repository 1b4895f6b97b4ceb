#include "jade/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace jade {

int rate_based_select(const std::vector<double>& throughput_hist_mbps,
                      const VideoManifest& manifest, int window) {
  if (throughput_hist_mbps.empty()) return 0;
  const std::size_t n = std::min<std::size_t>(window, throughput_hist_mbps.size());
  double inv_sum = 0;
  for (std::size_t i = throughput_hist_mbps.size() - n; i < throughput_hist_mbps.size(); ++i)
    inv_sum += 1.0 / throughput_hist_mbps[i];
  const double harmonic = static_cast<double>(n) / inv_sum;
  int pick = 0;
  for (std::size_t l = 0; l < manifest.num_levels(); ++l)
    if (manifest.ladder_mbps[l] <= harmonic) pick = static_cast<int>(l);
  return pick;
}

int bba_select(double buffer_s, const BbaConfig& cfg, const VideoManifest& manifest) {
  const int top = static_cast<int>(manifest.num_levels()) - 1;
  if (buffer_s < cfg.reservoir_s) return 0;
  if (buffer_s >= cfg.reservoir_s + cfg.cushion_s) return top;
  const double frac = (buffer_s - cfg.reservoir_s) / cfg.cushion_s;
  return static_cast<int>(std::floor(frac * top));
}

namespace {

struct MpcObjective {
  virtual ~MpcObjective() = default;
  // score of delivering (vmaf, rebuffer) as horizon step h given the
  // previous delivered vmaf (prev < 0 when there is none)
  virtual double step_score(int h, double vmaf, double rebuffer_s, double prev_vmaf) = 0;
};

struct LinObjective final : MpcObjective {
  const LinWeights& w;
  explicit LinObjective(const LinWeights& weights) : w(weights) {}
  double step_score(int, double vmaf, double rebuffer_s, double prev_vmaf) override {
    return qoe_lin_step(vmaf, rebuffer_s, prev_vmaf >= 0, prev_vmaf, w);
  }
};

// Scores each horizon step with the DNN model on a rolling window stitched
// from the played history and the candidate future.
struct DnnObjective final : MpcObjective {
  const MlpModel& model;
  FeatureConfig features;
  SessionRecord window;  // history tail, extended per candidate step

  DnnObjective(const MlpModel& m, const FeatureConfig& fc, const VideoManifest& manifest,
               const std::vector<StepOutcome>& history)
      : model(m), features(fc) {
    window.session_id = "mpc";
    const std::size_t keep = std::min<std::size_t>(history.size(), fc.window);
    for (std::size_t i = history.size() - keep; i < history.size(); ++i) {
      window.vmaf.push_back(history[i].chunk_vmaf);
      window.bitrate_mbps.push_back(history[i].chunk_bitrate_mbps);
      window.rebuffer_s.push_back(history[i].rebuffer_s);
    }
    (void)manifest;
  }

  std::size_t base_len = 0;  // set before each candidate walk

  double step_score(int h, double vmaf, double rebuffer_s, double) override {
    window.vmaf.resize(base_len + h);
    window.bitrate_mbps.resize(base_len + h);
    window.rebuffer_s.resize(base_len + h);
    window.vmaf.push_back(vmaf);
    window.bitrate_mbps.push_back(0);  // bitrate lane unused by candidates
    window.rebuffer_s.push_back(rebuffer_s);
    return forward(model, extract_features(window, window.length() - 1, features))[0];
  }
};

int mpc_search(const VideoManifest& manifest, const SimConfig& cfg, const SimState& state,
               const std::vector<double>& throughput_hist_mbps, MpcState& mpc,
               const MpcConfig& mpc_cfg, MpcObjective& objective) {
  const int levels = static_cast<int>(manifest.num_levels());
  const std::size_t chunk = state.chunk_index;
  const int horizon =
      static_cast<int>(std::min<std::size_t>(mpc_cfg.horizon, manifest.num_chunks() - chunk));
  if (horizon <= 0) return 0;

  // robust throughput: harmonic mean discounted by the worst recent error
  double predicted = 0;
  if (!throughput_hist_mbps.empty()) {
    const std::size_t n =
        std::min<std::size_t>(mpc_cfg.throughput_window, throughput_hist_mbps.size());
    double inv = 0;
    for (std::size_t i = throughput_hist_mbps.size() - n; i < throughput_hist_mbps.size(); ++i)
      inv += 1.0 / throughput_hist_mbps[i];
    predicted = static_cast<double>(n) / inv;
    double max_err = 0;
    const std::size_t ne = std::min<std::size_t>(mpc_cfg.error_window, mpc.relative_errors.size());
    for (std::size_t i = mpc.relative_errors.size() - ne; i < mpc.relative_errors.size(); ++i)
      max_err = std::max(max_err, mpc.relative_errors[i]);
    predicted /= 1.0 + max_err;
  }
  mpc.last_prediction_mbps = predicted;
  if (predicted <= 0) return 0;  // cold start

  const double prev_vmaf = state.last_action >= 0 && chunk > 0
                               ? manifest.vmaf[chunk - 1][state.last_action]
                               : -1.0;

  // exhaustive |A|^horizon walk, lexicographic order, strict improvement
  std::vector<int> seq(horizon, 0);
  std::vector<int> best_seq;
  double best_score = -std::numeric_limits<double>::infinity();
  auto dnn = dynamic_cast<DnnObjective*>(&objective);
  while (true) {
    if (dnn) dnn->base_len = dnn->window.length();
    double score = 0;
    double buffer = state.buffer_s;
    double last_q = prev_vmaf;
    for (int h = 0; h < horizon; ++h) {
      const int a = seq[h];
      const double mbit = manifest.sizes_bytes[chunk + h][a] * 8.0 / 1e6;
      const double dtime = cfg.per_chunk_rtt_s + mbit / predicted;
      const BufferAdvance adv =
          advance_buffer(buffer, dtime, manifest.chunk_duration_s, cfg.buffer_cap_s);
      const double q = manifest.vmaf[chunk + h][a];
      score += objective.step_score(h, q, adv.rebuffer_s, last_q);
      buffer = adv.buffer_after_s;
      last_q = q;
    }
    if (score > best_score) {
      best_score = score;
      best_seq = seq;
    }
    int pos = horizon - 1;
    while (pos >= 0 && seq[pos] == levels - 1) seq[pos--] = 0;
    if (pos < 0) break;
    ++seq[pos];
  }
  return best_seq[0];
}

}  // namespace

int robust_mpc_select(const VideoManifest& manifest, const SimConfig& cfg,
                      const SimState& state, const std::vector<double>& throughput_hist_mbps,
                      MpcState& mpc, const MpcConfig& mpc_cfg) {
  LinObjective obj(mpc_cfg.weights);
  return mpc_search(manifest, cfg, state, throughput_hist_mbps, mpc, mpc_cfg, obj);
}

int robust_mpc_select_dnn(const VideoManifest& manifest, const SimConfig& cfg,
                          const SimState& state,
                          const std::vector<double>& throughput_hist_mbps, MpcState& mpc,
                          const MpcConfig& mpc_cfg, const MlpModel& qoe_dnn,
                          const FeatureConfig& features,
                          const std::vector<StepOutcome>& history) {
  DnnObjective obj(qoe_dnn, features, manifest, history);
  return mpc_search(manifest, cfg, state, throughput_hist_mbps, mpc, mpc_cfg, obj);
}

PolicyFn make_rate_policy(const VideoManifest& manifest) {
  return [&manifest](const SimState&, const std::vector<StepOutcome>& outcomes) {
    return rate_based_select(throughput_history(manifest, outcomes), manifest);
  };
}

PolicyFn make_bba_policy(const VideoManifest& manifest, BbaConfig cfg) {
  return [&manifest, cfg](const SimState& state, const std::vector<StepOutcome>&) {
    return bba_select(state.buffer_s, cfg, manifest);
  };
}

namespace {

// Realized relative error of the previous prediction, recorded before the
// next decision.
void record_mpc_error(MpcState& mpc, const VideoManifest& manifest,
                      const std::vector<StepOutcome>& outcomes) {
  if (outcomes.empty() || mpc.last_prediction_mbps <= 0) return;
  const auto hist = throughput_history(manifest, outcomes);
  const double actual = hist.back();
  if (actual <= 0) return;
  mpc.relative_errors.push_back(std::fabs(mpc.last_prediction_mbps - actual) / actual);
}

}  // namespace

PolicyFn make_mpc_policy(const VideoManifest& manifest, SimConfig sim_cfg, MpcConfig cfg) {
  auto mpc = std::make_shared<MpcState>();
  return [&manifest, sim_cfg, cfg, mpc](const SimState& state,
                                        const std::vector<StepOutcome>& outcomes) {
    record_mpc_error(*mpc, manifest, outcomes);
    return robust_mpc_select(manifest, sim_cfg, state, throughput_history(manifest, outcomes),
                             *mpc, cfg);
  };
}

PolicyFn make_mpc_dnn_policy(const VideoManifest& manifest, SimConfig sim_cfg, MpcConfig cfg,
                             const MlpModel& qoe_dnn, FeatureConfig features) {
  auto mpc = std::make_shared<MpcState>();
  return [&manifest, sim_cfg, cfg, mpc, &qoe_dnn, features](
             const SimState& state, const std::vector<StepOutcome>& outcomes) {
    record_mpc_error(*mpc, manifest, outcomes);
    return robust_mpc_select_dnn(manifest, sim_cfg, state,
                                 throughput_history(manifest, outcomes), *mpc, cfg, qoe_dnn,
                                 features, outcomes);
  };
}

}  // namespace jade
