#ifndef JADE_BASELINES_HPP
#define JADE_BASELINES_HPP

#include <vector>

#include "jade/qoe.hpp"
#include "jade/sim.hpp"

namespace jade {

// Highest ladder rate at or below the harmonic mean of recent throughput;
// lowest level on a cold start.
int rate_based_select(const std::vector<double>& throughput_hist_mbps,
                      const VideoManifest& manifest, int window = 5);

struct BbaConfig {
  double reservoir_s = 5.0;
  double cushion_s = 30.0;
};

int bba_select(double buffer_s, const BbaConfig& cfg, const VideoManifest& manifest);

struct MpcConfig {
  int horizon = 5;
  int throughput_window = 5;
  int error_window = 5;
  LinWeights weights;
};

// Rolling per-session prediction-error history, owned by the caller.
struct MpcState {
  std::vector<double> relative_errors;
  double last_prediction_mbps = 0;
};

// Robust throughput = harmonic mean / (1 + max recent relative error);
// exhaustive search over |A|^horizon candidate sequences using the shared
// buffer arithmetic; returns the first action of the best sequence.
int robust_mpc_select(const VideoManifest& manifest, const SimConfig& cfg,
                      const SimState& state, const std::vector<double>& throughput_hist_mbps,
                      MpcState& mpc, const MpcConfig& mpc_cfg);

// Experimental: same search, objective scored by the DNN QoE model on the
// rolling window instead of the linear form.
int robust_mpc_select_dnn(const VideoManifest& manifest, const SimConfig& cfg,
                          const SimState& state,
                          const std::vector<double>& throughput_hist_mbps, MpcState& mpc,
                          const MpcConfig& mpc_cfg, const MlpModel& qoe_dnn,
                          const FeatureConfig& features,
                          const std::vector<StepOutcome>& history);

PolicyFn make_rate_policy(const VideoManifest& manifest);
PolicyFn make_bba_policy(const VideoManifest& manifest, BbaConfig cfg);
PolicyFn make_mpc_policy(const VideoManifest& manifest, SimConfig sim_cfg, MpcConfig cfg);
PolicyFn make_mpc_dnn_policy(const VideoManifest& manifest, SimConfig sim_cfg, MpcConfig cfg,
                             const MlpModel& qoe_dnn, FeatureConfig features);

}  // namespace jade

#endif
