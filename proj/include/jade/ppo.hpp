#ifndef JADE_PPO_HPP
#define JADE_PPO_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "jade/bandit.hpp"
#include "jade/qoe.hpp"
#include "jade/sim.hpp"
#include "jade/tinynet.hpp"

namespace jade {

struct PpoConfig {
  double epsilon = 0.2;       // PPO clip ratio
  double dual_clip_c = 3.0;   // lower-bound constant, must exceed 1 + epsilon
  double gamma_prime = 0.99;  // TD discount
  double lambda_init = -1;    // < 0 means log|A| at train start
  double lambda_lr = 1e-3;    // entropy-weight adaptation rate (see README)
  double h_target = 0.1;
  int n_policy = 5;
  AdamConfig adam;  // lr 1e-4
  int agents = 16;
  int history = 8;  // past chunks in the observation
  std::vector<int> hidden = {128, 128};
  int epochs = 2000;
  int validation_interval = 300;
  uint64_t seed = 1;
  bool use_selector = true;

  void validate() const;
};

struct Observation {
  double buffer_s = 0;
  double buffer_cap_s = 1;
  double last_vmaf = 0;
  std::vector<double> throughput_hist_mbps;  // oldest first, zero-padded front
  std::vector<double> dtime_hist_s;
  std::vector<double> next_sizes_bytes;      // |A| entries for the pending chunk
  std::vector<double> next_vmaf;
  double chunks_remaining_frac = 0;

  // Fixed-layout normalized network input:
  // [buffer, last_vmaf, tput x h, dtime x h, sizes x |A|, vmaf x |A|, remaining]
  std::vector<double> to_vector(const VideoManifest& manifest) const;
};

int observation_dim(int history, int num_levels);

Observation build_observation(const VideoManifest& manifest, const SimConfig& cfg,
                              const SimState& state, const std::vector<StepOutcome>& outcomes,
                              int history);

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double behavior_prob = 0;  // pi_old(a|s) at rollout time
  double entropy = 0;        // behavior-policy entropy at s
  double reward = 0;         // blended QoE*
  std::vector<double> next_obs;
  bool done = false;
};

// -sum p log p with 0 log 0 = 0.
double policy_entropy(const std::vector<double>& probs);

// Mean over steps of entropy / log|A|.
double omega_from_distributions(const std::vector<std::vector<double>>& trajectory);
double omega_from_entropies(const std::vector<double>& entropies, int num_actions);

// EMA standardizer for reward streams.
struct RunningNorm {
  double mean = 0;
  double var = 1;
  double momentum = 0.999;
  double std_floor = 1e-3;

  void update(double x) {
    mean = momentum * mean + (1.0 - momentum) * x;
    const double d = x - mean;
    var = momentum * var + (1.0 - momentum) * d * d;
  }
  double z(double x) const;
};

// Raw per-step reward terms for one episode: chunk-wise linear QoE and the
// DNN score of the trailing window.
struct RewardStreams {
  std::vector<double> lin;
  std::vector<double> dnn;
};
RewardStreams reward_streams(const SessionRecord& session, const LinWeights& w,
                             const MlpModel& qoe_dnn, const FeatureConfig& features);

// Updates both normalizers with the raw terms, then blends the z-scores.
double blended_reward(double lin_raw, double dnn_raw, double omega, RunningNorm& lin_norm,
                      RunningNorm& dnn_norm);

// One-step TD advantages; V(terminal) = 0.
std::vector<double> advantage(const std::vector<Transition>& transitions, const MlpModel& critic,
                              double gamma_prime);

struct DualClipResult {
  double value = 0;
  double d_ratio = 0;  // derivative of the surrogate w.r.t. the ratio
};

DualClipResult dual_clip_loss(double ratio, double adv, double epsilon, double c);

double update_lambda(double lambda, double mean_entropy, double h_target, double lr);

struct PpoStats {
  double actor_objective = 0;   // mean dual-clip surrogate + entropy bonus
  double critic_loss = 0;       // mean squared TD error, last pass
  double mean_entropy = 0;      // behavior entropy of the batch
  double mean_reward = 0;
  double lambda_after = 0;
};

// n_policy passes over the batch; advantages and critic targets are frozen
// from the pre-update critic; lambda is adapted once at the end.
PpoStats ppo_update(const std::vector<Transition>& batch, MlpModel& actor, MlpModel& critic,
                    const PpoConfig& cfg, double& lambda);

struct RunLogRow {
  long long epoch = 0;
  std::string trace_id;
  double mean_entropy = 0;
  double omega = 0;
  double lambda = 0;
  double mean_reward = 0;
  std::optional<double> eval_qoe_lin;
  std::optional<double> eval_qoe_dnn;
};

std::string run_log_to_csv(const std::vector<RunLogRow>& rows);

struct TrainAbrInputs {
  const std::vector<VideoManifest>* manifests = nullptr;
  const std::vector<NetworkTrace>* train_traces = nullptr;
  const std::vector<NetworkTrace>* validation_traces = nullptr;  // optional
  SimConfig sim;
  LinWeights lin_weights;
  const MlpModel* qoe_dnn = nullptr;
  FeatureConfig features;
  // Ablation switch: blend by entropy (default) or freeze omega at a value.
  std::optional<double> freeze_omega;
  // Resume: start from these checkpoints instead of fresh networks.
  const MlpModel* init_actor = nullptr;
  const MlpModel* init_critic = nullptr;
};

struct TrainAbrResult {
  MlpModel actor;
  MlpModel critic;
  std::vector<RunLogRow> log;
  DiscountedUcb selector;
  double omega_final = 0;
  double lambda_final = 0;
};

// run_state is an opaque JSON blob accepted back via resume_state.
using CheckpointFn = std::function<void(long long epoch, const MlpModel& actor,
                                        const MlpModel& critic, const std::string& run_state)>;

TrainAbrResult train_abr(const TrainAbrInputs& in, const PpoConfig& cfg,
                         const BanditConfig& bandit_cfg,
                         const CheckpointFn& on_checkpoint = nullptr,
                         const std::string& resume_state = "");

// Greedy policy adapter for a trained actor.
PolicyFn make_actor_policy(const MlpModel& actor, const VideoManifest& manifest, SimConfig cfg,
                           int history);

}  // namespace jade

#endif
