#include "jade/ppo.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "jade/parallel.hpp"

namespace jade {

void PpoConfig::validate() const {
  if (!(epsilon > 0 && epsilon < 1)) throw Error(Err::InvalidClipConfig, "epsilon outside (0,1)");
  if (!(dual_clip_c > 1.0 + epsilon))
    throw Error(Err::InvalidClipConfig, "c must exceed 1 + epsilon");
  if (!(gamma_prime > 0 && gamma_prime <= 1))
    throw Error(Err::RangeError, "gamma_prime outside (0,1]");
  if (n_policy < 1) throw Error(Err::RangeError, "n_policy must be >= 1");
  if (agents < 1) throw Error(Err::RangeError, "agents must be >= 1");
  if (history < 1) throw Error(Err::RangeError, "history must be >= 1");
}

int observation_dim(int history, int num_levels) { return 3 + 2 * history + 2 * num_levels; }

std::vector<double> Observation::to_vector(const VideoManifest& manifest) const {
  const double ladder_max = manifest.ladder_mbps.back();
  const double size_den = ladder_max * 1e6 / 8.0 * manifest.chunk_duration_s;
  std::vector<double> v;
  v.reserve(3 + throughput_hist_mbps.size() + dtime_hist_s.size() + next_sizes_bytes.size() +
            next_vmaf.size());
  v.push_back(buffer_s / buffer_cap_s);
  v.push_back(last_vmaf / 100.0);
  for (double x : throughput_hist_mbps) v.push_back(x / ladder_max);
  for (double x : dtime_hist_s) v.push_back(x / 10.0);
  for (double x : next_sizes_bytes) v.push_back(x / size_den);
  for (double x : next_vmaf) v.push_back(x / 100.0);
  v.push_back(chunks_remaining_frac);
  return v;
}

Observation build_observation(const VideoManifest& manifest, const SimConfig& cfg,
                              const SimState& state, const std::vector<StepOutcome>& outcomes,
                              int history) {
  Observation obs;
  obs.buffer_s = state.buffer_s;
  obs.buffer_cap_s = cfg.buffer_cap_s;
  obs.last_vmaf = outcomes.empty() ? 0.0 : outcomes.back().chunk_vmaf;

  const auto tput = throughput_history(manifest, outcomes);
  obs.throughput_hist_mbps.assign(history, 0.0);
  obs.dtime_hist_s.assign(history, 0.0);
  const std::size_t n = std::min<std::size_t>(history, outcomes.size());
  for (std::size_t i = 0; i < n; ++i) {
    obs.throughput_hist_mbps[history - n + i] = tput[outcomes.size() - n + i];
    obs.dtime_hist_s[history - n + i] = outcomes[outcomes.size() - n + i].download_time_s;
  }

  const std::size_t chunk = state.chunk_index;
  if (chunk < manifest.num_chunks()) {
    obs.next_sizes_bytes = manifest.sizes_bytes[chunk];
    obs.next_vmaf = manifest.vmaf[chunk];
  } else {
    obs.next_sizes_bytes.assign(manifest.num_levels(), 0.0);
    obs.next_vmaf.assign(manifest.num_levels(), 0.0);
  }
  obs.chunks_remaining_frac =
      static_cast<double>(manifest.num_chunks() - std::min(chunk, manifest.num_chunks())) /
      static_cast<double>(manifest.num_chunks());
  return obs;
}

double policy_entropy(const std::vector<double>& probs) {
  double h = 0;
  for (double p : probs)
    if (p > 0) h -= p * std::log(p);
  return h;
}

double omega_from_entropies(const std::vector<double>& entropies, int num_actions) {
  if (entropies.empty()) throw Error(Err::EmptyTrajectory, "omega needs at least one step");
  double sum = 0;
  for (double h : entropies) sum += h;
  const double w = sum / static_cast<double>(entropies.size()) / std::log(num_actions);
  return std::clamp(w, 0.0, 1.0);
}

double omega_from_distributions(const std::vector<std::vector<double>>& trajectory) {
  if (trajectory.empty()) throw Error(Err::EmptyTrajectory, "omega needs at least one step");
  std::vector<double> entropies;
  entropies.reserve(trajectory.size());
  for (const auto& probs : trajectory) entropies.push_back(policy_entropy(probs));
  return omega_from_entropies(entropies, static_cast<int>(trajectory.front().size()));
}

double RunningNorm::z(double x) const {
  return (x - mean) / std::max(std::sqrt(var), std_floor);
}

RewardStreams reward_streams(const SessionRecord& session, const LinWeights& w,
                             const MlpModel& qoe_dnn, const FeatureConfig& features) {
  RewardStreams s;
  const std::size_t len = session.length();
  s.lin.reserve(len);
  s.dnn.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    s.lin.push_back(qoe_lin_step(session.vmaf[t], session.rebuffer_s[t], t > 0,
                                 t > 0 ? session.vmaf[t - 1] : 0.0, w));
    s.dnn.push_back(forward(qoe_dnn, extract_features(session, t, features))[0]);
  }
  return s;
}

double blended_reward(double lin_raw, double dnn_raw, double omega, RunningNorm& lin_norm,
                      RunningNorm& dnn_norm) {
  lin_norm.update(lin_raw);
  dnn_norm.update(dnn_raw);
  return omega * lin_norm.z(lin_raw) + (1.0 - omega) * dnn_norm.z(dnn_raw);
}

std::vector<double> advantage(const std::vector<Transition>& transitions, const MlpModel& critic,
                              double gamma_prime) {
  std::vector<double> adv(transitions.size());
  par::for_each(transitions.size(), [&](std::size_t t) {
    const auto& tr = transitions[t];
    const double v_s = forward(critic, tr.obs)[0];
    const double v_next = tr.done ? 0.0 : forward(critic, tr.next_obs)[0];
    adv[t] = tr.reward + gamma_prime * v_next - v_s;
  });
  return adv;
}

DualClipResult dual_clip_loss(double ratio, double adv, double epsilon, double c) {
  if (!(ratio > 0)) throw Error(Err::RangeError, "ratio must be > 0");
  if (!(c > 1.0 + epsilon)) throw Error(Err::InvalidClipConfig, "c must exceed 1 + epsilon");
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  const double unclipped_term = ratio * adv;
  const double clipped_term = clipped * adv;

  DualClipResult res;
  if (adv >= 0) {
    if (unclipped_term <= clipped_term) {
      res.value = unclipped_term;
      res.d_ratio = adv;
    } else {
      res.value = clipped_term;
      res.d_ratio = 0;
    }
    return res;
  }
  double value, d_ratio;
  if (unclipped_term <= clipped_term) {
    value = unclipped_term;
    d_ratio = adv;
  } else {
    value = clipped_term;
    d_ratio = 0;
  }
  const double floor_term = c * adv;
  if (value < floor_term) {
    res.value = floor_term;
    res.d_ratio = 0;
  } else {
    res.value = value;
    res.d_ratio = d_ratio;
  }
  return res;
}

double update_lambda(double lambda, double mean_entropy, double h_target, double lr) {
  return std::max(0.0, lambda + lr * (h_target - mean_entropy));
}

// ---------------------------------------------------------------------------
// PPO update

namespace {

struct UpdatePartial {
  Gradients actor;
  Gradients critic;
  double objective = 0;
  double critic_loss = 0;
};

}  // namespace

PpoStats ppo_update(const std::vector<Transition>& batch, MlpModel& actor, MlpModel& critic,
                    const PpoConfig& cfg, double& lambda) {
  cfg.validate();
  if (batch.empty()) throw Error(Err::EmptyTrajectory, "ppo_update needs a nonempty batch");

  // advantages and critic targets are frozen from the pre-update critic
  const std::vector<double> adv = advantage(batch, critic, cfg.gamma_prime);
  std::vector<double> target(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const double v_s = forward(critic, batch[t].obs)[0];
    target[t] = adv[t] + v_s;  // reward + gamma' V(s')
  }

  PpoStats stats;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (int pass = 0; pass < cfg.n_policy; ++pass) {
    UpdatePartial zero{zero_gradients(actor), zero_gradients(critic), 0, 0};
    UpdatePartial total = par::striped_reduce<UpdatePartial>(
        batch.size(), 16, zero,
        [&](std::size_t begin, std::size_t end, UpdatePartial& acc) {
          ForwardCache cache;
          for (std::size_t t = begin; t < end; ++t) {
            const Transition& tr = batch[t];
            // actor: maximize dual-clip surrogate + lambda * entropy
            const auto probs = forward(actor, tr.obs, &cache);
            const double ratio = std::max(probs[tr.action], 1e-12) / tr.behavior_prob;
            const DualClipResult dc = dual_clip_loss(ratio, adv[t], cfg.epsilon, cfg.dual_clip_c);
            const double h = policy_entropy(probs);
            acc.objective += dc.value + lambda * h;
            std::vector<double> dL_dp(probs.size(), 0.0);
            for (std::size_t k = 0; k < probs.size(); ++k) {
              const double dH_dpk = -(std::log(std::max(probs[k], 1e-12)) + 1.0);
              dL_dp[k] = -lambda * dH_dpk;
            }
            dL_dp[tr.action] -= dc.d_ratio / tr.behavior_prob;
            acc.actor.add(backward(actor, cache, dL_dp));

            // critic: squared error against the frozen bootstrap target
            const double v = forward(critic, tr.obs, &cache)[0];
            const double err = v - target[t];
            acc.critic_loss += err * err;
            acc.critic.add(backward(critic, cache, {2.0 * err}));
          }
        },
        [](UpdatePartial& a, const UpdatePartial& b) {
          a.actor.add(b.actor);
          a.critic.add(b.critic);
          a.objective += b.objective;
          a.critic_loss += b.critic_loss;
        });
    total.actor.scale(inv);
    total.critic.scale(inv);
    adam_step(actor, total.actor, cfg.adam);
    adam_step(critic, total.critic, cfg.adam);
    stats.actor_objective = total.objective * inv;
    stats.critic_loss = total.critic_loss * inv;
  }

  double entropy_sum = 0, reward_sum = 0;
  for (const auto& tr : batch) {
    entropy_sum += tr.entropy;
    reward_sum += tr.reward;
  }
  stats.mean_entropy = entropy_sum * inv;
  stats.mean_reward = reward_sum * inv;
  lambda = update_lambda(lambda, stats.mean_entropy, cfg.h_target, cfg.lambda_lr);
  stats.lambda_after = lambda;
  return stats;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

struct RawStep {
  std::vector<double> obs;
  int action = 0;
  double prob = 0;
  double entropy = 0;
  double lin_raw = 0;
  double dnn_raw = 0;
  bool done = false;
};

struct AgentRollout {
  std::vector<RawStep> steps;
};

int sample_action(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    cum += probs[a];
    if (u < cum) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

int greedy_action(const std::vector<double>& probs) {
  int best = 0;
  for (std::size_t a = 1; a < probs.size(); ++a)
    if (probs[a] > probs[best]) best = static_cast<int>(a);
  return best;
}

AgentRollout rollout_agent(const MlpModel& actor, const VideoManifest& manifest,
                           const NetworkTrace& trace, const SimConfig& sim_cfg,
                           const TrainAbrInputs& in, int history, double start_offset,
                           Rng rng) {
  AgentRollout out;
  SessionRecord session;
  session.session_id = "train";
  std::vector<StepOutcome> outcomes;
  SimState state = sim_reset(manifest, trace, sim_cfg, start_offset);
  while (state.chunk_index < manifest.num_chunks()) {
    RawStep step;
    step.obs = build_observation(manifest, sim_cfg, state, outcomes, history).to_vector(manifest);
    const auto probs = forward(actor, step.obs);
    step.action = sample_action(probs, rng);
    step.prob = probs[step.action];
    step.entropy = policy_entropy(probs);

    auto [next, outcome] = sim_step(manifest, trace, sim_cfg, state, step.action);
    outcomes.push_back(outcome);
    session.vmaf.push_back(outcome.chunk_vmaf);
    session.bitrate_mbps.push_back(outcome.chunk_bitrate_mbps);
    session.rebuffer_s.push_back(outcome.rebuffer_s);

    const std::size_t t = session.length() - 1;
    step.lin_raw = qoe_lin_step(session.vmaf[t], session.rebuffer_s[t], t > 0,
                                t > 0 ? session.vmaf[t - 1] : 0.0, in.lin_weights);
    step.dnn_raw = forward(*in.qoe_dnn, extract_features(session, t, in.features))[0];
    step.done = outcome.done;
    out.steps.push_back(std::move(step));
    state = next;
  }
  return out;
}

struct ValidationScores {
  double qoe_lin_mean = 0;
  double qoe_dnn_mean = 0;
};

ValidationScores validate_policy(const MlpModel& actor, const TrainAbrInputs& in,
                                 const PpoConfig& cfg) {
  const auto& traces = *in.validation_traces;
  const auto& manifest = (*in.manifests)[0];
  std::vector<double> lin(traces.size()), dnn(traces.size());
  par::for_each(traces.size(), [&](std::size_t i) {
    const auto policy = make_actor_policy(actor, manifest, in.sim, cfg.history);
    const auto result = rollout(policy, manifest, traces[i], in.sim, 0, "val");
    lin[i] = qoe_lin(result.session, in.lin_weights);
    dnn[i] = forward(*in.qoe_dnn,
                     extract_features(result.session, result.session.length() - 1, in.features))[0];
  });
  ValidationScores v;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    v.qoe_lin_mean += lin[i];
    v.qoe_dnn_mean += dnn[i];
  }
  v.qoe_lin_mean /= static_cast<double>(traces.size());
  v.qoe_dnn_mean /= static_cast<double>(traces.size());
  return v;
}

std::string run_state_json(long long epoch, double omega, double lambda,
                           const RunningNorm& lin_norm, const RunningNorm& dnn_norm,
                           const DiscountedUcb& bandit, const Rng& rng) {
  nlohmann::json j;
  j["format"] = "jade-run/v1";
  j["epoch"] = epoch;
  j["omega"] = omega;
  j["lambda"] = lambda;
  j["lin_norm"] = {{"mean", lin_norm.mean}, {"var", lin_norm.var}};
  j["dnn_norm"] = {{"mean", dnn_norm.mean}, {"var", dnn_norm.var}};
  j["bandit"] = nlohmann::json::parse(bandit.to_json());
  j["rng"] = rng.state();
  return j.dump(2) + "\n";
}

}  // namespace

PolicyFn make_actor_policy(const MlpModel& actor, const VideoManifest& manifest, SimConfig cfg,
                           int history) {
  return [&actor, &manifest, cfg, history](const SimState& state,
                                           const std::vector<StepOutcome>& outcomes) {
    const auto obs = build_observation(manifest, cfg, state, outcomes, history);
    return greedy_action(forward(actor, obs.to_vector(manifest)));
  };
}

std::string run_log_to_csv(const std::vector<RunLogRow>& rows) {
  std::string out =
      "# jade-schema: run-log/v1\n"
      "epoch,trace_id,mean_entropy,omega,lambda,mean_reward,eval_qoe_lin,eval_qoe_dnn\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch);
    out += ',' + r.trace_id;
    out += ',' + fmt_double(r.mean_entropy);
    out += ',' + fmt_double(r.omega);
    out += ',' + fmt_double(r.lambda);
    out += ',' + fmt_double(r.mean_reward);
    out += ',';
    if (r.eval_qoe_lin) out += fmt_double(*r.eval_qoe_lin);
    out += ',';
    if (r.eval_qoe_dnn) out += fmt_double(*r.eval_qoe_dnn);
    out += '\n';
  }
  return out;
}

TrainAbrResult train_abr(const TrainAbrInputs& in, const PpoConfig& cfg,
                         const BanditConfig& bandit_cfg, const CheckpointFn& on_checkpoint,
                         const std::string& resume_state) {
  cfg.validate();
  if (!in.manifests || in.manifests->empty())
    throw Error(Err::EmptyPool, "train_abr needs at least one manifest");
  if (!in.train_traces || in.train_traces->empty())
    throw Error(Err::EmptyPool, "train_abr needs at least one trace");
  if (!in.qoe_dnn) throw Error(Err::SchemaError, "train_abr needs the DNN QoE model");

  const int levels = static_cast<int>((*in.manifests)[0].num_levels());
  for (const auto& m : *in.manifests)
    if (static_cast<int>(m.num_levels()) != levels)
      throw Error(Err::ShapeMismatch, "manifests disagree on ladder size");
  const int obs_dim = observation_dim(cfg.history, levels);

  MlpSpec actor_spec{obs_dim, cfg.hidden, levels, Head::Softmax};
  MlpSpec critic_spec{obs_dim, cfg.hidden, 1, Head::Linear};
  MlpModel actor = in.init_actor ? *in.init_actor : mlp_init(actor_spec, cfg.seed);
  MlpModel critic = in.init_critic ? *in.init_critic : mlp_init(critic_spec, cfg.seed + 1);
  if (!(actor.spec == actor_spec) || !(critic.spec == critic_spec))
    throw Error(Err::ShapeMismatch, "checkpoint spec does not match configuration");

  std::vector<std::string> trace_ids;
  for (const auto& t : *in.train_traces) trace_ids.push_back(t.id);
  DiscountedUcb bandit(trace_ids, bandit_cfg);

  double omega = 1.0;  // linear model dominates until entropy is measured
  double lambda = cfg.lambda_init < 0 ? std::log(levels) : cfg.lambda_init;
  RunningNorm lin_norm, dnn_norm;
  Rng master(cfg.seed);
  long long start_epoch = 1;

  if (!resume_state.empty()) {
    try {
      const auto j = nlohmann::json::parse(resume_state);
      if (j.at("format").get<std::string>() != "jade-run/v1")
        throw Error(Err::SchemaError, "unknown run state format");
      start_epoch = j.at("epoch").get<long long>() + 1;
      omega = j.at("omega").get<double>();
      lambda = j.at("lambda").get<double>();
      lin_norm.mean = j.at("lin_norm").at("mean").get<double>();
      lin_norm.var = j.at("lin_norm").at("var").get<double>();
      dnn_norm.mean = j.at("dnn_norm").at("mean").get<double>();
      dnn_norm.var = j.at("dnn_norm").at("var").get<double>();
      bandit = DiscountedUcb::from_json(j.at("bandit").dump());
      master.set_state(j.at("rng").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Err::SchemaError, std::string("run state: ") + e.what());
    }
  }

  std::vector<RunLogRow> log;
  for (long long epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    const std::string trace_id =
        cfg.use_selector ? bandit.select(epoch)
                         : (*in.train_traces)[master.below(in.train_traces->size())].id;
    const NetworkTrace* trace = nullptr;
    for (const auto& t : *in.train_traces)
      if (t.id == trace_id) trace = &t;
    const VideoManifest& manifest = (*in.manifests)[master.below(in.manifests->size())];

    // per-agent streams drawn up front so rollouts can run in parallel
    std::vector<Rng> agent_rngs;
    std::vector<double> offsets;
    for (int a = 0; a < cfg.agents; ++a) {
      agent_rngs.push_back(master.split(static_cast<uint64_t>(a)));
      offsets.push_back(agent_rngs.back().uniform(0.0, trace->span_s()));
    }

    const double omega_used = in.freeze_omega.value_or(omega);
    std::vector<AgentRollout> rollouts(cfg.agents);
    par::for_each(cfg.agents, [&](std::size_t a) {
      rollouts[a] = rollout_agent(actor, manifest, *trace, in.sim, in, cfg.history, offsets[a],
                                  agent_rngs[a]);
    });

    // blend rewards sequentially in (agent, step) order: the normalizers are
    // running state
    std::vector<Transition> batch;
    for (auto& ar : rollouts) {
      for (std::size_t t = 0; t < ar.steps.size(); ++t) {
        RawStep& s = ar.steps[t];
        Transition tr;
        tr.obs = std::move(s.obs);
        tr.action = s.action;
        tr.behavior_prob = s.prob;
        tr.entropy = s.entropy;
        tr.reward = blended_reward(s.lin_raw, s.dnn_raw, omega_used, lin_norm, dnn_norm);
        tr.done = s.done;
        if (!tr.done) tr.next_obs = ar.steps[t + 1].obs;
        batch.push_back(std::move(tr));
      }
    }

    const PpoStats stats = ppo_update(batch, actor, critic, cfg, lambda);
    const double norm_entropy =
        std::clamp(stats.mean_entropy / std::log(levels), 0.0, 1.0);
    omega = norm_entropy;
    bandit.record(trace_id, norm_entropy);

    RunLogRow row;
    row.epoch = epoch;
    row.trace_id = trace_id;
    row.mean_entropy = stats.mean_entropy;
    row.omega = omega_used;
    row.lambda = lambda;
    row.mean_reward = stats.mean_reward;
    const bool validate_now =
        in.validation_traces && !in.validation_traces->empty() &&
        (epoch % cfg.validation_interval == 0 || epoch == cfg.epochs);
    if (validate_now) {
      const ValidationScores v = validate_policy(actor, in, cfg);
      row.eval_qoe_lin = v.qoe_lin_mean;
      row.eval_qoe_dnn = v.qoe_dnn_mean;
    }
    log.push_back(row);

    if (on_checkpoint && (epoch % cfg.validation_interval == 0 || epoch == cfg.epochs))
      on_checkpoint(epoch, actor, critic,
                    run_state_json(epoch, omega, lambda, lin_norm, dnn_norm, bandit, master));
  }

  TrainAbrResult result{std::move(actor), std::move(critic), std::move(log), std::move(bandit),
                        omega, lambda};
  return result;
}

}  // namespace jade
