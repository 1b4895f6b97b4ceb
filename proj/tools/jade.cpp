#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "jade/baselines.hpp"
#include "jade/bandit.hpp"
#include "jade/data.hpp"
#include "jade/parallel.hpp"
#include "jade/ppo.hpp"
#include "jade/qoe.hpp"
#include "jade/report.hpp"
#include "jade/sim.hpp"
#include "jade/synth.hpp"
#include "jade/tinynet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JADE_OUT_ROOT prefixes relative output directories.
std::string resolve_out(const std::string& out) {
  const char* root = std::getenv("JADE_OUT_ROOT");
  if (root && *root && fs::path(out).is_relative()) return (fs::path(root) / out).string();
  return out;
}

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  jade::write_text_file((fs::path(dir) / name).string(), text);
}

// Config file values take precedence over flags; see README.
json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(jade::read_text_file(path));
}

template <typename T>
void override_from(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

void apply_sim_config(const json& cfg, jade::SimConfig& sim) {
  if (!cfg.contains("sim")) return;
  const json& j = cfg.at("sim");
  override_from(j, "buffer_cap_s", sim.buffer_cap_s);
  override_from(j, "per_chunk_rtt_s", sim.per_chunk_rtt_s);
  override_from(j, "drain_granularity_s", sim.drain_granularity_s);
  override_from(j, "trace_wraps", sim.trace_wraps);
}

void apply_feature_config(const json& cfg, jade::FeatureConfig& fc) {
  if (!cfg.contains("features")) return;
  const json& j = cfg.at("features");
  override_from(j, "window", fc.window);
  override_from(j, "vmaf_den", fc.vmaf_den);
  override_from(j, "bitrate_den_mbps", fc.bitrate_den_mbps);
  override_from(j, "rebuffer_clamp_s", fc.rebuffer_clamp_s);
}

std::string identity_table_csv(const std::vector<std::pair<std::string, double>>& rows) {
  std::string out = "# jade-schema: identity-rate/v1\nmodel,identity_rate_pct\n";
  for (const auto& [name, pct] : rows) out += name + ',' + jade::fmt_double(pct) + '\n';
  return out;
}

int run_ingest(const std::string& traces_dir, const std::string& manifest_path,
               const std::string& ratings_dir, const std::string& out_dir) {
  if (!traces_dir.empty()) {
    const auto traces = jade::load_trace_dir(traces_dir);
    std::size_t samples = 0;
    for (const auto& t : traces) samples += t.samples.size();
    std::cout << "traces: " << traces.size() << " files, " << samples << " samples\n";
    if (!out_dir.empty())
      for (const auto& t : traces)
        jade::save_trace(t, (fs::path(out_dir) / "traces" / (t.id + ".txt")).string());
  }
  if (!manifest_path.empty()) {
    const auto manifest = jade::load_manifest(manifest_path);
    std::cout << "manifest: " << manifest.num_chunks() << " chunks x " << manifest.num_levels()
              << " levels, chunk " << manifest.chunk_duration_s << " s\n";
    if (!out_dir.empty()) jade::save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  }
  if (!ratings_dir.empty()) {
    const auto d = jade::load_ratings(ratings_dir);
    std::cout << "ratings: " << d.queries.size() << " queries, " << d.sessions.size()
              << " sessions, " << d.user_ids().size() << " users, " << d.scores.size()
              << " scores\n";
    if (!out_dir.empty()) jade::save_ratings(d, (fs::path(out_dir) / "ratings").string());
  }
  return 0;
}

struct QoeCmdArgs {
  std::string ratings_dir, out_dir, config_path;
  jade::QoeTrainConfig train;
  double train_fraction = 0.8;
  uint64_t split_seed = 1;
};

void apply_qoe_config(const json& cfg, QoeCmdArgs& a) {
  apply_feature_config(cfg, a.train.features);
  if (!cfg.contains("qoe")) return;
  const json& j = cfg.at("qoe");
  override_from(j, "iters", a.train.iters);
  override_from(j, "batch_size", a.train.batch_size);
  override_from(j, "eval_interval", a.train.eval_interval);
  override_from(j, "hidden", a.train.hidden);
  override_from(j, "learning_rate", a.train.adam.learning_rate);
  override_from(j, "seed", a.train.seed);
  override_from(j, "train_fraction", a.train_fraction);
}

int run_train_qoe(QoeCmdArgs a) {
  apply_qoe_config(load_config(a.config_path), a);
  const auto dataset = jade::load_ratings(a.ratings_dir);
  auto [train, test] = jade::split_dataset(dataset, a.train_fraction, a.split_seed);
  std::cout << "split: " << train.sessions.size() << " train / " << test.sessions.size()
            << " test sessions\n";

  auto dnn = jade::train_qoe_dnn(train, test, a.train);
  auto lin = jade::train_qoe_lin(train, test, a.train);

  const auto pairs = jade::enumerate_pairs(test);
  const double ir_dnn = jade::identity_rate(jade::dnn_scorer(dnn.model, a.train.features), test, pairs);
  const jade::LinWeights lw = lin.weights;
  const double ir_lin = jade::identity_rate(
      [lw](const jade::SessionRecord& s) { return jade::qoe_lin(s, lw); }, test, pairs);
  // offline-optimal MOS: memorized means over every rating, like the upper
  // bound it stands for
  const jade::MosTable mos(dataset);
  const double ir_mos = jade::identity_rate(mos.as_score_fn(), test, pairs);

  jade::save_model(dnn.model, (fs::path(a.out_dir) / "qoe_dnn.json").string());
  jade::save_lin_weights(lin.weights, (fs::path(a.out_dir) / "qoe_lin.json").string());
  write_file(a.out_dir, "qoe_dnn_curve.csv", jade::curve_to_csv(dnn.curve));
  write_file(a.out_dir, "qoe_lin_curve.csv", jade::curve_to_csv(lin.curve));
  write_file(a.out_dir, "identity_rate.csv",
             identity_table_csv({{"qoe_lin", ir_lin}, {"mos", ir_mos}, {"qoe_dnn", ir_dnn}}));
  std::cout << "identity rate (test pairs: " << pairs.size() << "): qoe_dnn " << ir_dnn
            << "%, qoe_lin " << ir_lin << "%, mos " << ir_mos << "%\n";
  return 0;
}

int run_eval_qoe(const std::string& ratings_dir, const std::string& dnn_path,
                 const std::string& lin_path, const std::string& out_dir, double train_fraction,
                 uint64_t split_seed, const std::string& config_path) {
  jade::FeatureConfig fc;
  apply_feature_config(load_config(config_path), fc);
  const auto dataset = jade::load_ratings(ratings_dir);
  auto [train, test] = jade::split_dataset(dataset, train_fraction, split_seed);
  (void)train;
  const auto pairs = jade::enumerate_pairs(test);
  std::vector<std::pair<std::string, double>> table;
  if (!dnn_path.empty()) {
    const auto model = jade::load_model(dnn_path);
    fc.window = model.spec.input_dim / 3;
    table.emplace_back("qoe_dnn", jade::identity_rate(jade::dnn_scorer(model, fc), test, pairs));
  }
  if (!lin_path.empty()) {
    const auto lw = jade::load_lin_weights(lin_path);
    table.emplace_back("qoe_lin", jade::identity_rate(
                                      [lw](const jade::SessionRecord& s) {
                                        return jade::qoe_lin(s, lw);
                                      },
                                      test, pairs));
  }
  const jade::MosTable mos(dataset);
  table.emplace_back("mos", jade::identity_rate(mos.as_score_fn(), test, pairs));
  write_file(out_dir, "identity_rate.csv", identity_table_csv(table));
  for (const auto& [name, pct] : table) std::cout << name << ": " << pct << "%\n";
  return 0;
}

struct AbrCmdArgs {
  std::string traces_dir, val_traces_dir, manifest_path, dnn_path, lin_path, out_dir, config_path;
  jade::PpoConfig ppo;
  jade::BanditConfig bandit;
  jade::SimConfig sim;
  bool no_selector = false;
  bool resume = false;
  double freeze_omega = -1;  // <0 disables the ablation
};

void apply_abr_config(const json& cfg, AbrCmdArgs& a) {
  apply_sim_config(cfg, a.sim);
  if (cfg.contains("ppo")) {
    const json& j = cfg.at("ppo");
    override_from(j, "epsilon", a.ppo.epsilon);
    override_from(j, "dual_clip_c", a.ppo.dual_clip_c);
    override_from(j, "gamma_prime", a.ppo.gamma_prime);
    override_from(j, "lambda_init", a.ppo.lambda_init);
    override_from(j, "lambda_lr", a.ppo.lambda_lr);
    override_from(j, "h_target", a.ppo.h_target);
    override_from(j, "n_policy", a.ppo.n_policy);
    override_from(j, "learning_rate", a.ppo.adam.learning_rate);
    override_from(j, "agents", a.ppo.agents);
    override_from(j, "history", a.ppo.history);
    override_from(j, "hidden", a.ppo.hidden);
    override_from(j, "epochs", a.ppo.epochs);
    override_from(j, "validation_interval", a.ppo.validation_interval);
    override_from(j, "seed", a.ppo.seed);
  }
  if (cfg.contains("bandit")) {
    const json& j = cfg.at("bandit");
    override_from(j, "gamma", a.bandit.gamma);
    override_from(j, "b", a.bandit.b);
  }
}

int run_train_abr(AbrCmdArgs a) {
  apply_abr_config(load_config(a.config_path), a);
  a.ppo.use_selector = !a.no_selector;

  const auto traces = jade::load_trace_dir(a.traces_dir);
  std::vector<jade::NetworkTrace> val_traces;
  if (!a.val_traces_dir.empty()) val_traces = jade::load_trace_dir(a.val_traces_dir);
  const std::vector<jade::VideoManifest> manifests{jade::load_manifest(a.manifest_path)};
  const auto qoe_dnn = jade::load_model(a.dnn_path);

  jade::TrainAbrInputs in;
  in.manifests = &manifests;
  in.train_traces = &traces;
  in.validation_traces = val_traces.empty() ? nullptr : &val_traces;
  in.sim = a.sim;
  in.lin_weights = jade::load_lin_weights(a.lin_path);
  in.qoe_dnn = &qoe_dnn;
  in.features.window = qoe_dnn.spec.input_dim / 3;
  if (a.freeze_omega >= 0) in.freeze_omega = a.freeze_omega;

  std::string resume_state;
  std::optional<jade::MlpModel> init_actor, init_critic;
  std::vector<jade::RunLogRow> prior_log;
  const auto state_path = (fs::path(a.out_dir) / "run_state.json").string();
  const auto log_path = (fs::path(a.out_dir) / "run_log.csv").string();
  if (a.resume) {
    resume_state = jade::read_text_file(state_path);
    init_actor = jade::load_model((fs::path(a.out_dir) / "actor.json").string());
    init_critic = jade::load_model((fs::path(a.out_dir) / "critic.json").string());
    in.init_actor = &*init_actor;
    in.init_critic = &*init_critic;
    prior_log = jade::parse_run_log(jade::read_text_file(log_path));
  }

  fs::create_directories(a.out_dir);
  auto checkpoint = [&](long long, const jade::MlpModel& actor, const jade::MlpModel& critic,
                        const std::string& run_state) {
    jade::save_model(actor, (fs::path(a.out_dir) / "actor.json").string());
    jade::save_model(critic, (fs::path(a.out_dir) / "critic.json").string());
    jade::write_text_file(state_path, run_state);
  };

  auto result = jade::train_abr(in, a.ppo, a.bandit, checkpoint, resume_state);

  std::vector<jade::RunLogRow> full_log = std::move(prior_log);
  full_log.insert(full_log.end(), result.log.begin(), result.log.end());
  jade::write_text_file(log_path, jade::run_log_to_csv(full_log));
  jade::write_text_file((fs::path(a.out_dir) / "selector.json").string(),
                        result.selector.to_json());
  jade::save_model(result.actor, (fs::path(a.out_dir) / "actor.json").string());
  jade::save_model(result.critic, (fs::path(a.out_dir) / "critic.json").string());
  std::cout << "trained " << full_log.size() << " epochs, final omega "
            << result.omega_final << ", lambda " << result.lambda_final << "\n";
  return 0;
}

struct EvalCmdArgs {
  std::string traces_dir, manifest_path, dnn_path, lin_path, out_dir, config_path;
  std::vector<std::string> abrs;
  jade::SimConfig sim;
  jade::MpcConfig mpc;
  jade::BbaConfig bba;
  int history = 8;
};

int run_eval_abr(EvalCmdArgs a) {
  const json cfg = load_config(a.config_path);
  apply_sim_config(cfg, a.sim);

  const auto traces = jade::load_trace_dir(a.traces_dir);
  const auto manifest = jade::load_manifest(a.manifest_path);
  std::optional<jade::MlpModel> qoe_dnn;
  jade::FeatureConfig fc;
  apply_feature_config(cfg, fc);
  if (!a.dnn_path.empty()) {
    qoe_dnn = jade::load_model(a.dnn_path);
    fc.window = qoe_dnn->spec.input_dim / 3;
  }
  jade::LinWeights lw;
  if (!a.lin_path.empty()) lw = jade::load_lin_weights(a.lin_path);

  jade::EvalInputs in;
  in.traces = &traces;
  in.manifest = &manifest;
  in.sim = a.sim;
  in.lin_weights = lw;
  in.qoe_dnn = qoe_dnn ? &*qoe_dnn : nullptr;
  in.features = fc;

  a.mpc.weights = lw;
  std::vector<jade::MlpModel> actors;  // keep checkpoints alive
  actors.reserve(a.abrs.size());
  for (const auto& spec : a.abrs) {
    jade::AbrUnderTest abr;
    if (spec.rfind("jade:", 0) == 0) {
      actors.push_back(jade::load_model(spec.substr(5)));
      abr.name = "jade";
      abr.actor = &actors.back();
      abr.history = a.history;
    } else {
      abr.name = spec;
      abr.bba = a.bba;
      abr.mpc = a.mpc;
    }
    in.abrs.push_back(std::move(abr));
  }
  // actors vector may reallocate while filling; rebind pointers
  std::size_t actor_idx = 0;
  for (auto& abr : in.abrs)
    if (abr.name == "jade") abr.actor = &actors[actor_idx++];

  const auto out = jade::run_eval(in);
  write_file(a.out_dir, "sessions.csv", jade::session_rows_to_csv(out.report.rows));
  write_file(a.out_dir, "aggregate.csv", jade::aggregate_to_csv(out.report.aggregate()));
  write_file(a.out_dir, "cdf_qoe_lin.csv", jade::cdf_to_csv(out.report, false));
  write_file(a.out_dir, "cdf_qoe_dnn.csv", jade::cdf_to_csv(out.report, true));
  for (const auto& [key, text] : out.session_logs)
    write_file((fs::path(a.out_dir) / "sessions").string(), key + ".jsonl", text);
  std::cout << out.report.rows.size() << " sessions across " << in.abrs.size() << " abrs\n";
  return 0;
}

int run_report(const std::vector<std::string>& run_logs, const std::vector<std::string>& evals,
               const std::string& out_dir) {
  for (std::size_t i = 0; i < run_logs.size(); ++i) {
    const auto log = jade::parse_run_log(jade::read_text_file(run_logs[i]));
    const std::string suffix = run_logs.size() > 1 ? "_" + std::to_string(i) : "";
    write_file(out_dir, "omega_curve" + suffix + ".csv", jade::omega_curve_csv(log));
    write_file(out_dir, "learning_curve" + suffix + ".csv", jade::learning_curve_csv(log));
    write_file(out_dir, "selection_pdf" + suffix + ".csv", jade::selection_pdf_csv(log));
  }
  if (!evals.empty()) {
    std::vector<jade::SessionRow> merged;
    for (const auto& path : evals) {
      const auto rows = jade::parse_session_rows(jade::read_text_file(path));
      merged.insert(merged.end(), rows.begin(), rows.end());
    }
    write_file(out_dir, "scatter.csv", jade::scatter_csv(merged));
    jade::EvalReport report;
    report.rows = std::move(merged);
    write_file(out_dir, "cdf_qoe_lin.csv", jade::cdf_to_csv(report, false));
    write_file(out_dir, "cdf_qoe_dnn.csv", jade::cdf_to_csv(report, true));
  }
  return 0;
}

struct SynthCmdArgs {
  std::string out_dir;
  std::size_t traces = 10;
  std::size_t val_traces = 0;
  double lo_mbps = 0.5, hi_mbps = 5.0;
  std::size_t chunks = 48;
  double chunk_duration = 4.0;
  bool ratings = false;
  jade::SynthRatingsConfig ratings_cfg;
  uint64_t seed = 7;
};

int run_synth(const SynthCmdArgs& a) {
  fs::create_directories(a.out_dir);
  if (a.traces > 0) {
    const auto pool = jade::synth_trace_pool(a.traces, a.lo_mbps, a.hi_mbps, a.seed);
    for (const auto& t : pool)
      jade::save_trace(t, (fs::path(a.out_dir) / "traces" / (t.id + ".txt")).string());
  }
  if (a.val_traces > 0) {
    const auto pool = jade::synth_trace_pool(a.val_traces, a.lo_mbps, a.hi_mbps, a.seed + 1, "val");
    for (const auto& t : pool)
      jade::save_trace(t, (fs::path(a.out_dir) / "val_traces" / (t.id + ".txt")).string());
  }
  if (a.chunks > 0)
    jade::save_manifest(jade::synth_manifest(a.chunks, a.chunk_duration, a.seed),
                        (fs::path(a.out_dir) / "manifest.json").string());
  if (a.ratings) {
    jade::SynthRatingsConfig rc = a.ratings_cfg;
    rc.seed = a.seed;
    jade::save_ratings(jade::synth_ratings(rc), (fs::path(a.out_dir) / "ratings").string());
  }
  std::cout << "synthetic corpus written to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-driven ABR toolkit: rank-based QoE models and entropy-aware RL policies"};
  app.require_subcommand(1);

  int threads = 0;
  bool serial = false;
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
  app.add_flag("--serial", serial, "disable parallel kernels");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate inputs and report counts");
  std::string in_traces, in_manifest, in_ratings, in_out;
  ingest->add_option("--traces", in_traces, "trace directory");
  ingest->add_option("--manifest", in_manifest, "manifest json");
  ingest->add_option("--ratings", in_ratings, "ratings directory");
  ingest->add_option("--out", in_out, "write canonical copies here");

  // train-qoe
  auto* tq = app.add_subcommand("train-qoe", "train the rank-based QoE models");
  QoeCmdArgs qoe;
  tq->add_option("--ratings", qoe.ratings_dir)->required();
  tq->add_option("--out", qoe.out_dir)->required();
  tq->add_option("--config", qoe.config_path, "json config (overrides flags)");
  tq->add_option("--iters", qoe.train.iters);
  tq->add_option("--batch-size", qoe.train.batch_size);
  tq->add_option("--eval-interval", qoe.train.eval_interval);
  tq->add_option("--hidden", qoe.train.hidden);
  tq->add_option("--lr", qoe.train.adam.learning_rate);
  tq->add_option("--window", qoe.train.features.window);
  tq->add_option("--bitrate-den", qoe.train.features.bitrate_den_mbps);
  tq->add_option("--train-fraction", qoe.train_fraction);
  tq->add_option("--seed", qoe.train.seed);
  tq->add_option("--split-seed", qoe.split_seed);

  // eval-qoe
  auto* eq = app.add_subcommand("eval-qoe", "identity-rate table for trained models");
  std::string eq_ratings, eq_dnn, eq_lin, eq_out, eq_config;
  double eq_fraction = 0.8;
  uint64_t eq_seed = 1;
  eq->add_option("--ratings", eq_ratings)->required();
  eq->add_option("--qoe-dnn", eq_dnn);
  eq->add_option("--qoe-lin", eq_lin);
  eq->add_option("--out", eq_out)->required();
  eq->add_option("--config", eq_config);
  eq->add_option("--train-fraction", eq_fraction);
  eq->add_option("--split-seed", eq_seed);

  // train-abr
  auto* ta = app.add_subcommand("train-abr", "train the ABR policy with dual-clip PPO");
  AbrCmdArgs abr;
  ta->add_option("--traces", abr.traces_dir)->required();
  ta->add_option("--val-traces", abr.val_traces_dir);
  ta->add_option("--manifest", abr.manifest_path)->required();
  ta->add_option("--qoe-dnn", abr.dnn_path)->required();
  ta->add_option("--qoe-lin", abr.lin_path)->required();
  ta->add_option("--out", abr.out_dir)->required();
  ta->add_option("--config", abr.config_path);
  ta->add_option("--epochs", abr.ppo.epochs);
  ta->add_option("--agents", abr.ppo.agents);
  ta->add_option("--seed", abr.ppo.seed);
  ta->add_option("--lr", abr.ppo.adam.learning_rate);
  ta->add_option("--lambda-lr", abr.ppo.lambda_lr);
  ta->add_option("--lambda-init", abr.ppo.lambda_init);
  ta->add_option("--h-target", abr.ppo.h_target);
  ta->add_option("--n-policy", abr.ppo.n_policy);
  ta->add_option("--epsilon", abr.ppo.epsilon);
  ta->add_option("--dual-clip", abr.ppo.dual_clip_c);
  ta->add_option("--gamma", abr.ppo.gamma_prime);
  ta->add_option("--history", abr.ppo.history);
  ta->add_option("--hidden", abr.ppo.hidden);
  ta->add_option("--validation-interval", abr.ppo.validation_interval);
  ta->add_option("--bandit-gamma", abr.bandit.gamma);
  ta->add_option("--bandit-b", abr.bandit.b);
  ta->add_option("--buffer-cap", abr.sim.buffer_cap_s);
  ta->add_option("--rtt", abr.sim.per_chunk_rtt_s);
  ta->add_option("--freeze-omega", abr.freeze_omega,
                 "ablation: fix the blend weight (1 = linear only, 0 = DNN only)");
  ta->add_flag("--no-selector", abr.no_selector, "random trace choice instead of the bandit");
  ta->add_flag("--resume", abr.resume, "continue from checkpoints in --out");

  // eval-abr
  auto* ea = app.add_subcommand("eval-abr", "roll out ABRs over traces and emit reports");
  EvalCmdArgs ev;
  ea->add_option("--traces", ev.traces_dir)->required();
  ea->add_option("--manifest", ev.manifest_path)->required();
  ea->add_option("--abr", ev.abrs, "rate | bba | mpc | mpc-dnn | jade:<checkpoint>")->required();
  ea->add_option("--qoe-dnn", ev.dnn_path);
  ea->add_option("--qoe-lin", ev.lin_path);
  ea->add_option("--out", ev.out_dir)->required();
  ea->add_option("--config", ev.config_path);
  ea->add_option("--history", ev.history);
  ea->add_option("--mpc-horizon", ev.mpc.horizon);
  ea->add_option("--bba-reservoir", ev.bba.reservoir_s);
  ea->add_option("--bba-cushion", ev.bba.cushion_s);
  ea->add_option("--buffer-cap", ev.sim.buffer_cap_s);
  ea->add_option("--rtt", ev.sim.per_chunk_rtt_s);

  // report
  auto* rp = app.add_subcommand("report", "derive plot-ready csv bundles");
  std::vector<std::string> rp_logs, rp_evals;
  std::string rp_out;
  rp->add_option("--run-log", rp_logs, "train-abr run_log.csv files");
  rp->add_option("--eval", rp_evals, "eval-abr sessions.csv files");
  rp->add_option("--out", rp_out)->required();

  // synth
  auto* sy = app.add_subcommand("synth", "generate synthetic traces/manifest/ratings");
  SynthCmdArgs syn;
  sy->add_option("--out", syn.out_dir)->required();
  sy->add_option("--traces", syn.traces);
  sy->add_option("--val-traces", syn.val_traces);
  sy->add_option("--lo-mbps", syn.lo_mbps);
  sy->add_option("--hi-mbps", syn.hi_mbps);
  sy->add_option("--chunks", syn.chunks);
  sy->add_option("--chunk-duration", syn.chunk_duration);
  sy->add_flag("--ratings", syn.ratings);
  sy->add_option("--queries", syn.ratings_cfg.n_queries);
  sy->add_option("--sessions-per-query", syn.ratings_cfg.sessions_per_query);
  sy->add_option("--users", syn.ratings_cfg.users);
  sy->add_option("--raters-per-query", syn.ratings_cfg.raters_per_query);
  sy->add_option("--raters-per-session", syn.ratings_cfg.raters_per_session);
  sy->add_option("--session-len", syn.ratings_cfg.session_len);
  sy->add_option("--noise-lo", syn.ratings_cfg.noise_lo);
  sy->add_option("--noise-hi", syn.ratings_cfg.noise_hi);
  sy->add_option("--seed", syn.seed);

  CLI11_PARSE(app, argc, argv);

  if (serial) jade::par::set_parallel(false);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*ingest) return run_ingest(in_traces, in_manifest, in_ratings, resolve_out(in_out));
    if (*tq) {
      qoe.out_dir = resolve_out(qoe.out_dir);
      fs::create_directories(qoe.out_dir);
      return run_train_qoe(qoe);
    }
    if (*eq) return run_eval_qoe(eq_ratings, eq_dnn, eq_lin, resolve_out(eq_out), eq_fraction,
                                 eq_seed, eq_config);
    if (*ta) {
      abr.out_dir = resolve_out(abr.out_dir);
      return run_train_abr(abr);
    }
    if (*ea) {
      ev.out_dir = resolve_out(ev.out_dir);
      return run_eval_abr(ev);
    }
    if (*rp) return run_report(rp_logs, rp_evals, resolve_out(rp_out));
    if (*sy) {
      SynthCmdArgs args = syn;
      args.out_dir = resolve_out(syn.out_dir);
      return run_synth(args);
    }
  } catch (const jade::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
