// Times the data-parallel kernels with the striped OpenMP path enabled and
// disabled. The stripe layout is identical in both modes, so outputs match
// bit for bit; only wall time should differ.

#include <cstdio>
#include <string>

#include <omp.h>

#include "jade/baselines.hpp"
#include "jade/parallel.hpp"
#include "jade/ppo.hpp"
#include "jade/qoe.hpp"
#include "jade/report.hpp"
#include "jade/synth.hpp"

using namespace jade;

namespace {

template <class Fn>
double time_it(Fn&& fn, int reps) {
  const double t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) fn();
  return (omp_get_wtime() - t0) / reps;
}

void row(const char* name, double serial_s, double parallel_s) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_s * 1e3, parallel_s * 1e3,
              parallel_s > 0 ? serial_s / parallel_s : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) omp_set_num_threads(std::stoi(argv[1]));
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  SynthRatingsConfig rc;
  rc.n_queries = 40;
  rc.sessions_per_query = 10;
  rc.users = 8;
  rc.noise_lo = 0.5;
  rc.noise_hi = 3.0;
  const RatingDataset ratings = synth_ratings(rc);
  const auto pairs = enumerate_pairs(ratings);

  QoeTrainConfig qcfg;
  qcfg.iters = 1;
  qcfg.batch_size = 4096;
  qcfg.hidden = {128, 128, 128};
  MlpSpec spec{3 * qcfg.features.window, qcfg.hidden, 1, Head::Linear};
  const MlpModel qoe = mlp_init(spec, 11);
  const ScoreFn scorer = dnn_scorer(qoe, qcfg.features);

  // identity-rate evaluation over enumerated pairs
  {
    par::set_parallel(false);
    const double s = time_it([&] { identity_rate(scorer, ratings, pairs); }, 3);
    par::set_parallel(true);
    const double p = time_it([&] { identity_rate(scorer, ratings, pairs); }, 3);
    row("identity_rate (pairs)", s, p);
  }

  // one pairwise training iteration (sampled batch + gradient + adam)
  {
    auto train_once = [&] {
      const auto [train, test] = split_dataset(ratings, 0.8, 1);
      (void)test;
      QoeTrainConfig cfg = qcfg;
      cfg.eval_interval = 1 << 30;  // no curve evals
      train_qoe_dnn(train, RatingDataset{}, cfg);
    };
    par::set_parallel(false);
    const double s = time_it(train_once, 2);
    par::set_parallel(true);
    const double p = time_it(train_once, 2);
    row("qoe batch gradient", s, p);
  }

  // PPO batch update
  {
    const int levels = 6, history = 8;
    const int dim = observation_dim(history, levels);
    MlpModel actor = mlp_init({dim, {128, 128}, levels, Head::Softmax}, 3);
    MlpModel critic = mlp_init({dim, {128, 128}, 1, Head::Linear}, 4);
    Rng rng(5);
    std::vector<Transition> batch(768);
    for (auto& tr : batch) {
      tr.obs.resize(dim);
      for (auto& x : tr.obs) x = rng.uniform();
      tr.next_obs = tr.obs;
      tr.action = static_cast<int>(rng.below(levels));
      tr.behavior_prob = 1.0 / levels;
      tr.entropy = std::log(levels);
      tr.reward = rng.normal();
      tr.done = false;
    }
    PpoConfig cfg;
    cfg.epochs = 1;
    auto update_once = [&] {
      MlpModel a = actor, c = critic;
      double lambda = 1.0;
      ppo_update(batch, a, c, cfg, lambda);
    };
    par::set_parallel(false);
    const double s = time_it(update_once, 2);
    par::set_parallel(true);
    const double p = time_it(update_once, 2);
    row("ppo_update (768 steps)", s, p);
  }

  // evaluation fan-out over (abr, trace) pairs
  {
    const auto traces = synth_trace_pool(12, 0.6, 5.0, 21);
    const auto manifest = synth_manifest(48, 4.0, 22);
    EvalInputs in;
    std::vector<AbrUnderTest> abrs(2);
    abrs[0].name = "rate";
    abrs[1].name = "bba";
    abrs[1].bba = BbaConfig{};
    in.abrs = abrs;
    in.traces = &traces;
    in.manifest = &manifest;
    par::set_parallel(false);
    const double s = time_it([&] { run_eval(in); }, 3);
    par::set_parallel(true);
    const double p = time_it([&] { run_eval(in); }, 3);
    row("eval fan-out (2x12)", s, p);
  }
  return 0;
}
