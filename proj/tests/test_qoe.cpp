#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "jade/parallel.hpp"
#include "jade/qoe.hpp"
#include "jade/synth.hpp"

using namespace jade;

namespace {

SessionRecord make_session(std::vector<double> vmaf, std::vector<double> rebuf,
                           const std::string& id = "s") {
  SessionRecord s;
  s.session_id = id;
  s.vmaf = std::move(vmaf);
  s.rebuffer_s = std::move(rebuf);
  s.bitrate_mbps.assign(s.vmaf.size(), 1.2);
  return s;
}

}  // namespace

TEST_CASE("rel_label") {
  CHECK(rel_label(80, 70) == 1);
  CHECK(rel_label(70, 80) == -1);
  CHECK(rel_label(50, 50) == 0);
}

TEST_CASE("qoe_lin arithmetic") {
  SUBCASE("single chunk") {
    const auto s = make_session({80}, {0});
    CHECK(qoe_lin(s, {1, 1, 1, 1}) == doctest::Approx(80.0));
  }

  SUBCASE("published weights") {
    const auto s = make_session({80, 90}, {0, 1});
    const LinWeights w{0.535, -0.215, 0.13, 1.37};
    CHECK(qoe_lin(s, w) == doctest::Approx(89.865).epsilon(1e-12));
  }

  SUBCASE("negative smoothness only") {
    const auto s = make_session({90, 80}, {0, 0});
    CHECK(qoe_lin(s, {0, 0, 0, 1}) == doctest::Approx(-10.0));
  }

  SUBCASE("linearity in the weights") {
    Rng rng(3);
    for (int n = 0; n < 30; ++n) {
      std::vector<double> vmaf, rebuf;
      const int len = 1 + static_cast<int>(rng.below(12));
      for (int t = 0; t < len; ++t) {
        vmaf.push_back(rng.uniform(0, 100));
        rebuf.push_back(rng.uniform(0, 5));
      }
      const auto s = make_session(vmaf, rebuf);
      const LinWeights w1{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      const LinWeights w2{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      const LinWeights sum{w1.alpha_v + w2.alpha_v, w1.beta_v + w2.beta_v,
                           w1.gamma_v + w2.gamma_v, w1.delta_v + w2.delta_v};
      CHECK(qoe_lin(s, sum) ==
            doctest::Approx(qoe_lin(s, w1) + qoe_lin(s, w2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature extraction") {
  FeatureConfig fc;  // window 7

  SUBCASE("saturated session maps to the lane endpoints") {
    SessionRecord s = make_session(std::vector<double>(10, 100.0), std::vector<double>(10, 0.0));
    s.bitrate_mbps.assign(10, 4.3);
    const auto f = extract_features(s, 9, fc);
    REQUIRE(f.size() == 21);
    for (int p = 0; p < 7; ++p) {
      CHECK(f[p] == 1.0);       // vmaf lane
      CHECK(f[7 + p] == 1.0);   // bitrate lane
      CHECK(f[14 + p] == 0.0);  // rebuffer lane
    }
  }

  SUBCASE("short prefix is front-padded with the first chunk") {
    SessionRecord s = make_session({10, 20, 30, 40, 50, 60, 70, 80, 90, 95},
                                   {1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    const auto f = extract_features(s, 2, fc);
    // positions 0..3 padded with chunk 0, positions 4..6 are chunks 0..2
    for (int p = 0; p <= 4; ++p) CHECK(f[p] == doctest::Approx(0.10));
    CHECK(f[5] == doctest::Approx(0.20));
    CHECK(f[6] == doctest::Approx(0.30));
    // padded rebuffer is zero even though chunk 0 stalled
    for (int p = 0; p < 4; ++p) CHECK(f[14 + p] == 0.0);
    CHECK(f[14 + 4] == doctest::Approx(0.1));
  }

  SUBCASE("rebuffer clamps at the configured ceiling") {
    SessionRecord s = make_session({50, 50}, {0, 25.0});
    const auto f = extract_features(s, 1, fc);
    CHECK(f[20] == 1.0);
  }

  SUBCASE("end_chunk out of range") {
    const auto s = make_session({50}, {0});
    CHECK_THROWS_AS(extract_features(s, 1, fc), Error);
  }
}

TEST_CASE("pair_loss values and gradients") {
  SUBCASE("equal scores with an ordered label cost log 2") {
    CHECK(pair_loss(3.0, 3.0, 1).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("tie label squares the gap") {
    const auto r = pair_loss(5.0, 3.0, 0);
    CHECK(r.loss == doctest::Approx(4.0));
    CHECK(r.d_ri == doctest::Approx(4.0));
    CHECK(r.d_rj == doctest::Approx(-4.0));
  }

  SUBCASE("confident correct pair loses almost nothing") {
    CHECK(pair_loss(10.0, 0.0, 1).loss == doctest::Approx(4.5398e-5).epsilon(1e-3));
  }

  SUBCASE("gradients match finite differences within 1e-6") {
    Rng rng(11);
    for (int n = 0; n < 1000; ++n) {
      const double ri = rng.uniform(-6, 6);
      const double rj = rng.uniform(-6, 6);
      const RelLabel a = static_cast<RelLabel>(rng.below(3)) - 1;
      const auto res = pair_loss(ri, rj, a);
      const double eps = 1e-6;
      const double fd_i = (pair_loss(ri + eps, rj, a).loss - pair_loss(ri - eps, rj, a).loss) /
                          (2 * eps);
      const double fd_j = (pair_loss(ri, rj + eps, a).loss - pair_loss(ri, rj - eps, a).loss) /
                          (2 * eps);
      CHECK(std::fabs(res.d_ri - fd_i) < 1e-6);
      CHECK(std::fabs(res.d_rj - fd_j) < 1e-6);
    }
  }

  SUBCASE("swap symmetry: (i,j,a) and (j,i,-a) cost the same") {
    Rng rng(13);
    for (int n = 0; n < 200; ++n) {
      const double ri = rng.uniform(-4, 4), rj = rng.uniform(-4, 4);
      const RelLabel a = static_cast<RelLabel>(rng.below(3)) - 1;
      CHECK(pair_loss(ri, rj, a).loss ==
            doctest::Approx(pair_loss(rj, ri, static_cast<RelLabel>(-a)).loss).epsilon(1e-12));
    }
  }
}

TEST_CASE("batch sampling") {
  SynthRatingsConfig cfg;
  cfg.n_queries = 1;
  cfg.sessions_per_query = 3;
  cfg.users = 4;
  cfg.seed = 21;
  const auto d = synth_ratings(cfg);

  SUBCASE("requested batch size is honored") {
    Rng rng(1);
    CHECK(sample_batch(d, 8192, rng).size() == 8192);
  }

  SUBCASE("constant rater only ever produces ties") {
    RatingDataset flat = d;
    for (auto& [key, score] : flat.scores)
      if (key.first == "u0") score = 50.0;
    Rng rng(2);
    for (const auto& s : sample_batch(flat, 2000, rng))
      if (s.user_id == "u0") CHECK(s.label == 0);
  }

  SUBCASE("empirical label distribution matches enumeration within 2%") {
    const auto pairs = enumerate_pairs(d);
    std::map<RelLabel, double> expect;
    // enumeration counts unordered pairs; sampling sees both orders, so
    // +1/-1 average out while ties keep their mass
    for (const auto& p : pairs) {
      expect[0] += p.label == 0 ? 1.0 : 0.0;
      expect[1] += p.label != 0 ? 0.5 : 0.0;
      expect[-1] += p.label != 0 ? 0.5 : 0.0;
    }
    for (auto& [label, count] : expect) count /= static_cast<double>(pairs.size());

    Rng rng(3);
    std::map<RelLabel, double> got;
    const std::size_t draws = 100000;
    for (const auto& s : sample_batch(d, draws, rng)) got[s.label] += 1.0;
    for (auto& [label, count] : got) count /= static_cast<double>(draws);
    for (const auto& [label, p] : expect) CHECK(std::fabs(got[label] - p) < 0.02);
  }

  SUBCASE("pairs stay within one query and one user") {
    SynthRatingsConfig multi;
    multi.n_queries = 4;
    multi.sessions_per_query = 4;
    multi.users = 3;
    const auto md = synth_ratings(multi);
    Rng rng(4);
    for (const auto& s : sample_batch(md, 500, rng)) {
      CHECK(s.session_i != s.session_j);
      const auto& members = md.queries.at(s.query_id);
      CHECK(std::count(members.begin(), members.end(), s.session_i) == 1);
      CHECK(std::count(members.begin(), members.end(), s.session_j) == 1);
      CHECK(md.scores.count({s.user_id, s.session_i}) == 1);
    }
  }

  SUBCASE("insufficient sessions") {
    RatingDataset empty;
    Rng rng(5);
    CHECK_THROWS_AS(sample_batch(empty, 4, rng), Error);
  }
}

TEST_CASE("identity rate") {
  SynthRatingsConfig cfg;
  cfg.n_queries = 6;
  cfg.sessions_per_query = 6;
  cfg.users = 5;
  cfg.noise_lo = 0.0;
  cfg.noise_hi = 0.0;
  const auto d = synth_ratings(cfg);
  const auto pairs = enumerate_pairs(d);

  SUBCASE("a user's own scores are fully consistent with their labels") {
    // no ties in this corpus (real-valued scores), so per-user lookup is 100%
    for (const auto& uid : d.user_ids()) {
      std::vector<PairSample> own;
      for (const auto& p : pairs)
        if (p.user_id == uid) own.push_back(p);
      const ScoreFn self = [&](const SessionRecord& s) {
        return d.scores.at({uid, s.session_id});
      };
      CHECK(identity_rate(self, d, own) == doctest::Approx(100.0));
    }
  }

  SUBCASE("negated scores land at zero") {
    const std::string uid = d.user_ids()[0];
    std::vector<PairSample> own;
    for (const auto& p : pairs)
      if (p.user_id == uid) own.push_back(p);
    const ScoreFn anti = [&](const SessionRecord& s) {
      return -d.scores.at({uid, s.session_id});
    };
    CHECK(identity_rate(anti, d, own) == doctest::Approx(0.0));
  }

  SUBCASE("random scorer sits at 50% give or take") {
    // balanced no-tie pair set by construction
    std::map<std::string, double> noise;
    Rng rng(31);
    for (const auto& [sid, rec] : d.sessions) {
      (void)rec;
      noise[sid] = rng.uniform();
    }
    const ScoreFn random_scorer = [&](const SessionRecord& s) { return noise.at(s.session_id); };
    std::vector<PairSample> many;
    while (many.size() < 10000) many.insert(many.end(), pairs.begin(), pairs.end());
    const double rate = identity_rate(random_scorer, d, many);
    CHECK(rate > 47.0);
    CHECK(rate < 53.0);
  }

  SUBCASE("shift invariance on non-tie pairs") {
    std::vector<PairSample> ordered;
    for (const auto& p : pairs)
      if (p.label != 0) ordered.push_back(p);
    const MosTable mos(d);
    const double base = identity_rate(mos.as_score_fn(), d, ordered);
    const ScoreFn shifted = [&](const SessionRecord& s) { return mos.score(s) + 1234.5; };
    CHECK(identity_rate(shifted, d, ordered) == base);
  }

  SUBCASE("tie rule: relative gap below 5% counts") {
    RatingDataset two;
    SessionRecord a = make_session({50}, {0}, "a");
    SessionRecord b = make_session({60}, {0}, "b");
    two.sessions["a"] = a;
    two.sessions["b"] = b;
    two.queries["q"] = {"a", "b"};
    two.scores[{"u", "a"}] = 40;
    two.scores[{"u", "b"}] = 40;  // tie
    const auto tie_pairs = enumerate_pairs(two);
    REQUIRE(tie_pairs.size() == 1);
    CHECK(tie_pairs[0].label == 0);
    const ScoreFn close = [](const SessionRecord& s) { return s.session_id == "a" ? 100.0 : 98.0; };
    const ScoreFn far = [](const SessionRecord& s) { return s.session_id == "a" ? 100.0 : 80.0; };
    CHECK(identity_rate(close, two, tie_pairs) == 100.0);
    CHECK(identity_rate(far, two, tie_pairs) == 0.0);
  }

  SUBCASE("empty test set rejected") {
    CHECK_THROWS_AS(identity_rate(MosTable(d).as_score_fn(), d, {}), Error);
  }

  SUBCASE("parallel and serial evaluation agree exactly") {
    const MosTable mos(d);
    par::set_parallel(false);
    const double serial = identity_rate(mos.as_score_fn(), d, pairs);
    par::set_parallel(true);
    const double parallel = identity_rate(mos.as_score_fn(), d, pairs);
    CHECK(serial == parallel);
  }
}

TEST_CASE("monotone-rater invariance: labels survive increasing transforms") {
  SynthRatingsConfig cfg;
  cfg.n_queries = 3;
  cfg.sessions_per_query = 5;
  cfg.users = 3;
  const auto d = synth_ratings(cfg);
  RatingDataset warped = d;
  for (auto& [key, score] : warped.scores)
    if (key.first == "u1") score = 100.0 * std::sqrt(score / 100.0);
  const auto a = enumerate_pairs(d);
  const auto b = enumerate_pairs(warped);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].label == b[i].label);
}

TEST_CASE("mos table") {
  RatingDataset d;
  d.sessions["a"] = make_session({50}, {0}, "a");
  d.sessions["b"] = make_session({70}, {0}, "b");
  d.queries["q"] = {"a", "b"};
  d.scores[{"u0", "a"}] = 40;
  d.scores[{"u1", "a"}] = 60;
  d.scores[{"u0", "b"}] = 80;
  const MosTable mos(d);
  CHECK(mos.score(d.sessions.at("a")) == doctest::Approx(50.0));
  CHECK(mos.score(d.sessions.at("b")) == doctest::Approx(80.0));
  SessionRecord unknown = make_session({10}, {0}, "zz");
  CHECK_THROWS_AS(mos.score(unknown), Error);
}

TEST_CASE("linear surrogate recovers planted weight ratios") {
  SynthRatingsConfig cfg;
  cfg.n_queries = 30;
  cfg.sessions_per_query = 8;
  cfg.users = 6;
  cfg.session_len = 10;
  cfg.latent = {1.0, 4.0, 1.0, 2.0};
  // small rating noise keeps the logistic optimum finite and near the
  // planted direction; noise-free labels are separable and drift max-margin
  cfg.noise_lo = 0.5;
  cfg.noise_hi = 1.5;
  cfg.seed = 91;
  const auto d = synth_ratings(cfg);
  const auto [train, test] = split_dataset(d, 0.8, 1);

  QoeTrainConfig tc;
  tc.iters = 1500;
  tc.batch_size = 512;
  tc.eval_interval = 1500;
  tc.adam.learning_rate = 0.1;  // plain GD step on standardized aggregates
  const auto result = train_qoe_lin(train, test, tc);

  const LinWeights& w = result.weights;
  REQUIRE(w.alpha_v > 0);
  CHECK(std::fabs(w.beta_v / w.alpha_v - 4.0) / 4.0 < 0.15);
  CHECK(std::fabs(w.gamma_v / w.alpha_v - 1.0) / 1.0 < 0.15);
  CHECK(std::fabs(w.delta_v / w.alpha_v - 2.0) / 2.0 < 0.15);

  // the learned surrogate should sit within 2 points of the planted-latent
  // oracle; rating noise caps both the same way
  const auto pairs = enumerate_pairs(test);
  const LinWeights truth = cfg.latent;
  const double oracle =
      identity_rate([truth](const SessionRecord& s) { return qoe_lin(s, truth); }, test, pairs);
  CHECK(result.curve.back().identity_rate_pct > oracle - 2.0);
  CHECK(result.curve.back().identity_rate_pct > 85.0);
}

TEST_CASE("all-tie dataset drives outputs together") {
  SynthRatingsConfig cfg;
  cfg.n_queries = 4;
  cfg.sessions_per_query = 5;
  cfg.users = 3;
  auto d = synth_ratings(cfg);
  for (auto& [key, score] : d.scores) score = 50.0;

  QoeTrainConfig tc;
  tc.iters = 12000;  // GD contracts the weights to exact zero on ties
  tc.batch_size = 64;
  tc.eval_interval = 12000;
  tc.adam.learning_rate = 0.2;
  const auto result = train_qoe_lin(d, RatingDataset{}, tc);
  const auto pairs = enumerate_pairs(d);
  const LinWeights w = result.weights;
  const double rate =
      identity_rate([w](const SessionRecord& s) { return qoe_lin(s, w); }, d, pairs);
  CHECK(rate == doctest::Approx(100.0));
}

TEST_CASE("lin weights json round trip") {
  namespace fs = std::filesystem;
  const auto path = (std::filesystem::temp_directory_path() / "jade_lw.json").string();
  const LinWeights w{0.535, -0.215, 0.13, 1.37};
  save_lin_weights(w, path);
  const auto loaded = load_lin_weights(path);
  CHECK(loaded.alpha_v == w.alpha_v);
  CHECK(loaded.beta_v == w.beta_v);
  CHECK(loaded.gamma_v == w.gamma_v);
  CHECK(loaded.delta_v == w.delta_v);
}
