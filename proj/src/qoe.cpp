#include "jade/qoe.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "jade/parallel.hpp"

namespace jade {

RelLabel rel_label(double y_i, double y_j) {
  if (y_i > y_j) return 1;
  if (y_i < y_j) return -1;
  return 0;
}

double qoe_lin_step(double vmaf, double rebuffer_s, bool has_prev, double prev_vmaf,
                    const LinWeights& w) {
  double v = w.alpha_v * vmaf - w.beta_v * rebuffer_s;
  if (has_prev) {
    const double dq = vmaf - prev_vmaf;
    v -= w.gamma_v * std::max(dq, 0.0);
    v -= w.delta_v * std::max(-dq, 0.0);
  }
  return v;
}

double qoe_lin(const SessionRecord& session, const LinWeights& w) {
  double total = 0;
  for (std::size_t t = 0; t < session.length(); ++t)
    total += qoe_lin_step(session.vmaf[t], session.rebuffer_s[t], t > 0,
                          t > 0 ? session.vmaf[t - 1] : 0.0, w);
  return total;
}

std::array<double, 4> session_aggregates(const SessionRecord& session) {
  std::array<double, 4> agg{0, 0, 0, 0};
  for (std::size_t t = 0; t < session.length(); ++t) {
    agg[0] += session.vmaf[t];
    agg[1] += session.rebuffer_s[t];
    if (t > 0) {
      const double dq = session.vmaf[t] - session.vmaf[t - 1];
      agg[2] += std::max(dq, 0.0);
      agg[3] += std::max(-dq, 0.0);
    }
  }
  return agg;
}

std::vector<double> extract_features(const SessionRecord& session, std::size_t end_chunk,
                                     const FeatureConfig& cfg) {
  const std::size_t len = session.length();
  if (end_chunk >= len)
    throw Error(Err::RangeError, "end_chunk " + std::to_string(end_chunk) + " >= session length");
  const int k = cfg.window;
  std::vector<double> out(static_cast<std::size_t>(3) * k);
  auto clamp01 = [](double v) { return v < 0 ? 0.0 : (v > 1 ? 1.0 : v); };
  for (int p = 0; p < k; ++p) {
    // window position p maps to chunk end_chunk - (k-1) + p; earlier
    // positions repeat the first chunk with zero rebuffer
    const long long idx = static_cast<long long>(end_chunk) - (k - 1) + p;
    const bool padded = idx < 0;
    const std::size_t c = padded ? 0 : static_cast<std::size_t>(idx);
    out[p] = clamp01(session.vmaf[c] / cfg.vmaf_den);
    out[k + p] = clamp01(session.bitrate_mbps[c] / cfg.bitrate_den_mbps);
    out[2 * k + p] =
        padded ? 0.0 : clamp01(std::min(session.rebuffer_s[c], cfg.rebuffer_clamp_s) /
                               cfg.rebuffer_clamp_s);
  }
  return out;
}

PairLossResult pair_loss(double r_i, double r_j, RelLabel a) {
  PairLossResult res;
  const double diff = r_i - r_j;
  if (a == 0) {
    res.loss = diff * diff;
    res.d_ri = 2.0 * diff;
    res.d_rj = -2.0 * diff;
    return res;
  }
  const double s = a * diff;
  // -log sigmoid(s), stable in both tails
  res.loss = s >= 0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
  const double sig = 1.0 / (1.0 + std::exp(-s));
  const double ds = sig - 1.0;  // d(-log sigmoid)/ds
  res.d_ri = a * ds;
  res.d_rj = -a * ds;
  return res;
}

// ---------------------------------------------------------------------------
// pair sampling

PairSampler::PairSampler(const RatingDataset& d) : dataset_(&d) {
  std::map<std::string, std::string> query_of;  // session -> query
  for (const auto& [qid, sids] : d.queries)
    for (const auto& sid : sids) query_of[sid] = qid;

  // one pass over the score table
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> rated;
  for (const auto& [key, score] : d.scores) {
    (void)score;
    auto it = query_of.find(key.second);
    if (it == query_of.end()) continue;  // session outside any query
    rated[{it->second, key.first}].push_back(key.second);
  }
  QueryRaters* current = nullptr;
  for (auto& [qu, sids] : rated) {
    if (sids.size() < 2) continue;
    if (!current || current->query_id != qu.first) {
      index_.push_back({qu.first, {}});
      current = &index_.back();
    }
    std::sort(sids.begin(), sids.end());
    current->raters.emplace_back(qu.second, std::move(sids));
  }
}

std::vector<PairSample> PairSampler::sample(std::size_t batch_size, Rng& rng) const {
  if (index_.empty())
    throw Error(Err::InsufficientSessions, "no query has a user with two scored sessions");
  std::vector<PairSample> batch;
  batch.reserve(batch_size);
  for (std::size_t n = 0; n < batch_size; ++n) {
    const auto& q = index_[rng.below(index_.size())];
    const auto& [uid, sessions] = q.raters[rng.below(q.raters.size())];
    const std::size_t i = rng.below(sessions.size());
    std::size_t j = rng.below(sessions.size() - 1);
    if (j >= i) ++j;
    PairSample s;
    s.query_id = q.query_id;
    s.user_id = uid;
    s.session_i = sessions[i];
    s.session_j = sessions[j];
    s.label = rel_label(dataset_->scores.at({uid, sessions[i]}),
                        dataset_->scores.at({uid, sessions[j]}));
    batch.push_back(std::move(s));
  }
  return batch;
}

std::vector<PairSample> PairSampler::enumerate() const {
  std::vector<PairSample> pairs;
  for (const auto& q : index_)
    for (const auto& [uid, sessions] : q.raters)
      for (std::size_t i = 0; i < sessions.size(); ++i)
        for (std::size_t j = i + 1; j < sessions.size(); ++j) {
          PairSample s;
          s.query_id = q.query_id;
          s.user_id = uid;
          s.session_i = sessions[i];
          s.session_j = sessions[j];
          s.label = rel_label(dataset_->scores.at({uid, sessions[i]}),
                              dataset_->scores.at({uid, sessions[j]}));
          pairs.push_back(std::move(s));
        }
  return pairs;
}

std::vector<PairSample> sample_batch(const RatingDataset& d, std::size_t batch_size, Rng& rng) {
  return PairSampler(d).sample(batch_size, rng);
}

std::vector<PairSample> enumerate_pairs(const RatingDataset& d) {
  return PairSampler(d).enumerate();
}

// ---------------------------------------------------------------------------
// identity rate

double identity_rate(const ScoreFn& score_fn, const RatingDataset& d,
                     const std::vector<PairSample>& pairs) {
  if (pairs.empty()) throw Error(Err::EmptyTestSet, "identity_rate needs at least one pair");

  // score each distinct session once, in parallel
  std::set<std::string> unique;
  for (const auto& p : pairs) {
    unique.insert(p.session_i);
    unique.insert(p.session_j);
  }
  std::vector<std::string> ids(unique.begin(), unique.end());
  std::vector<double> scores(ids.size());
  par::for_each(ids.size(), [&](std::size_t i) { scores[i] = score_fn(d.sessions.at(ids[i])); });
  std::map<std::string, double> score_of;
  for (std::size_t i = 0; i < ids.size(); ++i) score_of[ids[i]] = scores[i];

  const long long hits = par::striped_reduce<long long>(
      pairs.size(), 64, 0,
      [&](std::size_t begin, std::size_t end, long long& acc) {
        for (std::size_t n = begin; n < end; ++n) {
          const auto& p = pairs[n];
          const double r_i = score_of.at(p.session_i);
          const double r_j = score_of.at(p.session_j);
          if (p.label != 0) {
            if (p.label * (r_i - r_j) > 0) ++acc;
          } else {
            const double gap = std::fabs(r_i - r_j) /
                               std::max({std::fabs(r_i), std::fabs(r_j), 1e-6});
            if (gap < 0.05) ++acc;
          }
        }
      },
      [](long long& a, const long long& b) { a += b; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
}

MosTable::MosTable(const RatingDataset& d) {
  std::map<std::string, std::pair<double, long long>> sums;
  for (const auto& [key, score] : d.scores) {
    auto& [sum, n] = sums[key.second];
    sum += score;
    n += 1;
  }
  for (const auto& [sid, sn] : sums) mos_[sid] = sn.first / static_cast<double>(sn.second);
}

double MosTable::score(const SessionRecord& session) const {
  auto it = mos_.find(session.session_id);
  if (it == mos_.end()) throw Error(Err::UnknownSession, session.session_id);
  return it->second;
}

ScoreFn MosTable::as_score_fn() const {
  return [this](const SessionRecord& s) { return score(s); };
}

// ---------------------------------------------------------------------------
// training

namespace {

struct PairRef {
  uint32_t i = 0;
  uint32_t j = 0;
  RelLabel label = 0;
};

struct FeatureTable {
  std::vector<std::string> ids;
  std::map<std::string, uint32_t> index;
  std::vector<std::vector<double>> features;
};

FeatureTable build_feature_table(const RatingDataset& d,
                                 const std::function<std::vector<double>(const SessionRecord&)>& fx) {
  FeatureTable table;
  for (const auto& [sid, rec] : d.sessions) {
    (void)rec;
    table.index[sid] = static_cast<uint32_t>(table.ids.size());
    table.ids.push_back(sid);
  }
  table.features.resize(table.ids.size());
  par::for_each(table.ids.size(),
                [&](std::size_t i) { table.features[i] = fx(d.sessions.at(table.ids[i])); });
  return table;
}

std::vector<PairRef> to_refs(const std::vector<PairSample>& samples, const FeatureTable& table) {
  std::vector<PairRef> refs;
  refs.reserve(samples.size());
  for (const auto& s : samples)
    refs.push_back({table.index.at(s.session_i), table.index.at(s.session_j), s.label});
  return refs;
}

struct BatchPartial {
  Gradients grads;
  double loss = 0;
};

// Mean pairwise-loss gradient over the batch. Deterministic striped
// reduction; each pair runs two shared-weight forwards and two backwards.
std::pair<Gradients, double> batch_pair_gradient(const MlpModel& model,
                                                 const FeatureTable& table,
                                                 const std::vector<PairRef>& refs) {
  BatchPartial zero{zero_gradients(model), 0.0};
  BatchPartial total = par::striped_reduce<BatchPartial>(
      refs.size(), 16, zero,
      [&](std::size_t begin, std::size_t end, BatchPartial& acc) {
        ForwardCache cache_i, cache_j;
        for (std::size_t n = begin; n < end; ++n) {
          const auto& ref = refs[n];
          const double r_i = forward(model, table.features[ref.i], &cache_i)[0];
          const double r_j = forward(model, table.features[ref.j], &cache_j)[0];
          const PairLossResult pl = pair_loss(r_i, r_j, ref.label);
          acc.loss += pl.loss;
          acc.grads.add(backward(model, cache_i, {pl.d_ri}));
          acc.grads.add(backward(model, cache_j, {pl.d_rj}));
        }
      },
      [](BatchPartial& a, const BatchPartial& b) {
        a.grads.add(b.grads);
        a.loss += b.loss;
      });
  const double inv = refs.empty() ? 0.0 : 1.0 / static_cast<double>(refs.size());
  total.grads.scale(inv);
  return {std::move(total.grads), total.loss * inv};
}

struct Trainer {
  const RatingDataset& train;
  const RatingDataset& heldout;
  const QoeTrainConfig& cfg;
  std::function<std::vector<double>(const SessionRecord&)> fx;

  MlpModel model;
  std::vector<QoeCurvePoint> curve;
  bool plain_gd = false;  // surrogate uses vanilla gradient descent

  void run(const std::function<ScoreFn(const MlpModel&)>& scorer_of) {
    FeatureTable table = build_feature_table(train, fx);
    PairSampler sampler(train);
    std::vector<PairSample> heldout_pairs;
    if (!heldout.sessions.empty()) heldout_pairs = enumerate_pairs(heldout);

    Rng rng(cfg.seed);
    for (int iter = 1; iter <= cfg.iters; ++iter) {
      const auto samples = sampler.sample(cfg.batch_size, rng);
      const auto refs = to_refs(samples, table);
      auto [grads, loss] = batch_pair_gradient(model, table, refs);
      if (plain_gd)
        sgd_step(model, grads, cfg.adam.learning_rate);
      else
        adam_step(model, grads, cfg.adam);
      if (iter % cfg.eval_interval == 0 || iter == cfg.iters) {
        QoeCurvePoint pt;
        pt.iter = iter;
        pt.loss = loss;
        pt.identity_rate_pct =
            heldout_pairs.empty() ? 0.0 : identity_rate(scorer_of(model), heldout, heldout_pairs);
        curve.push_back(pt);
      }
    }
  }
};

}  // namespace

ScoreFn dnn_scorer(const MlpModel& model, const FeatureConfig& cfg) {
  return [&model, cfg](const SessionRecord& s) {
    return forward(model, extract_features(s, s.length() - 1, cfg))[0];
  };
}

QoeDnnResult train_qoe_dnn(const RatingDataset& train, const RatingDataset& heldout,
                           const QoeTrainConfig& cfg) {
  MlpSpec spec;
  spec.input_dim = 3 * cfg.features.window;
  spec.hidden = cfg.hidden;
  spec.output_dim = 1;
  spec.head = Head::Linear;

  const FeatureConfig fc = cfg.features;
  Trainer trainer{train, heldout, cfg,
                  [fc](const SessionRecord& s) { return extract_features(s, s.length() - 1, fc); },
                  mlp_init(spec, cfg.seed),
                  {},
                  /*plain_gd=*/false};
  trainer.run([&fc](const MlpModel& m) { return dnn_scorer(m, fc); });
  return {std::move(trainer.model), std::move(trainer.curve)};
}

QoeLinResult train_qoe_lin(const RatingDataset& train, const RatingDataset& heldout,
                           const QoeTrainConfig& cfg) {
  // Standardize the four aggregates over the training sessions so one
  // learning rate fits all; fold the scaling back into the weights after.
  std::array<double, 4> mean{0, 0, 0, 0}, sd{1, 1, 1, 1};
  {
    std::vector<std::array<double, 4>> all;
    for (const auto& [sid, rec] : train.sessions) {
      (void)sid;
      all.push_back(session_aggregates(rec));
    }
    for (int f = 0; f < 4; ++f) {
      double s = 0;
      for (const auto& a : all) s += a[f];
      mean[f] = s / static_cast<double>(all.size());
      double v = 0;
      for (const auto& a : all) v += (a[f] - mean[f]) * (a[f] - mean[f]);
      sd[f] = std::sqrt(v / static_cast<double>(all.size()));
      if (sd[f] < 1e-9) sd[f] = 1.0;
    }
  }
  auto fx = [mean, sd](const SessionRecord& s) {
    const auto agg = session_aggregates(s);
    std::vector<double> out(4);
    for (int f = 0; f < 4; ++f) out[f] = (agg[f] - mean[f]) / sd[f];
    return out;
  };

  MlpSpec spec;
  spec.input_dim = 4;
  spec.hidden = {};
  spec.output_dim = 1;
  spec.head = Head::Linear;

  auto extract = [&](const MlpModel& m) {
    const auto& w = m.layers[0].w;
    LinWeights lw;
    lw.alpha_v = w[0] / sd[0];
    lw.beta_v = -w[1] / sd[1];
    lw.gamma_v = -w[2] / sd[2];
    lw.delta_v = -w[3] / sd[3];
    return lw;
  };

  Trainer trainer{train, heldout, cfg, fx, mlp_init(spec, cfg.seed), {}, /*plain_gd=*/true};
  trainer.run([&extract](const MlpModel& m) {
    const LinWeights lw = extract(m);
    return ScoreFn([lw](const SessionRecord& s) { return qoe_lin(s, lw); });
  });
  return {extract(trainer.model), std::move(trainer.curve)};
}

void save_lin_weights(const LinWeights& w, const std::string& path) {
  nlohmann::json j;
  j["alpha_v"] = w.alpha_v;
  j["beta_v"] = w.beta_v;
  j["gamma_v"] = w.gamma_v;
  j["delta_v"] = w.delta_v;
  write_text_file(path, j.dump(2) + "\n");
}

LinWeights load_lin_weights(const std::string& path) {
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    LinWeights w;
    w.alpha_v = j.at("alpha_v").get<double>();
    w.beta_v = j.at("beta_v").get<double>();
    w.gamma_v = j.at("gamma_v").get<double>();
    w.delta_v = j.at("delta_v").get<double>();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Err::SchemaError, path + ": " + e.what());
  }
}

std::string curve_to_csv(const std::vector<QoeCurvePoint>& curve) {
  std::string out = "# jade-schema: qoe-curve/v1\niter,loss,identity_rate_pct\n";
  for (const auto& pt : curve)
    out += std::to_string(pt.iter) + ',' + fmt_double(pt.loss) + ',' +
           fmt_double(pt.identity_rate_pct) + '\n';
  return out;
}

}  // namespace jade
