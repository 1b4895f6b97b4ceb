#include "jade/synth.hpp"

#include <algorithm>
#include <cmath>

namespace jade {

NetworkTrace synth_trace(TraceKind kind, double mean_mbps, double duration_s, double interval_s,
                         Rng& rng, const std::string& id) {
  NetworkTrace trace;
  trace.id = id;
  const std::size_t n = std::max<std::size_t>(2, static_cast<std::size_t>(duration_s / interval_s));
  double walk = mean_mbps;
  const double period_s = rng.uniform(20.0, 60.0);
  const double phase = rng.uniform(0.0, period_s);
  const double swing = rng.uniform(0.3, 0.6);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * interval_s;
    double bw = mean_mbps;
    switch (kind) {
      case TraceKind::Constant:
        break;
      case TraceKind::Square:
        bw = std::fmod(t + phase, period_s) < period_s / 2 ? mean_mbps * (1.0 + swing)
                                                           : mean_mbps * (1.0 - swing);
        break;
      case TraceKind::Ramp: {
        const double frac = std::fmod(t + phase, period_s) / period_s;
        bw = mean_mbps * (1.0 - swing + 2.0 * swing * frac);
        break;
      }
      case TraceKind::Walk:
        walk = std::clamp(walk + rng.normal() * 0.15 * mean_mbps, 0.3 * mean_mbps,
                          2.0 * mean_mbps);
        bw = walk;
        break;
    }
    trace.samples.emplace_back(t, std::max(bw, 0.05));
  }
  trace.validate();
  return trace;
}

std::vector<NetworkTrace> synth_trace_pool(std::size_t count, double lo_mbps, double hi_mbps,
                                           uint64_t seed, const std::string& id_prefix) {
  Rng rng(seed);
  std::vector<NetworkTrace> pool;
  const TraceKind kinds[] = {TraceKind::Constant, TraceKind::Square, TraceKind::Ramp,
                             TraceKind::Walk};
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count > 1 ? static_cast<double>(i) / (count - 1) : 0.5;
    const double mean = lo_mbps * std::pow(hi_mbps / lo_mbps, frac);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03u", static_cast<unsigned>(i));
    pool.push_back(synth_trace(kinds[i % 4], mean, 400.0, 1.0, rng,
                               id_prefix + "_" + buf));
  }
  return pool;
}

VideoManifest synth_manifest(std::size_t chunks, double chunk_duration_s, uint64_t seed,
                             const std::vector<double>& ladder_mbps) {
  Rng rng(seed);
  VideoManifest m;
  m.chunk_duration_s = chunk_duration_s;
  m.ladder_mbps = ladder_mbps;
  const double top = ladder_mbps.back();
  for (std::size_t c = 0; c < chunks; ++c) {
    // per-chunk encoding complexity scales sizes and shifts the vmaf curve
    const double complexity = rng.uniform(0.85, 1.15);
    const double difficulty = rng.uniform(0.8, 1.6);
    std::vector<double> sizes, vmafs;
    for (double rate : ladder_mbps) {
      sizes.push_back(rate * 1e6 / 8.0 * chunk_duration_s * complexity);
      const double v = 100.0 * (1.0 - std::exp(-3.0 * rate / (top * difficulty) - 0.08));
      vmafs.push_back(std::clamp(v, 0.0, 100.0));
    }
    m.sizes_bytes.push_back(std::move(sizes));
    m.vmaf.push_back(std::move(vmafs));
  }
  m.validate();
  return m;
}

RatingDataset synth_ratings(const SynthRatingsConfig& cfg) {
  Rng rng(cfg.seed);
  RatingDataset d;

  // heterogeneous rater profiles: personal score range, curvature, noise
  struct Rater {
    std::string id;
    double lo, hi, power, noise;
  };
  std::vector<Rater> raters;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    Rater r;
    r.id = "u" + std::to_string(u);
    r.lo = rng.uniform(0.0, 35.0);
    r.hi = rng.uniform(65.0, 100.0);
    r.power = rng.uniform(0.45, 2.2);
    r.noise = rng.uniform(cfg.noise_lo, cfg.noise_hi);
    raters.push_back(r);
  }

  // sessions with varied quality paths; latent = shared linear QoE
  std::vector<std::pair<std::string, double>> latent;
  std::size_t serial = 0;
  for (std::size_t q = 0; q < cfg.n_queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<std::string> members;
    for (std::size_t s = 0; s < cfg.sessions_per_query; ++s) {
      SessionRecord rec;
      rec.session_id = "s" + std::to_string(serial++);
      const double base_vmaf = rng.uniform(25.0, 95.0);
      const double churn = rng.uniform(0.0, 18.0);
      const double stall_rate = rng.uniform(0.0, 0.5);
      double level = base_vmaf;
      for (std::size_t t = 0; t < cfg.session_len; ++t) {
        level = std::clamp(level + rng.uniform(-churn, churn), 5.0, 100.0);
        rec.vmaf.push_back(level);
        rec.bitrate_mbps.push_back(std::clamp(level / 100.0 * 4.3, 0.1, 4.3));
        const bool stalled = rng.uniform() < stall_rate;
        rec.rebuffer_s.push_back(stalled ? rng.uniform(0.2, 4.0) : 0.0);
      }
      latent.emplace_back(rec.session_id, qoe_lin(rec, cfg.latent));
      members.push_back(rec.session_id);
      d.sessions[rec.session_id] = std::move(rec);
    }
    d.queries[qid] = std::move(members);
  }

  // scale latent onto [0,1] over the corpus
  double lo = latent[0].second, hi = latent[0].second;
  for (const auto& [sid, v] : latent) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::map<std::string, double> unit;
  for (const auto& [sid, v] : latent) unit[sid] = (v - lo) / span;

  for (const auto& [qid, members] : d.queries) {
    // choose this query's rater panel
    std::vector<std::size_t> panel(raters.size());
    for (std::size_t u = 0; u < raters.size(); ++u) panel[u] = u;
    if (cfg.raters_per_query > 0 && cfg.raters_per_query < raters.size()) {
      for (std::size_t i = panel.size(); i > 1; --i) std::swap(panel[i - 1], panel[rng.below(i)]);
      panel.resize(cfg.raters_per_query);
      std::sort(panel.begin(), panel.end());
    }
    for (const auto& sid : members) {
      std::vector<std::size_t> scorers = panel;
      if (cfg.raters_per_session > 0 && cfg.raters_per_session < scorers.size()) {
        for (std::size_t i = scorers.size(); i > 1; --i)
          std::swap(scorers[i - 1], scorers[rng.below(i)]);
        scorers.resize(cfg.raters_per_session);
        std::sort(scorers.begin(), scorers.end());
      }
      for (std::size_t u : scorers) {
        const Rater& r = raters[u];
        const double x = unit.at(sid);
        double score = r.lo + (r.hi - r.lo) * std::pow(x, r.power);
        if (r.noise > 0) score += r.noise * rng.normal();
        d.scores[{r.id, sid}] = std::clamp(score, 0.0, 100.0);
      }
    }
  }
  d.validate();
  return d;
}

RatingDataset shuffle_scores(const RatingDataset& d, uint64_t seed) {
  RatingDataset out = d;
  Rng rng(seed);
  std::map<std::string, std::vector<std::string>> sessions_of_user;
  for (const auto& [key, score] : d.scores) {
    (void)score;
    sessions_of_user[key.first].push_back(key.second);
  }
  for (const auto& [uid, sids] : sessions_of_user) {
    std::vector<double> values;
    values.reserve(sids.size());
    for (const auto& sid : sids) values.push_back(d.scores.at({uid, sid}));
    for (std::size_t i = values.size(); i > 1; --i)
      std::swap(values[i - 1], values[rng.below(i)]);
    for (std::size_t i = 0; i < sids.size(); ++i) out.scores[{uid, sids[i]}] = values[i];
  }
  return out;
}

}  // namespace jade
