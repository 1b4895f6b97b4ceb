#ifndef JADE_SYNTH_HPP
#define JADE_SYNTH_HPP

#include <string>
#include <vector>

#include "jade/data.hpp"
#include "jade/qoe.hpp"

namespace jade {

// Synthetic stand-ins for the external corpora: bandwidth traces, encoded
// manifests, and rated session datasets.

enum class TraceKind { Constant, Square, Ramp, Walk };

NetworkTrace synth_trace(TraceKind kind, double mean_mbps, double duration_s, double interval_s,
                         Rng& rng, const std::string& id);

// Mixed-kind pool with mean bandwidths log-spaced over [lo, hi].
std::vector<NetworkTrace> synth_trace_pool(std::size_t count, double lo_mbps, double hi_mbps,
                                           uint64_t seed, const std::string& id_prefix = "synth");

VideoManifest synth_manifest(std::size_t chunks, double chunk_duration_s, uint64_t seed,
                             const std::vector<double>& ladder_mbps = {0.3, 0.75, 1.2, 1.85,
                                                                       2.85, 4.3});

struct SynthRatingsConfig {
  std::size_t n_queries = 24;
  std::size_t sessions_per_query = 8;
  std::size_t users = 8;
  // 0 = every user rates every query; otherwise each query is rated by this
  // many users drawn at random (scale heterogeneity then distorts MOS).
  std::size_t raters_per_query = 0;
  // 0 = whole panel rates every session of its query; otherwise each session
  // is scored by this many panel members, so per-session means mix rating
  // scales the way heterogeneous subject pools do.
  std::size_t raters_per_session = 0;
  std::size_t session_len = 7;
  LinWeights latent{1.0, 4.0, 1.0, 2.0};  // shared latent linear QoE
  double noise_lo = 0.0;  // per-user score noise stddev range
  double noise_hi = 0.0;
  uint64_t seed = 7;
};

// Heterogeneous raters: each user applies a distinct strictly-monotone
// transform (power curve onto a personal score range) to the shared latent,
// plus optional per-rating Gaussian noise.
RatingDataset synth_ratings(const SynthRatingsConfig& cfg);

// Destroyed-signal control: permute each user's scores across their rated
// sessions.
RatingDataset shuffle_scores(const RatingDataset& d, uint64_t seed);

}  // namespace jade

#endif
