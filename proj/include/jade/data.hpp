#ifndef JADE_DATA_HPP
#define JADE_DATA_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jade/common.hpp"

namespace jade {

// Per-chunk sizes and VMAF values across the bitrate ladder.
struct VideoManifest {
  double chunk_duration_s = 0;
  std::vector<double> ladder_mbps;             // strictly ascending
  std::vector<std::vector<double>> sizes_bytes;  // [chunk][level]
  std::vector<std::vector<double>> vmaf;         // [chunk][level]

  std::size_t num_chunks() const { return sizes_bytes.size(); }
  std::size_t num_levels() const { return ladder_mbps.size(); }
  void validate() const;
};

struct NetworkTrace {
  std::string id;
  std::vector<std::pair<double, double>> samples;  // (timestamp_s, bandwidth_mbps)

  double span_s() const { return samples.back().first - samples.front().first; }
  void validate() const;
};

// Per-chunk playback log of one streaming session.
struct SessionRecord {
  std::string session_id;
  std::vector<double> vmaf;
  std::vector<double> bitrate_mbps;
  std::vector<double> rebuffer_s;

  std::size_t length() const { return vmaf.size(); }
  void validate() const;
};

struct RatingDataset {
  std::map<std::string, std::vector<std::string>> queries;  // query_id -> session_ids
  std::map<std::string, SessionRecord> sessions;
  std::map<std::pair<std::string, std::string>, double> scores;  // (user_id, session_id) -> [0,100]

  std::vector<std::string> user_ids() const;
  void validate() const;
};

NetworkTrace load_trace(const std::string& path);
void save_trace(const NetworkTrace& trace, const std::string& path);

VideoManifest load_manifest(const std::string& path);
void save_manifest(const VideoManifest& manifest, const std::string& path);

// Directory layout: sessions.csv + scores.csv (see README for columns).
RatingDataset load_ratings(const std::string& dir);
void save_ratings(const RatingDataset& d, const std::string& dir);

// Session-level disjoint split, deterministic under seed. All scores of a
// session land on one side; queries shrunk below two sessions are dropped
// from that side's query map.
std::pair<RatingDataset, RatingDataset> split_dataset(const RatingDataset& d,
                                                      double train_fraction, uint64_t seed);

std::vector<NetworkTrace> load_trace_dir(const std::string& dir);

}  // namespace jade

#endif
