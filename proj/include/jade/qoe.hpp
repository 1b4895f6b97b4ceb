#ifndef JADE_QOE_HPP
#define JADE_QOE_HPP

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jade/data.hpp"
#include "jade/tinynet.hpp"

namespace jade {

// Relative relationship between two opinion scores: +1, 0, -1.
using RelLabel = int;

RelLabel rel_label(double y_i, double y_j);

// Quality / rebuffer / positive-smoothness / negative-smoothness weights.
struct LinWeights {
  double alpha_v = 0.535;
  double beta_v = -0.215;
  double gamma_v = 0.13;
  double delta_v = 1.37;
};

double qoe_lin(const SessionRecord& session, const LinWeights& w);

// Chunk-wise contribution of one step; pass has_prev = false for the first
// chunk (no smoothness terms).
double qoe_lin_step(double vmaf, double rebuffer_s, bool has_prev, double prev_vmaf,
                    const LinWeights& w);

// sum quality, sum rebuffer, sum positive switch, sum negative switch
std::array<double, 4> session_aggregates(const SessionRecord& session);

struct FeatureConfig {
  int window = 7;                  // trailing chunks per lane
  double vmaf_den = 100.0;
  double bitrate_den_mbps = 4.3;   // ladder max
  double rebuffer_clamp_s = 10.0;
};

// Trailing window ending at end_chunk, one [0,1] lane per metric; short
// windows are front-padded with the first chunk (zero rebuffer).
std::vector<double> extract_features(const SessionRecord& session, std::size_t end_chunk,
                                     const FeatureConfig& cfg);

struct PairLossResult {
  double loss = 0;
  double d_ri = 0;
  double d_rj = 0;
};

// -log(sigmoid(a * (r_i - r_j))) for ordered pairs, (r_i - r_j)^2 for ties.
PairLossResult pair_loss(double r_i, double r_j, RelLabel a);

struct PairSample {
  std::string session_i;
  std::string session_j;
  RelLabel label = 0;
  std::string user_id;
  std::string query_id;
};

// Owns the (query, user) -> rated-sessions index so repeated batches don't
// re-walk the score table.
class PairSampler {
 public:
  explicit PairSampler(const RatingDataset& d);

  // query uniform, rater uniform within the query, distinct session pair
  // uniform among that user's rated sessions
  std::vector<PairSample> sample(std::size_t batch_size, Rng& rng) const;

  // every (query, user, unordered session pair) with both scores present
  std::vector<PairSample> enumerate() const;

 private:
  struct QueryRaters {
    std::string query_id;
    std::vector<std::pair<std::string, std::vector<std::string>>> raters;
  };
  const RatingDataset* dataset_;
  std::vector<QueryRaters> index_;
};

std::vector<PairSample> sample_batch(const RatingDataset& d, std::size_t batch_size, Rng& rng);

// Every (query, user, unordered session pair) with both scores present.
std::vector<PairSample> enumerate_pairs(const RatingDataset& d);

using ScoreFn = std::function<double(const SessionRecord&)>;

// Percentage of test pairs scored in the user's direction; ties count when
// the relative gap is below 5%.
double identity_rate(const ScoreFn& score_fn, const RatingDataset& d,
                     const std::vector<PairSample>& pairs);

// Memorized mean opinion score per session.
class MosTable {
 public:
  explicit MosTable(const RatingDataset& d);
  double score(const SessionRecord& session) const;  // UnknownSession if absent
  ScoreFn as_score_fn() const;

 private:
  std::map<std::string, double> mos_;
};

struct QoeTrainConfig {
  int iters = 2000;
  int batch_size = 8192;
  int eval_interval = 100;
  std::vector<int> hidden = {128, 128, 128};
  AdamConfig adam;  // lr 1e-4
  FeatureConfig features;
  uint64_t seed = 1;
};

struct QoeCurvePoint {
  int iter = 0;
  double loss = 0;
  double identity_rate_pct = 0;
};

struct QoeDnnResult {
  MlpModel model;
  std::vector<QoeCurvePoint> curve;
};

QoeDnnResult train_qoe_dnn(const RatingDataset& train, const RatingDataset& heldout,
                           const QoeTrainConfig& cfg);

// Session score = model output on the final window.
ScoreFn dnn_scorer(const MlpModel& model, const FeatureConfig& cfg);

struct QoeLinResult {
  LinWeights weights;
  std::vector<QoeCurvePoint> curve;
};

// 4-weight surrogate on session aggregates, trained with the same pairwise
// loss; extracted weights follow the qoe_lin sign convention.
QoeLinResult train_qoe_lin(const RatingDataset& train, const RatingDataset& heldout,
                           const QoeTrainConfig& cfg);

void save_lin_weights(const LinWeights& w, const std::string& path);
LinWeights load_lin_weights(const std::string& path);

std::string curve_to_csv(const std::vector<QoeCurvePoint>& curve);

}  // namespace jade

#endif
