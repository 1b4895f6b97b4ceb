#ifndef JADE_REPORT_HPP
#define JADE_REPORT_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jade/baselines.hpp"
#include "jade/ppo.hpp"

namespace jade {

struct SessionRow {
  std::string abr;
  std::string trace_id;
  double mean_vmaf = 0;
  double stall_ratio_pct = 0;  // total rebuffer / total wall clock, percent
  double mean_abs_vmaf_change = 0;
  double mean_buffer_s = 0;
  double qoe_lin = 0;
  double qoe_dnn = 0;
};

struct AggregateRow {
  std::string abr;
  std::size_t sessions = 0;
  // (mean, 95% CI half-width) per metric
  std::pair<double, double> vmaf;
  std::pair<double, double> stall_ratio_pct;
  std::pair<double, double> abs_vmaf_change;
  std::pair<double, double> buffer_s;
  std::pair<double, double> qoe_lin;
  std::pair<double, double> qoe_dnn;
};

struct EvalReport {
  std::vector<SessionRow> rows;

  std::vector<AggregateRow> aggregate() const;
};

// Named ABR under evaluation; exactly one selector source must be set.
struct AbrUnderTest {
  std::string name;  // rate | bba | mpc | mpc-dnn | jade
  std::optional<BbaConfig> bba;
  std::optional<MpcConfig> mpc;
  const MlpModel* actor = nullptr;  // jade checkpoint
  int history = 8;
  bool mpc_uses_dnn = false;
};

struct EvalInputs {
  std::vector<AbrUnderTest> abrs;
  const std::vector<NetworkTrace>* traces = nullptr;
  const VideoManifest* manifest = nullptr;
  SimConfig sim;
  LinWeights lin_weights;
  const MlpModel* qoe_dnn = nullptr;  // optional; qoe_dnn column is 0 without it
  FeatureConfig features;
  double start_offset_s = 0;
};

struct EvalOutput {
  EvalReport report;
  // per (abr, trace) JSON-lines step logs, keyed "abr__trace"
  std::map<std::string, std::string> session_logs;
};

// Rolls out every (abr, trace) pair; pairs run in parallel.
EvalOutput run_eval(const EvalInputs& in);

std::string session_rows_to_csv(const std::vector<SessionRow>& rows);
std::string aggregate_to_csv(const std::vector<AggregateRow>& rows);
// Sorted per-session QoE samples per ABR: columns abr,value.
std::string cdf_to_csv(const EvalReport& report, bool dnn_metric);

// ---- report command transforms ----

std::vector<RunLogRow> parse_run_log(const std::string& csv_text);
std::vector<SessionRow> parse_session_rows(const std::string& csv_text);

std::string omega_curve_csv(const std::vector<RunLogRow>& log);
std::string learning_curve_csv(const std::vector<RunLogRow>& log);
std::string selection_pdf_csv(const std::vector<RunLogRow>& log);
std::string scatter_csv(const std::vector<SessionRow>& merged_rows);

}  // namespace jade

#endif
