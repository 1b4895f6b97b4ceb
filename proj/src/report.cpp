#include "jade/report.hpp"

#include <algorithm>
#include <cmath>

#include "jade/baselines.hpp"
#include "jade/parallel.hpp"

namespace jade {

namespace {

std::pair<double, double> mean_ci95(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n - 1.0;
  return {mean, 1.96 * std::sqrt(var / n)};
}

std::vector<double> buffer_trajectory(const std::vector<StepOutcome>& outcomes,
                                      double chunk_duration_s, double cap_s) {
  std::vector<double> buf;
  double b = 0;
  for (const auto& o : outcomes) {
    b = advance_buffer(b, o.download_time_s, chunk_duration_s, cap_s).buffer_after_s;
    buf.push_back(b);
  }
  return buf;
}

PolicyFn policy_for(const AbrUnderTest& abr, const EvalInputs& in) {
  const VideoManifest& manifest = *in.manifest;
  if (abr.name == "rate") return make_rate_policy(manifest);
  if (abr.name == "bba") return make_bba_policy(manifest, abr.bba.value_or(BbaConfig{}));
  if (abr.name == "mpc" || abr.name == "mpc-dnn" || abr.mpc_uses_dnn) {
    MpcConfig cfg = abr.mpc.value_or(MpcConfig{});
    if (abr.name == "mpc-dnn" || abr.mpc_uses_dnn) {
      if (!in.qoe_dnn) throw Error(Err::SchemaError, "mpc-dnn needs the DNN QoE model");
      return make_mpc_dnn_policy(manifest, in.sim, cfg, *in.qoe_dnn, in.features);
    }
    return make_mpc_policy(manifest, in.sim, cfg);
  }
  if (abr.actor) return make_actor_policy(*abr.actor, manifest, in.sim, abr.history);
  throw Error(Err::SchemaError, "unknown abr '" + abr.name + "'");
}

}  // namespace

EvalOutput run_eval(const EvalInputs& in) {
  if (!in.manifest || !in.traces || in.traces->empty() || in.abrs.empty())
    throw Error(Err::SchemaError, "run_eval needs abrs, a manifest and traces");
  const std::size_t n_pairs = in.abrs.size() * in.traces->size();

  std::vector<SessionRow> rows(n_pairs);
  std::vector<std::pair<std::string, std::string>> logs(n_pairs);
  par::for_each(n_pairs, [&](std::size_t idx) {
    const AbrUnderTest& abr = in.abrs[idx / in.traces->size()];
    const NetworkTrace& trace = (*in.traces)[idx % in.traces->size()];
    const PolicyFn policy = policy_for(abr, in);
    const RolloutResult rr = rollout(policy, *in.manifest, trace, in.sim, in.start_offset_s,
                                     abr.name + "__" + trace.id);

    SessionRow& row = rows[idx];
    row.abr = abr.name;
    row.trace_id = trace.id;
    double vmaf_sum = 0, change_sum = 0, rebuf_sum = 0, wall = 0;
    for (std::size_t t = 0; t < rr.outcomes.size(); ++t) {
      const auto& o = rr.outcomes[t];
      vmaf_sum += o.chunk_vmaf;
      if (t > 0) change_sum += std::fabs(o.vmaf_change);
      rebuf_sum += o.rebuffer_s;
      wall += o.download_time_s + o.sleep_s;
    }
    const double n = static_cast<double>(rr.outcomes.size());
    row.mean_vmaf = vmaf_sum / n;
    row.mean_abs_vmaf_change = rr.outcomes.size() > 1 ? change_sum / (n - 1.0) : 0.0;
    row.stall_ratio_pct = wall > 0 ? 100.0 * rebuf_sum / wall : 0.0;
    const auto buf = buffer_trajectory(rr.outcomes, in.manifest->chunk_duration_s,
                                       in.sim.buffer_cap_s);
    double buf_sum = 0;
    for (double b : buf) buf_sum += b;
    row.mean_buffer_s = buf_sum / n;
    row.qoe_lin = qoe_lin(rr.session, in.lin_weights);
    row.qoe_dnn = in.qoe_dnn ? forward(*in.qoe_dnn, extract_features(rr.session,
                                                                     rr.session.length() - 1,
                                                                     in.features))[0]
                             : 0.0;
    logs[idx] = {abr.name + "__" + trace.id, outcomes_to_jsonl(rr.outcomes)};
  });

  EvalOutput out;
  out.report.rows = std::move(rows);
  for (auto& [key, text] : logs) out.session_logs[key] = std::move(text);
  return out;
}

std::vector<AggregateRow> EvalReport::aggregate() const {
  std::map<std::string, std::vector<const SessionRow*>> by_abr;
  for (const auto& r : rows) by_abr[r.abr].push_back(&r);
  std::vector<AggregateRow> agg;
  for (const auto& [abr, group] : by_abr) {
    auto collect = [&](auto member) {
      std::vector<double> xs;
      xs.reserve(group.size());
      for (const auto* r : group) xs.push_back(r->*member);
      return mean_ci95(xs);
    };
    AggregateRow row;
    row.abr = abr;
    row.sessions = group.size();
    row.vmaf = collect(&SessionRow::mean_vmaf);
    row.stall_ratio_pct = collect(&SessionRow::stall_ratio_pct);
    row.abs_vmaf_change = collect(&SessionRow::mean_abs_vmaf_change);
    row.buffer_s = collect(&SessionRow::mean_buffer_s);
    row.qoe_lin = collect(&SessionRow::qoe_lin);
    row.qoe_dnn = collect(&SessionRow::qoe_dnn);
    agg.push_back(std::move(row));
  }
  return agg;
}

std::string session_rows_to_csv(const std::vector<SessionRow>& rows) {
  std::string out =
      "# jade-schema: eval-sessions/v1\n"
      "abr,trace_id,mean_vmaf,stall_ratio_pct,mean_abs_vmaf_change,mean_buffer_s,qoe_lin,qoe_dnn\n";
  for (const auto& r : rows) {
    out += r.abr + ',' + r.trace_id;
    out += ',' + fmt_double(r.mean_vmaf);
    out += ',' + fmt_double(r.stall_ratio_pct);
    out += ',' + fmt_double(r.mean_abs_vmaf_change);
    out += ',' + fmt_double(r.mean_buffer_s);
    out += ',' + fmt_double(r.qoe_lin);
    out += ',' + fmt_double(r.qoe_dnn);
    out += '\n';
  }
  return out;
}

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows) {
  std::string out =
      "# jade-schema: eval-aggregate/v1\n"
      "abr,sessions,mean_vmaf,vmaf_ci95,stall_ratio_pct,stall_ci95,mean_abs_vmaf_change,"
      "change_ci95,mean_buffer_s,buffer_ci95,qoe_lin,qoe_lin_ci95,qoe_dnn,qoe_dnn_ci95\n";
  for (const auto& r : rows) {
    out += r.abr + ',' + std::to_string(r.sessions);
    auto emit = [&](const std::pair<double, double>& m) {
      out += ',' + fmt_double(m.first) + ',' + fmt_double(m.second);
    };
    emit(r.vmaf);
    emit(r.stall_ratio_pct);
    emit(r.abs_vmaf_change);
    emit(r.buffer_s);
    emit(r.qoe_lin);
    emit(r.qoe_dnn);
    out += '\n';
  }
  return out;
}

std::string cdf_to_csv(const EvalReport& report, bool dnn_metric) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : report.rows)
    values[r.abr].push_back(dnn_metric ? r.qoe_dnn : r.qoe_lin);
  std::string out = dnn_metric ? "# jade-schema: qoe-cdf-dnn/v1\n" : "# jade-schema: qoe-cdf-lin/v1\n";
  out += "abr,value\n";
  for (auto& [abr, xs] : values) {
    std::sort(xs.begin(), xs.end());
    for (double x : xs) out += abr + ',' + fmt_double(x) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// report-command parsing and transforms

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& expected_header) {
  std::vector<std::vector<std::string>> rows;
  std::size_t start = 0;
  bool saw_header = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != expected_header)
        throw Error(Err::SchemaError, "header '" + line + "' != '" + expected_header + "'");
      saw_header = true;
      continue;
    }
    std::vector<std::string> cols;
    for (auto c : split_csv_line(line)) cols.emplace_back(c);
    rows.push_back(std::move(cols));
  }
  if (!saw_header) throw Error(Err::SchemaError, "missing csv header");
  return rows;
}

}  // namespace

std::vector<RunLogRow> parse_run_log(const std::string& csv_text) {
  std::vector<RunLogRow> rows;
  for (const auto& cols : parse_csv(
           csv_text, "epoch,trace_id,mean_entropy,omega,lambda,mean_reward,eval_qoe_lin,eval_qoe_dnn")) {
    if (cols.size() != 8) throw Error(Err::SchemaError, "run log row width");
    RunLogRow r;
    r.epoch = parse_int(cols[0], Err::SchemaError, "run log epoch");
    r.trace_id = cols[1];
    r.mean_entropy = parse_double(cols[2], Err::SchemaError, "run log");
    r.omega = parse_double(cols[3], Err::SchemaError, "run log");
    r.lambda = parse_double(cols[4], Err::SchemaError, "run log");
    r.mean_reward = parse_double(cols[5], Err::SchemaError, "run log");
    if (!cols[6].empty()) r.eval_qoe_lin = parse_double(cols[6], Err::SchemaError, "run log");
    if (!cols[7].empty()) r.eval_qoe_dnn = parse_double(cols[7], Err::SchemaError, "run log");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SessionRow> parse_session_rows(const std::string& csv_text) {
  std::vector<SessionRow> rows;
  for (const auto& cols : parse_csv(csv_text,
                                    "abr,trace_id,mean_vmaf,stall_ratio_pct,mean_abs_vmaf_change,"
                                    "mean_buffer_s,qoe_lin,qoe_dnn")) {
    if (cols.size() != 8) throw Error(Err::SchemaError, "session row width");
    SessionRow r;
    r.abr = cols[0];
    r.trace_id = cols[1];
    r.mean_vmaf = parse_double(cols[2], Err::SchemaError, "sessions csv");
    r.stall_ratio_pct = parse_double(cols[3], Err::SchemaError, "sessions csv");
    r.mean_abs_vmaf_change = parse_double(cols[4], Err::SchemaError, "sessions csv");
    r.mean_buffer_s = parse_double(cols[5], Err::SchemaError, "sessions csv");
    r.qoe_lin = parse_double(cols[6], Err::SchemaError, "sessions csv");
    r.qoe_dnn = parse_double(cols[7], Err::SchemaError, "sessions csv");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string omega_curve_csv(const std::vector<RunLogRow>& log) {
  std::string out = "# jade-schema: omega-curve/v1\nepoch,omega,mean_entropy\n";
  for (const auto& r : log)
    out += std::to_string(r.epoch) + ',' + fmt_double(r.omega) + ',' +
           fmt_double(r.mean_entropy) + '\n';
  return out;
}

std::string learning_curve_csv(const std::vector<RunLogRow>& log) {
  std::string out = "# jade-schema: learning-curve/v1\nepoch,eval_qoe_lin,eval_qoe_dnn\n";
  for (const auto& r : log)
    if (r.eval_qoe_lin && r.eval_qoe_dnn)
      out += std::to_string(r.epoch) + ',' + fmt_double(*r.eval_qoe_lin) + ',' +
             fmt_double(*r.eval_qoe_dnn) + '\n';
  return out;
}

std::string selection_pdf_csv(const std::vector<RunLogRow>& log) {
  std::map<std::string, long long> counts;
  for (const auto& r : log) ++counts[r.trace_id];
  std::string out = "# jade-schema: selection-pdf/v1\ntrace_id,frequency\n";
  for (const auto& [id, n] : counts)
    out += id + ',' + fmt_double(static_cast<double>(n) / static_cast<double>(log.size())) + '\n';
  return out;
}

std::string scatter_csv(const std::vector<SessionRow>& merged_rows) {
  EvalReport merged;
  merged.rows = merged_rows;
  std::string out =
      "# jade-schema: quality-stall-scatter/v1\n"
      "abr,mean_vmaf,vmaf_ci95,stall_ratio_pct,stall_ci95\n";
  for (const auto& r : merged.aggregate()) {
    out += r.abr;
    out += ',' + fmt_double(r.vmaf.first) + ',' + fmt_double(r.vmaf.second);
    out += ',' + fmt_double(r.stall_ratio_pct.first) + ',' + fmt_double(r.stall_ratio_pct.second);
    out += '\n';
  }
  return out;
}

}  // namespace jade
