#include "jade/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace jade {

const char* err_name(Err code) {
  switch (code) {
    case Err::MalformedLine: return "MalformedLine";
    case Err::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case Err::NonPositiveBandwidth: return "NonPositiveBandwidth";
    case Err::SchemaError: return "SchemaError";
    case Err::MonotonicityViolation: return "MonotonicityViolation";
    case Err::RangeError: return "RangeError";
    case Err::DanglingSessionRef: return "DanglingSessionRef";
    case Err::ScoreOutOfRange: return "ScoreOutOfRange";
    case Err::EmptyQuery: return "EmptyQuery";
    case Err::DegenerateSplit: return "DegenerateSplit";
    case Err::OffsetOutOfRange: return "OffsetOutOfRange";
    case Err::EpisodeFinished: return "EpisodeFinished";
    case Err::NonFiniteInput: return "NonFiniteInput";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::NonFiniteParameter: return "NonFiniteParameter";
    case Err::InsufficientSessions: return "InsufficientSessions";
    case Err::EmptyTestSet: return "EmptyTestSet";
    case Err::UnknownSession: return "UnknownSession";
    case Err::EmptyTrajectory: return "EmptyTrajectory";
    case Err::InvalidClipConfig: return "InvalidClipConfig";
    case Err::UnknownArm: return "UnknownArm";
    case Err::EmptyPool: return "EmptyPool";
    case Err::IoError: return "IoError";
  }
  return "UnknownError";
}

std::string Rng::state() const {
  std::ostringstream ss;
  ss << gen_;
  return ss.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream ss(s);
  ss >> gen_;
  if (ss.fail()) throw Error(Err::SchemaError, "bad rng state string");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Err::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Err::IoError, "cannot write " + path);
  out << contents;
  if (!out) throw Error(Err::IoError, "short write to " + path);
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// validation

void VideoManifest::validate() const {
  if (ladder_mbps.size() < 2) throw Error(Err::SchemaError, "ladder needs at least 2 levels");
  if (sizes_bytes.empty()) throw Error(Err::SchemaError, "manifest needs at least 1 chunk");
  if (!(chunk_duration_s > 0)) throw Error(Err::RangeError, "chunk_duration_s must be > 0");
  for (std::size_t i = 1; i < ladder_mbps.size(); ++i)
    if (!(ladder_mbps[i] > ladder_mbps[i - 1]))
      throw Error(Err::MonotonicityViolation, "ladder_mbps must be strictly ascending");
  if (vmaf.size() != sizes_bytes.size())
    throw Error(Err::SchemaError, "sizes/vmaf chunk counts differ");
  for (std::size_t c = 0; c < sizes_bytes.size(); ++c) {
    const auto& sz = sizes_bytes[c];
    const auto& vm = vmaf[c];
    if (sz.size() != ladder_mbps.size() || vm.size() != ladder_mbps.size())
      throw Error(Err::SchemaError, "chunk " + std::to_string(c) + " row width != ladder size");
    for (std::size_t l = 0; l < sz.size(); ++l) {
      if (!(sz[l] > 0))
        throw Error(Err::RangeError, "sizes_bytes[" + std::to_string(c) + "][" +
                                         std::to_string(l) + "] must be > 0");
      if (!(vm[l] >= 0 && vm[l] <= 100))
        throw Error(Err::RangeError, "vmaf[" + std::to_string(c) + "][" + std::to_string(l) +
                                         "] outside [0,100]");
      if (l > 0 && sz[l] < sz[l - 1])
        throw Error(Err::MonotonicityViolation,
                    "sizes decreasing in bitrate at chunk " + std::to_string(c));
      if (l > 0 && vm[l] < vm[l - 1])
        throw Error(Err::MonotonicityViolation,
                    "vmaf decreasing in bitrate at chunk " + std::to_string(c));
    }
  }
}

void NetworkTrace::validate() const {
  if (samples.size() < 2) throw Error(Err::SchemaError, "trace needs at least 2 samples");
  if (!(samples.front().first >= 0))
    throw Error(Err::NonMonotonicTimestamp, "first timestamp must be >= 0");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].first))
      throw Error(Err::NonMonotonicTimestamp, "sample " + std::to_string(i) + " not finite");
    if (!(samples[i].second > 0) || !std::isfinite(samples[i].second))
      throw Error(Err::NonPositiveBandwidth, "sample " + std::to_string(i));
    if (i > 0 && !(samples[i].first > samples[i - 1].first))
      throw Error(Err::NonMonotonicTimestamp, "sample " + std::to_string(i));
  }
}

void SessionRecord::validate() const {
  if (bitrate_mbps.size() != vmaf.size() || rebuffer_s.size() != vmaf.size())
    throw Error(Err::SchemaError, "session " + session_id + ": array lengths differ");
  if (vmaf.empty()) throw Error(Err::SchemaError, "session " + session_id + ": empty");
  for (std::size_t t = 0; t < vmaf.size(); ++t) {
    if (!(vmaf[t] >= 0 && vmaf[t] <= 100))
      throw Error(Err::RangeError, "session " + session_id + ": vmaf outside [0,100]");
    if (!(rebuffer_s[t] >= 0) || !std::isfinite(rebuffer_s[t]))
      throw Error(Err::RangeError, "session " + session_id + ": negative rebuffer");
    if (!(bitrate_mbps[t] > 0) || !std::isfinite(bitrate_mbps[t]))
      throw Error(Err::RangeError, "session " + session_id + ": bad bitrate");
  }
}

std::vector<std::string> RatingDataset::user_ids() const {
  std::set<std::string> users;
  for (const auto& [key, score] : scores) {
    (void)score;
    users.insert(key.first);
  }
  return {users.begin(), users.end()};
}

void RatingDataset::validate() const {
  for (const auto& [sid, rec] : sessions) {
    if (sid != rec.session_id)
      throw Error(Err::SchemaError, "session key/id mismatch for " + sid);
    rec.validate();
  }
  for (const auto& [qid, sids] : queries) {
    if (sids.size() < 2) throw Error(Err::EmptyQuery, "query " + qid + " has < 2 sessions");
    for (const auto& sid : sids)
      if (!sessions.count(sid))
        throw Error(Err::DanglingSessionRef, "query " + qid + " references " + sid);
  }
  for (const auto& [key, score] : scores) {
    if (!sessions.count(key.second))
      throw Error(Err::DanglingSessionRef, "score for unknown session " + key.second);
    if (!(score >= 0 && score <= 100))
      throw Error(Err::ScoreOutOfRange,
                  "user " + key.first + " session " + key.second + ": " + fmt_double(score));
  }
}

// ---------------------------------------------------------------------------
// traces

NetworkTrace load_trace(const std::string& path) {
  const std::string text = read_text_file(path);
  NetworkTrace trace;
  trace.id = fs::path(path).stem().string();
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    ++line_no;
    start = end + 1;
    if (end == text.size() && line.empty()) break;
    // strip comments and surrounding whitespace
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty()) continue;

    const std::size_t sep = line.find_first_of(" \t");
    if (sep == std::string_view::npos)
      throw Error(Err::MalformedLine, path + ":" + std::to_string(line_no));
    std::string_view ts = line.substr(0, sep);
    std::string_view bw = line.substr(sep);
    while (!bw.empty() && (bw.front() == ' ' || bw.front() == '\t')) bw.remove_prefix(1);
    if (bw.find_first_of(" \t") != std::string_view::npos)
      throw Error(Err::MalformedLine, path + ":" + std::to_string(line_no) + ": extra column");
    const double t = parse_double(ts, Err::MalformedLine, path + ":" + std::to_string(line_no));
    const double b = parse_double(bw, Err::MalformedLine, path + ":" + std::to_string(line_no));
    if (!(b > 0) || !std::isfinite(b))
      throw Error(Err::NonPositiveBandwidth, path + ":" + std::to_string(line_no));
    if (!std::isfinite(t) ||
        (trace.samples.empty() ? t < 0 : !(t > trace.samples.back().first)))
      throw Error(Err::NonMonotonicTimestamp, path + ":" + std::to_string(line_no));
    trace.samples.emplace_back(t, b);
  }
  trace.validate();
  return trace;
}

void save_trace(const NetworkTrace& trace, const std::string& path) {
  trace.validate();
  std::string out;
  for (const auto& [t, b] : trace.samples) {
    out += fmt_double(t);
    out += ' ';
    out += fmt_double(b);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<NetworkTrace> load_trace_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error(Err::IoError, "no trace files in " + dir);
  std::vector<NetworkTrace> traces;
  traces.reserve(paths.size());
  for (const auto& p : paths) traces.push_back(load_trace(p));
  return traces;
}

// ---------------------------------------------------------------------------
// manifests

VideoManifest load_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Err::SchemaError, path + ": " + e.what());
  }
  VideoManifest m;
  try {
    m.chunk_duration_s = j.at("chunk_duration_s").get<double>();
    m.ladder_mbps = j.at("ladder_mbps").get<std::vector<double>>();
    for (const auto& chunk : j.at("chunks")) {
      m.sizes_bytes.push_back(chunk.at("sizes_bytes").get<std::vector<double>>());
      m.vmaf.push_back(chunk.at("vmaf").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Err::SchemaError, path + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const VideoManifest& m, const std::string& path) {
  m.validate();
  nlohmann::json j;
  j["chunk_duration_s"] = m.chunk_duration_s;
  j["ladder_mbps"] = m.ladder_mbps;
  nlohmann::json chunks = nlohmann::json::array();
  for (std::size_t c = 0; c < m.num_chunks(); ++c) {
    nlohmann::json chunk;
    chunk["sizes_bytes"] = m.sizes_bytes[c];
    chunk["vmaf"] = m.vmaf[c];
    chunks.push_back(std::move(chunk));
  }
  j["chunks"] = std::move(chunks);
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// ratings

namespace {

std::vector<std::string> csv_rows(const std::string& text, const std::string& path,
                                  const std::string& expected_header) {
  std::vector<std::string> rows;
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
        throw Error(Err::SchemaError, path + ": header '" + line + "' != '" + expected_header + "'");
      saw_header = true;
      continue;
    }
    rows.push_back(std::move(line));
  }
  if (!saw_header) throw Error(Err::SchemaError, path + ": missing header");
  return rows;
}

}  // namespace

RatingDataset load_ratings(const std::string& dir) {
  const std::string sessions_path = (fs::path(dir) / "sessions.csv").string();
  const std::string scores_path = (fs::path(dir) / "scores.csv").string();

  RatingDataset d;
  // sessions.csv rows must be grouped per session with ascending chunk_index.
  std::map<std::string, std::size_t> next_chunk;
  for (const auto& row : csv_rows(read_text_file(sessions_path), sessions_path,
                                  "session_id,chunk_index,vmaf,bitrate_mbps,rebuffer_s")) {
    const auto cols = split_csv_line(row);
    if (cols.size() != 5) throw Error(Err::SchemaError, sessions_path + ": bad row '" + row + "'");
    const std::string sid(cols[0]);
    const long long idx = parse_int(cols[1], Err::SchemaError, sessions_path);
    auto& rec = d.sessions[sid];
    rec.session_id = sid;
    if (idx != static_cast<long long>(next_chunk[sid]))
      throw Error(Err::SchemaError,
                  sessions_path + ": session " + sid + " chunk_index out of order");
    ++next_chunk[sid];
    rec.vmaf.push_back(parse_double(cols[2], Err::SchemaError, sessions_path));
    rec.bitrate_mbps.push_back(parse_double(cols[3], Err::SchemaError, sessions_path));
    rec.rebuffer_s.push_back(parse_double(cols[4], Err::SchemaError, sessions_path));
  }

  std::map<std::string, std::set<std::string>> query_sets;
  for (const auto& row : csv_rows(read_text_file(scores_path), scores_path,
                                  "query_id,session_id,user_id,score")) {
    const auto cols = split_csv_line(row);
    if (cols.size() != 4) throw Error(Err::SchemaError, scores_path + ": bad row '" + row + "'");
    const std::string qid(cols[0]);
    const std::string sid(cols[1]);
    const std::string uid(cols[2]);
    if (!d.sessions.count(sid))
      throw Error(Err::DanglingSessionRef, scores_path + ": unknown session " + sid);
    const double score = parse_double(cols[3], Err::SchemaError, scores_path);
    if (!(score >= 0 && score <= 100))
      throw Error(Err::ScoreOutOfRange, scores_path + ": " + row);
    query_sets[qid].insert(sid);
    d.scores[{uid, sid}] = score;
  }
  for (auto& [qid, sids] : query_sets)
    d.queries[qid] = std::vector<std::string>(sids.begin(), sids.end());
  d.validate();
  return d;
}

void save_ratings(const RatingDataset& d, const std::string& dir) {
  d.validate();
  fs::create_directories(dir);

  std::string sessions = "session_id,chunk_index,vmaf,bitrate_mbps,rebuffer_s\n";
  for (const auto& [sid, rec] : d.sessions) {
    for (std::size_t t = 0; t < rec.length(); ++t) {
      sessions += sid;
      sessions += ',' + std::to_string(t);
      sessions += ',' + fmt_double(rec.vmaf[t]);
      sessions += ',' + fmt_double(rec.bitrate_mbps[t]);
      sessions += ',' + fmt_double(rec.rebuffer_s[t]);
      sessions += '\n';
    }
  }
  write_text_file((fs::path(dir) / "sessions.csv").string(), sessions);

  // canonical row order: (query, session, user)
  std::string scores = "query_id,session_id,user_id,score\n";
  std::map<std::string, std::string> session_query;
  for (const auto& [qid, sids] : d.queries)
    for (const auto& sid : sids) session_query[sid] = qid;
  std::vector<std::tuple<std::string, std::string, std::string, double>> rows;
  for (const auto& [key, score] : d.scores) {
    auto it = session_query.find(key.second);
    const std::string qid = it == session_query.end() ? std::string("q0") : it->second;
    rows.emplace_back(qid, key.second, key.first, score);
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [qid, sid, uid, score] : rows)
    scores += qid + ',' + sid + ',' + uid + ',' + fmt_double(score) + '\n';
  write_text_file((fs::path(dir) / "scores.csv").string(), scores);
}

std::pair<RatingDataset, RatingDataset> split_dataset(const RatingDataset& d,
                                                      double train_fraction, uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1))
    throw Error(Err::RangeError, "train_fraction must be in (0,1)");
  std::vector<std::string> sids;
  sids.reserve(d.sessions.size());
  for (const auto& [sid, rec] : d.sessions) {
    (void)rec;
    sids.push_back(sid);
  }
  Rng rng(seed);
  // Fisher-Yates
  for (std::size_t i = sids.size(); i > 1; --i)
    std::swap(sids[i - 1], sids[rng.below(i)]);

  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(sids.size())));
  if (n_train == 0 || n_train >= sids.size())
    throw Error(Err::DegenerateSplit, "split leaves one side empty");

  std::set<std::string> train_ids(sids.begin(), sids.begin() + n_train);
  auto build = [&](bool train_side) {
    RatingDataset out;
    for (const auto& [sid, rec] : d.sessions)
      if (train_ids.count(sid) == train_side) out.sessions[sid] = rec;
    for (const auto& [qid, qsids] : d.queries) {
      std::vector<std::string> kept;
      for (const auto& sid : qsids)
        if (out.sessions.count(sid)) kept.push_back(sid);
      if (kept.size() >= 2) out.queries[qid] = std::move(kept);
    }
    for (const auto& [key, score] : d.scores)
      if (out.sessions.count(key.second)) out.scores[key] = score;
    return out;
  };
  return {build(true), build(false)};
}

}  // namespace jade
