#include <doctest.h>

#include <filesystem>
#include <functional>

#include "jade/data.hpp"
#include "jade/synth.hpp"

using namespace jade;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path p = fs::temp_directory_path() / ("jade_data_test_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

Err code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a jade::Error");
  return Err::IoError;
}

}  // namespace

TEST_CASE("trace parsing") {
  const fs::path dir = temp_dir();
  const auto path = (dir / "t.txt").string();

  SUBCASE("two samples") {
    write_text_file(path, "0 1.0\n1 2.0");
    const auto trace = load_trace(path);
    REQUIRE(trace.samples.size() == 2);
    CHECK(trace.samples[0].second == 1.0);
    CHECK(trace.samples[1].second == 2.0);
    CHECK(trace.id == "t");
  }

  SUBCASE("comments and blank lines skipped") {
    write_text_file(path, "# header\n0 1.0\n\n1 2.0  # inline\n");
    CHECK(load_trace(path).samples.size() == 2);
  }

  SUBCASE("non-monotonic timestamp names the line") {
    write_text_file(path, "0 1.0\n0 2.0");
    try {
      load_trace(path);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Err::NonMonotonicTimestamp);
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }

  SUBCASE("bad bandwidth / malformed rows") {
    write_text_file(path, "0 0\n1 1");
    CHECK(code_of([&] { load_trace(path); }) == Err::NonPositiveBandwidth);
    write_text_file(path, "0\n");
    CHECK(code_of([&] { load_trace(path); }) == Err::MalformedLine);
    write_text_file(path, "0 1 2\n");
    CHECK(code_of([&] { load_trace(path); }) == Err::MalformedLine);
  }

  SUBCASE("write/read round trip on a synthetic trace") {
    Rng rng(3);
    const auto trace = synth_trace(TraceKind::Walk, 2.0, 100.0, 1.0, rng, "walk");
    save_trace(trace, path);
    const auto loaded = load_trace(path);
    REQUIRE(loaded.samples.size() == trace.samples.size());
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
      CHECK(loaded.samples[i].first == trace.samples[i].first);
      CHECK(loaded.samples[i].second == trace.samples[i].second);
    }
    // canonical form: save(load(x)) is byte-identical
    const auto path2 = (dir / "t2.txt").string();
    save_trace(loaded, path2);
    CHECK(read_text_file(path) == read_text_file(path2));
  }
}

TEST_CASE("manifest parsing") {
  const fs::path dir = temp_dir();
  const auto path = (dir / "m.json").string();

  SUBCASE("synthetic manifest loads with expected shape") {
    save_manifest(synth_manifest(48, 4.0, 5), path);
    const auto m = load_manifest(path);
    CHECK(m.num_chunks() == 48);
    CHECK(m.num_levels() == 6);
    // canonical round trip
    const auto path2 = (dir / "m2.json").string();
    save_manifest(m, path2);
    CHECK(read_text_file(path) == read_text_file(path2));
  }

  SUBCASE("vmaf out of range") {
    auto m = synth_manifest(4, 4.0, 5);
    m.vmaf[3][2] = 101.0;
    CHECK(code_of([&] { m.validate(); }) == Err::RangeError);
  }

  SUBCASE("sizes must be non-decreasing in bitrate") {
    auto m = synth_manifest(4, 4.0, 5);
    m.sizes_bytes[0][1] = m.sizes_bytes[0][0] - 10;
    CHECK(code_of([&] { m.validate(); }) == Err::MonotonicityViolation);
  }

  SUBCASE("schema errors surface") {
    write_text_file(path, "{\"ladder_mbps\": [1, 2]}");
    CHECK(code_of([&] { load_manifest(path); }) == Err::SchemaError);
    write_text_file(path, "not json");
    CHECK(code_of([&] { load_manifest(path); }) == Err::SchemaError);
  }
}

TEST_CASE("ratings loading") {
  const fs::path dir = temp_dir();

  SUBCASE("counts: 2 queries x 3 sessions x 4 users") {
    SynthRatingsConfig cfg;
    cfg.n_queries = 2;
    cfg.sessions_per_query = 3;
    cfg.users = 4;
    const auto d = synth_ratings(cfg);
    CHECK(d.queries.size() == 2);
    CHECK(d.sessions.size() == 6);
    CHECK(d.user_ids().size() == 4);
    CHECK(d.scores.size() == 24);

    save_ratings(d, dir.string());
    const auto loaded = load_ratings(dir.string());
    CHECK(loaded.scores.size() == 24);
    CHECK(loaded.sessions.size() == 6);

    // canonical round trip, both files
    const fs::path dir2 = temp_dir();
    save_ratings(loaded, dir2.string());
    CHECK(read_text_file((dir / "sessions.csv").string()) ==
          read_text_file((dir2 / "sessions.csv").string()));
    CHECK(read_text_file((dir / "scores.csv").string()) ==
          read_text_file((dir2 / "scores.csv").string()));
  }

  SUBCASE("dangling session reference") {
    write_text_file((dir / "sessions.csv").string(),
                    "session_id,chunk_index,vmaf,bitrate_mbps,rebuffer_s\ns0,0,50,1.2,0\n");
    write_text_file((dir / "scores.csv").string(),
                    "query_id,session_id,user_id,score\nq0,s9,u0,50\n");
    CHECK(code_of([&] { load_ratings(dir.string()); }) == Err::DanglingSessionRef);
  }

  SUBCASE("score out of range") {
    write_text_file((dir / "sessions.csv").string(),
                    "session_id,chunk_index,vmaf,bitrate_mbps,rebuffer_s\n"
                    "s0,0,50,1.2,0\ns1,0,60,1.2,0\n");
    write_text_file((dir / "scores.csv").string(),
                    "query_id,session_id,user_id,score\nq0,s0,u0,101\nq0,s1,u0,10\n");
    CHECK(code_of([&] { load_ratings(dir.string()); }) == Err::ScoreOutOfRange);
  }
}

TEST_CASE("dataset splitting") {
  SynthRatingsConfig cfg;
  cfg.n_queries = 2;
  cfg.sessions_per_query = 5;
  cfg.users = 3;
  const auto d = synth_ratings(cfg);  // 10 sessions

  SUBCASE("0.8 gives 8/2 sessions, disjoint") {
    const auto [train, test] = split_dataset(d, 0.8, 42);
    CHECK(train.sessions.size() == 8);
    CHECK(test.sessions.size() == 2);
    for (const auto& [sid, rec] : test.sessions) {
      (void)rec;
      CHECK(train.sessions.count(sid) == 0);
    }
    // every score lands with its session
    CHECK(train.scores.size() + test.scores.size() == d.scores.size());
  }

  SUBCASE("same seed twice gives identical splits") {
    const auto [a_train, a_test] = split_dataset(d, 0.7, 9);
    const auto [b_train, b_test] = split_dataset(d, 0.7, 9);
    CHECK(a_train.sessions.size() == b_train.sessions.size());
    for (const auto& [sid, rec] : a_train.sessions) {
      (void)rec;
      CHECK(b_train.sessions.count(sid) == 1);
    }
    CHECK(a_test.scores == b_test.scores);
  }

  SUBCASE("degenerate split rejected") {
    SynthRatingsConfig tiny;
    tiny.n_queries = 1;
    tiny.sessions_per_query = 2;
    tiny.users = 2;
    const auto small = synth_ratings(tiny);
    CHECK_THROWS_AS(split_dataset(small, 0.99, 1), Error);
  }
}

TEST_CASE("generated corrupt trace files never load silently") {
  const fs::path dir = temp_dir();
  const auto path = (dir / "fuzz.txt").string();
  const char* corruptions[] = {"a b\n",   "1\n",     "0 1.0\n0 0.5\n", "0 -1\n",
                               "nan 1\n", "0 nan\n", "0 1 2\n",        "5 1\n4 1\n"};
  for (const char* bad : corruptions) {
    write_text_file(path, bad);
    CHECK_THROWS_AS(load_trace(path), Error);
  }
}
