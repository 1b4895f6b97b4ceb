#include <doctest.h>

#include <cmath>

#include "jade/sim.hpp"
#include "jade/synth.hpp"

using namespace jade;

namespace {

// One chunk, flat ladder: 4 Mbit at every level, vmaf 50..100.
VideoManifest tiny_manifest(double chunk_duration = 4.0, double mbit = 4.0) {
  VideoManifest m;
  m.chunk_duration_s = chunk_duration;
  m.ladder_mbps = {0.3, 0.75, 1.2, 1.85, 2.85, 4.3};
  for (int c = 0; c < 8; ++c) {
    std::vector<double> sizes, vmafs;
    for (std::size_t l = 0; l < m.ladder_mbps.size(); ++l) {
      sizes.push_back(mbit * 1e6 / 8.0 + static_cast<double>(l));
      vmafs.push_back(50.0 + 10.0 * static_cast<double>(l));
    }
    m.sizes_bytes.push_back(sizes);
    m.vmaf.push_back(vmafs);
  }
  return m;
}

NetworkTrace flat_trace(double mbps, double span = 1000.0) {
  NetworkTrace t;
  t.id = "flat";
  t.samples = {{0.0, mbps}, {span, mbps}};
  return t;
}

SimConfig no_rtt_cfg() {
  SimConfig cfg;
  cfg.per_chunk_rtt_s = 0;
  cfg.buffer_cap_s = 60;
  return cfg;
}

// Straight-line piecewise arithmetic for traces with at most 3 constant
// segments, independent of the cursor walk in sim_step.
double closed_form_transfer(const std::vector<std::pair<double, double>>& samples, double offset,
                            double mbit) {
  double elapsed = 0, remaining = mbit, pos = offset;
  while (remaining > 1e-15) {
    // locate segment containing pos (samples relative to t0, wrap over span)
    const double span = samples.back().first - samples.front().first;
    double local = std::fmod(pos, span);
    std::size_t seg = 0;
    while (seg + 2 < samples.size() && samples[seg + 1].first - samples[0].first <= local) ++seg;
    const double seg_end = samples[seg + 1].first - samples[0].first;
    const double bw = samples[seg].second;
    const double avail = (seg_end - local) * bw;
    if (remaining <= avail) {
      elapsed += remaining / bw;
      remaining = 0;
    } else {
      elapsed += seg_end - local;
      remaining -= avail;
      pos += seg_end - local;
    }
  }
  return elapsed;
}

}  // namespace

TEST_CASE("reset semantics") {
  const auto manifest = tiny_manifest();
  const auto trace = flat_trace(1.0);
  const auto cfg = no_rtt_cfg();

  const SimState s = sim_reset(manifest, trace, cfg, 0);
  CHECK(s.buffer_s == 0);
  CHECK(s.chunk_index == 0);
  CHECK(s.wall_clock_s == 0);
  CHECK(s.last_action == -1);

  SUBCASE("mid-sample offset lands inside the segment") {
    NetworkTrace two;
    two.id = "two";
    two.samples = {{0, 1.0}, {10, 2.0}, {20, 1.0}};
    const SimState mid = sim_reset(manifest, two, cfg, 14.5);
    CHECK(mid.cursor.segment == 1);
    CHECK(mid.cursor.offset_s == doctest::Approx(4.5));
  }

  SUBCASE("identical resets produce identical states") {
    const SimState a = sim_reset(manifest, trace, cfg, 123.0);
    const SimState b = sim_reset(manifest, trace, cfg, 123.0);
    CHECK(a == b);
  }

  SUBCASE("offset out of range without wrap") {
    SimConfig nw = cfg;
    nw.trace_wraps = false;
    CHECK_THROWS_AS(sim_reset(manifest, trace, nw, 2000.0), Error);
    CHECK_NOTHROW(sim_reset(manifest, trace, nw, 500.0));
  }
}

TEST_CASE("step download arithmetic") {
  const auto manifest = tiny_manifest();  // 4 Mbit chunks, 4 s duration
  const auto trace = flat_trace(1.0);     // 1 Mbps
  const auto cfg = no_rtt_cfg();

  SUBCASE("buffer 10 s: download 4 s, no rebuffer, buffer back to 10") {
    SimState s = sim_reset(manifest, trace, cfg, 0);
    s.buffer_s = 10;
    const auto [next, out] = sim_step(manifest, trace, cfg, s, 0);
    CHECK(out.download_time_s == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(out.rebuffer_s == 0);
    CHECK(next.buffer_s == doctest::Approx(10.0).epsilon(1e-12));
  }

  SUBCASE("buffer 2 s: rebuffer 2 s, buffer ends at 4") {
    SimState s = sim_reset(manifest, trace, cfg, 0);
    s.buffer_s = 2;
    const auto [next, out] = sim_step(manifest, trace, cfg, s, 0);
    CHECK(out.rebuffer_s == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(next.buffer_s == doctest::Approx(4.0).epsilon(1e-12));
  }

  SUBCASE("size -> 0 with zero rtt gives download -> 0") {
    auto small = manifest;
    for (auto& row : small.sizes_bytes)
      for (auto& sz : row) sz = 1e-9;
    SimState s = sim_reset(small, trace, cfg, 0);
    const auto [next, out] = sim_step(small, trace, cfg, s, 0);
    (void)next;
    CHECK(out.download_time_s < 1e-12);
    CHECK(out.rebuffer_s < 1e-12);
  }

  SUBCASE("vmaf change tracks the previous delivered chunk") {
    SimState s = sim_reset(manifest, trace, cfg, 0);
    auto [s1, o1] = sim_step(manifest, trace, cfg, s, 2);
    CHECK(o1.vmaf_change == 0);  // first chunk
    auto [s2, o2] = sim_step(manifest, trace, cfg, s1, 5);
    (void)s2;
    CHECK(o2.vmaf_change == doctest::Approx(30.0));  // 100 - 70
  }

  SUBCASE("episode finish guard") {
    SimState s = sim_reset(manifest, trace, cfg, 0);
    for (std::size_t c = 0; c < manifest.num_chunks(); ++c)
      s = sim_step(manifest, trace, cfg, s, 0).first;
    CHECK_THROWS_AS(sim_step(manifest, trace, cfg, s, 0), Error);
  }
}

TEST_CASE("buffer overflow idles until the cap") {
  auto manifest = tiny_manifest();
  const auto trace = flat_trace(100.0);  // fast: downloads ~0.04 s
  SimConfig cfg = no_rtt_cfg();
  cfg.buffer_cap_s = 10;

  SimState s = sim_reset(manifest, trace, cfg, 0);
  StepOutcome last{};
  for (int c = 0; c < 4; ++c) {
    auto [next, out] = sim_step(manifest, trace, cfg, s, 0);
    s = next;
    last = out;
    CHECK(s.buffer_s <= cfg.buffer_cap_s + 1e-12);
  }
  CHECK(s.buffer_s == doctest::Approx(cfg.buffer_cap_s));
  CHECK(last.sleep_s > 0);
}

TEST_CASE("closed-form equivalence on short traces") {
  const auto manifest = tiny_manifest();
  Rng rng(17);
  for (int n = 0; n < 200; ++n) {
    NetworkTrace trace;
    trace.id = "seg";
    const int segs = 1 + static_cast<int>(rng.below(3));
    double t = 0;
    for (int i = 0; i <= segs; ++i) {
      trace.samples.emplace_back(t, rng.uniform(0.3, 8.0));
      t += rng.uniform(1.0, 30.0);
    }
    SimConfig cfg = no_rtt_cfg();
    const double offset = rng.uniform(0.0, trace.span_s());
    SimState s = sim_reset(manifest, trace, cfg, offset);
    const auto [next, out] = sim_step(manifest, trace, cfg, s, 3);
    (void)next;
    const double mbit = manifest.sizes_bytes[0][3] * 8.0 / 1e6;
    const double expect = closed_form_transfer(trace.samples, offset, mbit);
    CHECK(out.download_time_s == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("rollout structure and conservation") {
  const auto manifest = synth_manifest(48, 4.0, 7);
  Rng rng(2);
  const auto trace = synth_trace(TraceKind::Square, 2.0, 300.0, 1.0, rng, "sq");
  SimConfig cfg;

  SUBCASE("lowest bitrate on a fast trace never stalls after startup") {
    // chunk 0 downloads into an empty buffer, so the rebuffer identity
    // necessarily charges the startup delay there
    const auto fast = flat_trace(50.0);
    const auto rr = rollout([](const SimState&, const std::vector<StepOutcome>&) { return 0; },
                            manifest, fast, cfg);
    CHECK(rr.outcomes[0].rebuffer_s == doctest::Approx(rr.outcomes[0].download_time_s));
    double rebuf = 0;
    for (std::size_t t = 1; t < rr.outcomes.size(); ++t) rebuf += rr.outcomes[t].rebuffer_s;
    CHECK(rebuf == 0);
  }

  SUBCASE("session record mirrors outcomes") {
    const auto rr = rollout([](const SimState&, const std::vector<StepOutcome>& h) {
      return static_cast<int>(h.size() % 6);
    }, manifest, trace, cfg);
    REQUIRE(rr.session.length() == manifest.num_chunks());
    REQUIRE(rr.outcomes.size() == manifest.num_chunks());
    for (std::size_t t = 0; t < rr.outcomes.size(); ++t) {
      CHECK(rr.session.vmaf[t] == rr.outcomes[t].chunk_vmaf);
      CHECK(rr.session.bitrate_mbps[t] == rr.outcomes[t].chunk_bitrate_mbps);
      CHECK(rr.session.rebuffer_s[t] == rr.outcomes[t].rebuffer_s);
    }
    CHECK(rr.outcomes.back().done);
  }

  SUBCASE("wall clock decomposes into download + sleep") {
    SimState s = sim_reset(manifest, trace, cfg, 0);
    double acc = 0;
    Rng arng(5);
    while (s.chunk_index < manifest.num_chunks()) {
      const auto [next, out] = sim_step(manifest, trace, cfg, s,
                                        static_cast<int>(arng.below(6)));
      acc += out.download_time_s + out.sleep_s;
      CHECK(out.rebuffer_s ==
            doctest::Approx(std::max(0.0, out.download_time_s - s.buffer_s)).epsilon(1e-12));
      s = next;
      CHECK(s.wall_clock_s == doctest::Approx(acc).epsilon(1e-12));
    }
  }

  SUBCASE("policy errors carry chunk context") {
    try {
      rollout([](const SimState& st, const std::vector<StepOutcome>&) -> int {
        if (st.chunk_index == 3) throw Error(Err::RangeError, "boom");
        return 0;
      }, manifest, trace, cfg);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("chunk 3") != std::string::npos);
      CHECK(e.code() == Err::RangeError);
    }
  }
}

TEST_CASE("monotone hurt: bigger chunks never download faster") {
  Rng rng(23);
  for (int n = 0; n < 50; ++n) {
    auto manifest = tiny_manifest();
    const auto trace = synth_trace(TraceKind::Walk, rng.uniform(0.5, 4.0), 200.0, 1.0, rng,
                                   "walk");
    SimConfig cfg;
    cfg.per_chunk_rtt_s = rng.uniform(0.0, 0.3);
    const double offset = rng.uniform(0.0, 150.0);
    SimState s = sim_reset(manifest, trace, cfg, offset);
    s.buffer_s = rng.uniform(0.0, 30.0);
    double prev_time = 0;
    for (int level = 0; level < 6; ++level) {
      // ladder sizes ascend by construction
      const auto [next, out] = sim_step(manifest, trace, cfg, s, level);
      (void)next;
      CHECK(out.download_time_s >= prev_time - 1e-12);
      prev_time = out.download_time_s;
    }
  }
}

TEST_CASE("determinism: identical inputs give identical outcome sequences") {
  const auto manifest = synth_manifest(20, 4.0, 9);
  Rng rng(4);
  const auto trace = synth_trace(TraceKind::Ramp, 1.5, 300.0, 1.0, rng, "ramp");
  SimConfig cfg;
  auto run = [&] {
    std::vector<StepOutcome> outs;
    SimState s = sim_reset(manifest, trace, cfg, 42.0);
    Rng arng(11);
    while (s.chunk_index < manifest.num_chunks()) {
      auto [next, out] = sim_step(manifest, trace, cfg, s, static_cast<int>(arng.below(6)));
      outs.push_back(out);
      s = next;
    }
    return outs;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].download_time_s == b[i].download_time_s);
    CHECK(a[i].rebuffer_s == b[i].rebuffer_s);
    CHECK(a[i].sleep_s == b[i].sleep_s);
  }
}
