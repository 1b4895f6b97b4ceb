#ifndef JADE_COMMON_HPP
#define JADE_COMMON_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jade {

enum class Err {
  // data-model
  MalformedLine,
  NonMonotonicTimestamp,
  NonPositiveBandwidth,
  SchemaError,
  MonotonicityViolation,
  RangeError,
  DanglingSessionRef,
  ScoreOutOfRange,
  EmptyQuery,
  DegenerateSplit,
  // net-sim
  OffsetOutOfRange,
  EpisodeFinished,
  // tinynet
  NonFiniteInput,
  ShapeMismatch,
  NonFiniteParameter,
  // qoe-rank
  InsufficientSessions,
  EmptyTestSet,
  UnknownSession,
  // policy-rl
  EmptyTrajectory,
  InvalidClipConfig,
  // trace-select
  UnknownArm,
  EmptyPool,
  // io
  IoError,
};

const char* err_name(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

// Deterministic RNG with pinned sampling arithmetic. mt19937_64 output is
// specified bit-exactly by the standard, and every derived draw below avoids
// std::*_distribution so trajectories reproduce across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller, one deviate per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Independent child stream (splitmix64 of seed ^ stream tag).
  Rng split(uint64_t stream) {
    uint64_t z = gen_() + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  // engine state round-trip, for checkpoint resume
  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
};

// Shortest round-trip decimal form; canonical float formatting for every
// file the toolkit emits.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, Err code, const std::string& ctx) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(code, "bad number '" + std::string(s) + "' in " + ctx);
  return v;
}

inline long long parse_int(std::string_view s, Err code, const std::string& ctx) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(code, "bad integer '" + std::string(s) + "' in " + ctx);
  return v;
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace jade

#endif
