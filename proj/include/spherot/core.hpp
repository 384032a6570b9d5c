#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace spherot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  ZeroVector,
  OutsideHemisphere,
  AntipodalPoints,
  ZeroProjection,
  OutsideSupport,
  EmptyModel,
  DomainError,
  BelowThreshold,
  SolverFailure,
  DimensionOutOfRange,
  InsufficientDimension,
  EmptyGraph,
  AllRowsZero,
  ResolutionTooCoarse,
  ParseError,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::OutsideHemisphere: return "OutsideHemisphere";
    case ErrorKind::AntipodalPoints: return "AntipodalPoints";
    case ErrorKind::ZeroProjection: return "ZeroProjection";
    case ErrorKind::OutsideSupport: return "OutsideSupport";
    case ErrorKind::EmptyModel: return "EmptyModel";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::BelowThreshold: return "BelowThreshold";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::DimensionOutOfRange: return "DimensionOutOfRange";
    case ErrorKind::InsufficientDimension: return "InsufficientDimension";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::AllRowsZero: return "AllRowsZero";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}
  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

// Log-space value that is either finite or an explicit -infinity tag.
class LogValue {
 public:
  static LogValue finite(double v) { return LogValue(v, false); }
  static LogValue neg_inf() { return LogValue(0.0, true); }

  bool is_neg_inf() const { return neg_inf_; }
  double value() const {
    return neg_inf_ ? -std::numeric_limits<double>::infinity() : value_;
  }
  // Finite payload; calling this on -inf is a logic error.
  double finite_value() const {
    if (neg_inf_) fail(ErrorKind::DomainError, "log value is -inf");
    return value_;
  }

  friend bool operator==(const LogValue& a, const LogValue& b) {
    if (a.neg_inf_ || b.neg_inf_) return a.neg_inf_ == b.neg_inf_;
    return a.value_ == b.value_;
  }

 private:
  LogValue(double v, bool ni) : value_(v), neg_inf_(ni) {}
  double value_;
  bool neg_inf_;
};

// Neumaier compensated summation. Kernel sums run over up to ~1e5 terms and
// feed 1e-12-level comparisons, so plain accumulation is not enough.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Named, splittable random stream. Identical (seed, stream_id) always
// reproduce the identical sequence, and engine_at(i) depends only on
// (seed, stream_id, i) so work can be partitioned across threads in any
// way without changing results.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  std::mt19937_64 engine() const { return engine_at(0); }

  std::mt19937_64 engine_at(std::uint64_t index) const {
    std::uint64_t s = detail::splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
    s = detail::splitmix64(s ^ stream_id);
    s = detail::splitmix64(s ^ index);
    return std::mt19937_64(s);
  }

  RngStream substream(std::uint64_t id) const {
    return RngStream{seed, detail::splitmix64(stream_id ^ (id + 1))};
  }
};

inline unsigned default_thread_count() {
  if (const char* env = std::getenv("SPHEROT_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Static partition of [0, n) over at most `threads` workers. Each index is
// processed exactly once; fn must only write to index-owned slots.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned workers = std::min<std::size_t>(threads ? threads : 1, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace spherot
