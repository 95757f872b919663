/*
 * core.hpp: shared vocabulary for the resonance laboratory
 *
 * Error kinds, the exception type every module throws, a small
 * deterministic parallel map, and number formatting helpers used by
 * the CSV/JSON writers.
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace reslab {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr std::string_view version = "0.3.1";

enum class ErrorKind {
  // schottky
  NonHyperbolicGenerator,
  DiskOverlap,
  SingularMatrix,
  NoIsometricCircle,
  CombinatorialOverflow,
  InsufficientScales,
  // xfer
  BranchFailure,
  IllConditioned,
  NoConvergence,
  // billiard
  EclipseViolation,
  NonAdmissibleWord,
  // thermo
  EmptyWindow,
  NoRootBracket,
  NoBracket,
  // zeros
  BoundaryZero,
  NonConvergedSampling,
  MaxDepth,
  InsufficientWindows,
  // fup
  CapExceeded,
  // cli
  ConfigInvalid,
  InvalidArgument,
};

inline constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonHyperbolicGenerator: return "NonHyperbolicGenerator";
    case ErrorKind::DiskOverlap: return "DiskOverlap";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoIsometricCircle: return "NoIsometricCircle";
    case ErrorKind::CombinatorialOverflow: return "CombinatorialOverflow";
    case ErrorKind::InsufficientScales: return "InsufficientScales";
    case ErrorKind::BranchFailure: return "BranchFailure";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::EclipseViolation: return "EclipseViolation";
    case ErrorKind::NonAdmissibleWord: return "NonAdmissibleWord";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::NoRootBracket: return "NoRootBracket";
    case ErrorKind::NoBracket: return "NoBracket";
    case ErrorKind::BoundaryZero: return "BoundaryZero";
    case ErrorKind::NonConvergedSampling: return "NonConvergedSampling";
    case ErrorKind::MaxDepth: return "MaxDepth";
    case ErrorKind::InsufficientWindows: return "InsufficientWindows";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// ── threading ────────────────────────────────────────────────────────────────

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> n{0};
  return n;
}
}  // namespace detail

/// Caps the number of workers used by parallel_map. 0 means hardware concurrency.
inline void set_threads(unsigned n) { detail::thread_setting().store(n); }

inline unsigned thread_count() {
  unsigned n = detail::thread_setting().load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Evaluates fn(i) for i in [0, n) and returns the results in index order.
/// Work is split into contiguous chunks so output never depends on scheduling.
/// The first exception thrown by any worker is rethrown on the caller.
template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ── formatting ───────────────────────────────────────────────────────────────

/// 17 significant digits: round-trips every finite double.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ── small numerics ───────────────────────────────────────────────────────────

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double residual_rms = 0;
};

/// Ordinary least squares y ≈ slope·x + intercept.
inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) fail(ErrorKind::InvalidArgument, "least_squares needs >= 2 paired samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) fail(ErrorKind::InvalidArgument, "least_squares: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  return f;
}

/// Exponential of a truncated power series: given a(z) = Σ_{k≥1} a_k z^k,
/// returns the coefficients b_0..b_N of exp(a(z)) mod z^{N+1}.
template <class T>
std::vector<T> series_exp(const std::vector<T>& a) {
  const std::size_t n = a.size();
  std::vector<T> b(n, T{});
  if (n == 0) return b;
  b[0] = T{1};
  for (std::size_t k = 1; k < n; ++k) {
    T acc{};
    for (std::size_t j = 1; j <= k; ++j) acc += static_cast<double>(j) * a[j] * b[k - j];
    b[k] = acc / static_cast<double>(k);
  }
  return b;
}

}  // namespace reslab
