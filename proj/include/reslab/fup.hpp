/*
 * fup.hpp: discrete fractal uncertainty principle
 *
 * X = {Σ_j a_j M^j : a_j ∈ A, j < k} ⊂ Z_N, N = M^k. The operator
 *     B = 1_X F_N 1_X,  (F_N)_{xy} = N^{-1/2} e^{-2πi xy/N}
 * has norm ≤ 1; β_k = -log ||B|| / log N.
 *
 * Small sets: dense Hermitian eigensolve of B*B. Larger sets: Lanczos on B*B
 * with full reorthogonalization, using either a phase-table matvec (cost |X|²)
 * or an FFT of length N (cost N log N), whichever is cheaper.
 */
#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "reslab/core.hpp"

namespace reslab::fup {

struct CantorSpec {
  int M = 2;
  std::vector<int> alphabet;

  double delta() const { return std::log(static_cast<double>(alphabet.size())) / std::log(static_cast<double>(M)); }

  void validate() const {
    if (M < 2) fail(ErrorKind::InvalidArgument, "base M must be >= 2");
    if (alphabet.empty()) fail(ErrorKind::InvalidArgument, "alphabet must be nonempty");
    std::vector<int> a = alphabet;
    std::sort(a.begin(), a.end());
    if (std::adjacent_find(a.begin(), a.end()) != a.end()) fail(ErrorKind::InvalidArgument, "alphabet has repeated digits");
    if (a.front() < 0 || a.back() >= M) fail(ErrorKind::InvalidArgument, "alphabet digits must lie in 0..M-1");
  }

  std::string alphabet_string() const {
    std::string s;
    for (int a : alphabet) s += (s.empty() ? "" : " ") + std::to_string(a);
    return s;
  }
};

struct Limits {
  std::size_t max_set_size = 1u << 22;
  std::uint64_t max_N = std::uint64_t{1} << 31;
  std::size_t dense_limit = 256;  // |X| handled by a dense eigensolve
};

inline std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  while (e-- > 0) {
    if (r > std::numeric_limits<std::uint64_t>::max() / b) fail(ErrorKind::CapExceeded, "M^k overflows");
    r *= b;
  }
  return r;
}

inline std::vector<std::uint64_t> cantor_indices(const CantorSpec& spec, int k, const Limits& lim = {}) {
  spec.validate();
  if (k < 1) fail(ErrorKind::InvalidArgument, "depth k must be >= 1");
  const double size = std::pow(static_cast<double>(spec.alphabet.size()), k);
  if (size > static_cast<double>(lim.max_set_size))
    fail(ErrorKind::CapExceeded, "|A|^k = " + fmt17(size) + " exceeds the cap " + std::to_string(lim.max_set_size));
  std::vector<std::uint64_t> X{0};
  std::uint64_t place = 1;
  for (int j = 0; j < k; ++j) {
    std::vector<std::uint64_t> next;
    next.reserve(X.size() * spec.alphabet.size());
    for (std::uint64_t x : X)
      for (int a : spec.alphabet) next.push_back(x + static_cast<std::uint64_t>(a) * place);
    X = std::move(next);
    if (j + 1 < k) place *= static_cast<std::uint64_t>(spec.M);
  }
  std::sort(X.begin(), X.end());
  return X;
}

struct FupResult {
  int k = 0;
  std::uint64_t N = 0;
  std::size_t set_size = 0;
  double norm = 0;
  double beta = 0;
  std::string method;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// y = B v  and  B* y, via one of the two matvec backends.
class SubmatrixOperator {
 public:
  SubmatrixOperator(const std::vector<std::uint64_t>& X, std::uint64_t N) : X_(X), N_(N), n_(X.size()) {
    const double table_cost = 8.0 * static_cast<double>(n_) * static_cast<double>(n_);
    const double fft_cost = 5.0 * static_cast<double>(N) * std::log2(static_cast<double>(N));
    use_fft_ = fft_cost < table_cost;
    scale_ = 1.0 / std::sqrt(static_cast<double>(N));
    if (use_fft_) {
      buf_ = fftw_alloc_complex(N);
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fwd_ = fftw_plan_dft_1d(static_cast<int>(N), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_1d(static_cast<int>(N), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      phase_.resize(N);
      for (std::uint64_t m = 0; m < N; ++m) {
        const double t = -2 * pi * static_cast<double>(m) / static_cast<double>(N);
        phase_[m] = cplx(std::cos(t), std::sin(t));
      }
    }
  }
  ~SubmatrixOperator() {
    if (use_fft_) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(bwd_);
      fftw_free(buf_);
    }
  }
  SubmatrixOperator(const SubmatrixOperator&) = delete;
  SubmatrixOperator& operator=(const SubmatrixOperator&) = delete;

  bool uses_fft() const { return use_fft_; }

  /// sign = -1 applies B, +1 applies B* (B is symmetric, so B* = conj(B)).
  Eigen::VectorXcd apply(const Eigen::VectorXcd& v, int sign) const {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(n_));
    if (use_fft_) {
      std::fill(reinterpret_cast<double*>(buf_), reinterpret_cast<double*>(buf_) + 2 * N_, 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        buf_[X_[i]][0] = v[static_cast<Eigen::Index>(i)].real();
        buf_[X_[i]][1] = v[static_cast<Eigen::Index>(i)].imag();
      }
      fftw_execute(sign < 0 ? fwd_ : bwd_);
      for (std::size_t i = 0; i < n_; ++i) out[static_cast<Eigen::Index>(i)] = scale_ * cplx(buf_[X_[i]][0], buf_[X_[i]][1]);
      return out;
    }
    for (std::size_t i = 0; i < n_; ++i) {
      cplx acc = 0;
      const std::uint64_t xi = X_[i];
      for (std::size_t j = 0; j < n_; ++j) {
        const cplx p = phase_[static_cast<std::size_t>((static_cast<unsigned __int128>(xi) * X_[j]) % N_)];
        acc += (sign < 0 ? p : std::conj(p)) * v[static_cast<Eigen::Index>(j)];
      }
      out[static_cast<Eigen::Index>(i)] = scale_ * acc;
    }
    return out;
  }

 private:
  const std::vector<std::uint64_t>& X_;
  std::uint64_t N_;
  std::size_t n_;
  bool use_fft_ = false;
  double scale_ = 1;
  std::vector<cplx> phase_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
};

/// Largest eigenvalue of B*B by Lanczos with full reorthogonalization.
inline double lanczos_top(const SubmatrixOperator& op, std::size_t n, double tol, int max_steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd q(static_cast<Eigen::Index>(n));
  for (auto& x : q) x = cplx(g(rng), g(rng));
  q.normalize();
  const int m_max = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(max_steps), n));
  std::vector<Eigen::VectorXcd> Q{q};
  std::vector<double> alpha, beta;
  double prev = -1;
  for (int j = 0; j < m_max; ++j) {
    Eigen::VectorXcd w = op.apply(op.apply(Q[static_cast<std::size_t>(j)], -1), +1);
    alpha.push_back(Q[static_cast<std::size_t>(j)].dot(w).real());
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& qi : Q) w -= qi * qi.dot(w);
    const double b = w.norm();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(j + 1, j + 1);
    for (int i = 0; i <= j; ++i) {
      T(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i < j) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (b < 1e-14 * std::max(1.0, top) || (prev >= 0 && std::abs(top - prev) <= tol * top && j >= 4)) return top;
    prev = top;
    beta.push_back(b);
    Q.push_back(w / b);
  }
  if (m_max == static_cast<int>(n)) return prev;
  fail(ErrorKind::NoConvergence, "Lanczos did not converge in " + std::to_string(max_steps) + " steps");
}

}  // namespace detail

struct NormOptions {
  Limits limits;
  double tolerance = 1e-10;
  int max_lanczos_steps = 300;
  std::uint64_t seed = 20240607;
};

inline FupResult fup_norm(const CantorSpec& spec, int k, const NormOptions& opt = {}) {
  const auto X = cantor_indices(spec, k, opt.limits);
  FupResult r;
  r.k = k;
  r.N = ipow(static_cast<std::uint64_t>(spec.M), k);
  r.set_size = X.size();
  if (r.N > opt.limits.max_N) fail(ErrorKind::CapExceeded, "N = M^k exceeds the cap");
  if (X.size() == r.N) {
    // full alphabet: B is the unitary DFT
    r.norm = 1.0;
    r.method = "unitary";
  } else if (X.size() <= opt.limits.dense_limit) {
    const auto n = static_cast<Eigen::Index>(X.size());
    Eigen::MatrixXcd B(n, n);
    const double sc = 1.0 / std::sqrt(static_cast<double>(r.N));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto m = static_cast<std::uint64_t>((static_cast<unsigned __int128>(X[static_cast<std::size_t>(i)]) *
                                                   X[static_cast<std::size_t>(j)]) % r.N);
        const double t = -2 * pi * static_cast<double>(m) / static_cast<double>(r.N);
        B(i, j) = sc * cplx(std::cos(t), std::sin(t));
      }
    const Eigen::MatrixXcd G = B.adjoint() * B;
    r.norm = std::sqrt(std::max(0.0, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(G, Eigen::EigenvaluesOnly)
                                         .eigenvalues()
                                         .maxCoeff()));
    r.method = "dense";
  } else {
    detail::SubmatrixOperator op(X, r.N);
    r.norm = std::sqrt(std::max(0.0, detail::lanczos_top(op, X.size(), opt.tolerance, opt.max_lanczos_steps, opt.seed)));
    r.method = op.uses_fft() ? "lanczos_fft" : "lanczos_table";
  }
  r.norm = std::min(r.norm, 1.0);
  r.beta = r.N > 1 ? -std::log(r.norm) / std::log(static_cast<double>(r.N)) : 0.0;
  if (!(r.beta > 0)) r.beta = 0.0;
  return r;
}

struct FupExponent {
  double beta_estimate = 0;
  std::vector<FupResult> table;
  double last_step_change = 0;  // |β_k - β_{k-1}| at the deepest pair
  double lower_bound = 0;       // max(0, 1/2 - δ)
  bool lower_bound_holds = false;
};

inline FupExponent fup_exponent(const CantorSpec& spec, int k_min, int k_max, const NormOptions& opt = {}) {
  if (k_max - k_min + 1 < 3) fail(ErrorKind::InvalidArgument, "fup_exponent needs at least 3 depths");
  std::vector<int> ks;
  for (int k = k_min; k <= k_max; ++k) ks.push_back(k);
  FupExponent e;
  e.table = parallel_map(ks.size(), [&](std::size_t i) { return fup_norm(spec, ks[i], opt); });
  e.beta_estimate = e.table.back().beta;
  e.last_step_change = std::abs(e.table.back().beta - e.table[e.table.size() - 2].beta);
  e.lower_bound = std::max(0.0, 0.5 - spec.delta());
  e.lower_bound_holds = e.beta_estimate >= e.lower_bound - 0.01;
  return e;
}

}  // namespace reslab::fup
