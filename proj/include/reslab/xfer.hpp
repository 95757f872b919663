/*
 * xfer.hpp: Selberg zeta function of a Schottky group, two ways
 *
 *   det route:   Z(s) = det(I - A(s)), A(s) a Chebyshev collocation matrix of
 *                the Bowen–Series transfer operator
 *                  (L_s f)_i(x) = Σ_{j ≠ ī} g_{j̄}'(x)^s f_j(g_{j̄}(x)),  x ∈ D_i,
 *                where letter j̄ maps the exterior of D_{j̄} (which contains D_i)
 *                into D_j.
 *   cycle route: Z(s) = Π_γ Π_{m≥0} (1 - e^{-(s+m) ℓ_γ}) over oriented primitive
 *                classes, expanded in powers of a word-length counting variable
 *                and truncated at a maximal word length (cycle expansion).
 *
 * Collocation intervals. Functions are sampled on the real hull of the level-k
 * cylinders inside each disk (k = hull_level, k = 1 is the full diameter).
 * These hulls map into themselves under the inverse branches and are much
 * shorter than the diameters, which keeps the oscillating weight
 * |c x + d|^{-2 i Im s} resolvable with few nodes at large |Im s|.
 */
#pragma once

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "reslab/core.hpp"
#include "reslab/schottky.hpp"

namespace reslab::xfer {

using schottky::Disk;
using schottky::GeodesicClass;
using schottky::Mat2;
using schottky::SchottkyGroup;

struct TransferOptions {
  int hull_level = 3;
  double lebesgue_cap = 1e6;  // IllConditioned above this interpolation amplification
};

/// Real hulls of the level-k cylinder intervals inside each disk.
inline std::vector<Disk> collocation_intervals(const SchottkyGroup& g, int level) {
  if (level < 1) fail(ErrorKind::InvalidArgument, "hull_level must be >= 1");
  const int q = g.alphabet_size();
  std::vector<Disk> iv = g.disks();
  for (int k = 1; k < level; ++k) {
    std::vector<Disk> next(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
      const Mat2& branch = g.matrix(g.inverse(j));  // maps D_i into D_j
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int i = 0; i < q; ++i) {
        if (i == g.inverse(j)) continue;
        const Disk& d = iv[static_cast<std::size_t>(i)];
        const double y0 = branch.apply(d.lo()), y1 = branch.apply(d.hi());
        lo = std::min({lo, y0, y1});
        hi = std::max({hi, y0, y1});
      }
      next[static_cast<std::size_t>(j)] = {(lo + hi) / 2, (hi - lo) / 2};
    }
    iv = std::move(next);
  }
  return iv;
}

/// Chebyshev points of the first kind on [-1, 1].
inline std::vector<double> chebyshev_nodes(int M) {
  std::vector<double> x(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) x[static_cast<std::size_t>(m)] = std::cos(pi * (2 * m + 1) / (2.0 * M));
  return x;
}

/// Barycentric Lagrange row: values at t of the cardinal functions on the
/// first-kind Chebyshev nodes. Reproduces constants exactly.
inline void lagrange_row(const std::vector<double>& nodes, double t, double* row) {
  const int M = static_cast<int>(nodes.size());
  double sum = 0;
  for (int m = 0; m < M; ++m) {
    const double diff = t - nodes[static_cast<std::size_t>(m)];
    if (diff == 0.0) {
      for (int k = 0; k < M; ++k) row[k] = (k == m) ? 1.0 : 0.0;
      return;
    }
    const double w = ((m % 2) ? -1.0 : 1.0) * std::sin(pi * (2 * m + 1) / (2.0 * M));
    row[m] = w / diff;
    sum += row[m];
  }
  for (int m = 0; m < M; ++m) row[m] /= sum;
}

struct TransferDiscretization {
  cplx s;
  int nodes_per_disk = 0;
  std::vector<Disk> intervals;     // collocation interval per disk
  std::vector<double> nodes;       // disk-major, M per disk
  Eigen::MatrixXcd matrix;         // (2r M) x (2r M)
  double lebesgue = 0;             // max absolute row sum of the interpolation rows
};

inline TransferDiscretization assemble_transfer(const SchottkyGroup& g, cplx s, int M,
                                                const TransferOptions& opt = {}) {
  if (M < 4) fail(ErrorKind::InvalidArgument, "nodes per disk must be >= 4");
  const int q = g.alphabet_size();
  TransferDiscretization td;
  td.s = s;
  td.nodes_per_disk = M;
  td.intervals = collocation_intervals(g, opt.hull_level);
  const auto ref = chebyshev_nodes(M);
  for (const auto& iv : td.intervals)
    for (double t : ref) td.nodes.push_back(iv.center + iv.radius * t);

  const Eigen::Index n = static_cast<Eigen::Index>(q) * M;
  td.matrix = Eigen::MatrixXcd::Zero(n, n);
  std::vector<double> row(static_cast<std::size_t>(M));
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      if (j == g.inverse(i)) continue;  // back-tracking branch
      const Mat2& branch = g.matrix(g.inverse(j));
      const Disk& dst = td.intervals[static_cast<std::size_t>(j)];
      for (int a = 0; a < M; ++a) {
        const double x = td.nodes[static_cast<std::size_t>(i * M + a)];
        const double den = branch.c * x + branch.d;
        if (!(den != 0.0) || !std::isfinite(den))
          fail(ErrorKind::BranchFailure, "inverse branch undefined at a collocation node");
        // g'(x) = den^{-2} > 0 on the real axis; principal real branch of the power
        const cplx weight = std::exp(-2.0 * s * std::log(std::abs(den)));
        const double y = branch.apply(x);
        lagrange_row(ref, (y - dst.center) / dst.radius, row.data());
        double amp = 0;
        for (int b = 0; b < M; ++b) {
          td.matrix(i * M + a, j * M + b) = weight * row[static_cast<std::size_t>(b)];
          amp += std::abs(row[static_cast<std::size_t>(b)]);
        }
        td.lebesgue = std::max(td.lebesgue, amp);
      }
    }
  }
  if (td.lebesgue > opt.lebesgue_cap)
    fail(ErrorKind::IllConditioned, "interpolation amplification " + fmt17(td.lebesgue) + " exceeds cap");
  return td;
}

enum class ZetaMethod { determinant, cycle_expansion };

inline std::string_view to_string(ZetaMethod m) {
  return m == ZetaMethod::determinant ? "determinant" : "cycle_expansion";
}

struct ZetaValue {
  cplx value;
  ZetaMethod method = ZetaMethod::determinant;
  int truncation = 0;   // M for the determinant, max word length for the cycle expansion
  int m_max = 0;        // cycle expansion only
  double error_estimate = 0;
};

/// det(I - A(s)) with the s-independent parts (interpolation rows, log|g'|) held fixed.
class FredholmDeterminant {
 public:
  FredholmDeterminant(const SchottkyGroup& g, int M, const TransferOptions& opt = {}) {
    const auto td = assemble_transfer(g, cplx(0.0, 0.0), M, opt);  // s = 0: the bare interpolation rows
    n_ = td.matrix.rows();
    rows_ = td.matrix.real();
    const int q = g.alphabet_size();
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) {
        if (j == g.inverse(i)) continue;
        const Mat2& branch = g.matrix(g.inverse(j));
        for (int a = 0; a < M; ++a) {
          const double x = td.nodes[static_cast<std::size_t>(i * M + a)];
          blocks_.push_back({i * M + a, j * M, M, std::log(std::abs(branch.c * x + branch.d))});
        }
      }
  }

  cplx operator()(cplx s) const {
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n_, n_);
    for (const auto& b : blocks_) {
      const cplx w = std::exp(-2.0 * s * b.log_den);
      for (int k = 0; k < b.len; ++k) A(b.row, b.col + k) -= w * rows_(b.row, b.col + k);
    }
    return Eigen::PartialPivLU<Eigen::MatrixXcd>(A).determinant();
  }

 private:
  struct RowBlock {
    Eigen::Index row, col;
    int len;
    double log_den;
  };
  Eigen::Index n_ = 0;
  Eigen::MatrixXd rows_;
  std::vector<RowBlock> blocks_;
};

inline cplx fredholm_det(const SchottkyGroup& g, cplx s, int M, const TransferOptions& opt = {}) {
  const auto td = assemble_transfer(g, s, M, opt);
  const Eigen::Index n = td.matrix.rows();
  Eigen::MatrixXcd I_minus_A = Eigen::MatrixXcd::Identity(n, n) - td.matrix;
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(I_minus_A).determinant();
}

/// det(I - A(s)) with an error estimate from the M - 4 (or M + 4 when M < 8) matrix.
inline ZetaValue zeta_det(const SchottkyGroup& g, cplx s, int M, const TransferOptions& opt = {}) {
  ZetaValue z;
  z.method = ZetaMethod::determinant;
  z.truncation = M;
  z.value = fredholm_det(g, s, M, opt);
  const int ref = (M >= 8) ? M - 4 : M + 4;
  z.error_estimate = std::abs(z.value - fredholm_det(g, s, ref, opt));
  return z;
}

/// ceil(|Im s| / 2 + 10)
inline int default_m_max(cplx s) { return static_cast<int>(std::ceil(std::abs(s.imag()) / 2.0 + 10.0)); }

/// Cycle expansion of the Selberg product over a fixed table of classes.
/// Reusable across many s; the table must be complete up to max_word_length.
class SelbergCycleExpansion {
 public:
  SelbergCycleExpansion(const std::vector<GeodesicClass>& classes, int max_word_length)
      : max_len_(max_word_length) {
    for (const auto& c : classes)
      if (c.word_length() <= max_word_length) entries_.push_back({c.word_length(), c.length});
  }

  int max_word_length() const { return max_len_; }

  ZetaValue evaluate(cplx s, int m_max) const {
    if (m_max < 0) fail(ErrorKind::InvalidArgument, "m_max must be >= 0");
    const std::size_t N = static_cast<std::size_t>(max_len_);
    std::vector<cplx> log_coeff(N + 1, cplx{0.0});
    for (const auto& e : entries_) {
      const cplx base = std::exp(-s * e.ell);
      cplx power = 1.0;
      for (std::size_t r = 1; r * static_cast<std::size_t>(e.n) <= N; ++r) {
        power *= base;
        // Σ_{m=0}^{m_max} e^{-r m ℓ} in closed form
        const double rl = static_cast<double>(r) * e.ell;
        const double msum = -std::expm1(-rl * (m_max + 1)) / -std::expm1(-rl);
        log_coeff[r * static_cast<std::size_t>(e.n)] -= power * msum / static_cast<double>(r);
      }
    }
    const auto c = series_exp(log_coeff);
    ZetaValue z;
    z.method = ZetaMethod::cycle_expansion;
    z.truncation = max_len_;
    z.m_max = m_max;
    z.value = 0.0;
    for (const auto& x : c) z.value += x;
    z.error_estimate = std::abs(c[N]);
    return z;
  }

 private:
  struct Entry {
    int n;
    double ell;
  };
  int max_len_;
  std::vector<Entry> entries_;
};

inline ZetaValue zeta_cycle(const SchottkyGroup& g, cplx s, int max_word_length, int m_max) {
  if (max_word_length < 1) fail(ErrorKind::InvalidArgument, "max_word_length must be >= 1");
  const auto classes = schottky::enumerate_primitives(g, max_word_length);
  return SelbergCycleExpansion(classes, max_word_length).evaluate(s, m_max);
}

struct PowerIterationOptions {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

/// Spectral radius of A(s) for real s by power iteration from the all-ones vector.
inline double leading_eigenvalue(const SchottkyGroup& g, double s, int M, const PowerIterationOptions& pit = {},
                                 const TransferOptions& opt = {}) {
  if (M < 8) fail(ErrorKind::InvalidArgument, "leading_eigenvalue needs M >= 8");
  const Eigen::MatrixXd A = assemble_transfer(g, cplx{s, 0.0}, M, opt).matrix.real();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.rows()).normalized();
  double lambda = 0;
  for (int it = 0; it < pit.max_iterations; ++it) {
    Eigen::VectorXd w = A * v;
    const double norm = w.norm();
    if (!(norm > 0)) return 0.0;
    const double next = (v.dot(w) >= 0) ? norm : -norm;
    w /= next;
    const double change = (w - v).norm();
    v = std::move(w);
    if (std::abs(next - lambda) <= pit.tolerance * std::abs(next) && change <= 1e-10) return std::abs(next);
    lambda = next;
  }
  fail(ErrorKind::NoConvergence, "power iteration did not converge at s = " + fmt17(s));
}

/// s in (0, 1) with leading eigenvalue 1.
inline double transfer_dimension(const SchottkyGroup& g, int M, double tol = 1e-13) {
  auto f = [&](double s) { return std::log(leading_eigenvalue(g, s, M)); };
  double lo = 0.0, hi = 1.0;
  double flo = f(lo), fhi = f(hi);
  if (flo <= 0) return 0.0;
  if (fhi >= 0) fail(ErrorKind::NoBracket, "leading eigenvalue at s = 1 is not below 1");
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, [tol](double a, double b) { return std::abs(b - a) <= tol; }, iters);
  return (r.first + r.second) / 2;
}

/// Largest real zero of det(I - A(s)) in (lo, hi]: downward scan for a sign change, then TOMS 748.
inline double largest_real_zero(const SchottkyGroup& g, int M, double lo = 0.0, double hi = 1.0,
                                double step = 0.02, double tol = 1e-14) {
  auto f = [&](double s) { return fredholm_det(g, cplx{s, 0.0}, M).real(); }; // real on the real axis
  double b = hi, fb = f(b);
  if (fb == 0.0) return b;
  for (double a = hi - step; a >= lo - 1e-15; a -= step) {
    const double fa = f(a);
    if (fa == 0.0) return a;
    if ((fa < 0) != (fb < 0)) {
      std::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve(
          f, a, b, fa, fb, [tol](double x, double y) { return std::abs(y - x) <= tol; }, iters);
      return (r.first + r.second) / 2;
    }
    b = a;
    fb = fa;
  }
  fail(ErrorKind::NoRootBracket, "no sign change of the determinant on the scanned interval");
}

}  // namespace reslab::xfer
