/*
 * billiard.hpp: open N-disk billiards in the plane
 *
 * Symbolic dynamics: a periodic orbit is a cyclic word over disk labels with no
 * letter repeated consecutively. Under the no-eclipse condition every such word
 * has exactly one periodic orbit, the minimum of the total chord length over
 * the bounce positions.
 *
 * Linear stability uses 2x2 transverse blocks
 *     free flight of length l : [[1, l], [0, 1]]
 *     reflection, radius a, incidence phi : [[-1, 0], [-2/(a cos phi), -1]]
 *
 * Dynamical zeta (unit speed, wavenumber k):
 *     zeta(k) = Π_γ Π_{m=0..m_max} (1 - σ_γ e^{i k T_γ} / (|Λ_γ|^{1/2} Λ_γ^m)),
 * σ_γ = (-1)^{n_γ} for Dirichlet obstacles, expanded in powers of the bounce
 * count and truncated at the maximal word length.
 */
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "reslab/core.hpp"
#include "reslab/words.hpp"

namespace reslab::billiard {

using Vec2 = Eigen::Vector2d;
using Mat2d = Eigen::Matrix2d;

class DiskSystem {
 public:
  std::size_t size() const { return centers_.size(); }
  const std::vector<Vec2>& centers() const { return centers_; }
  const std::vector<double>& radii() const { return radii_; }
  const Vec2& center(Letter i) const { return centers_[static_cast<std::size_t>(i)]; }
  double radius(Letter i) const { return radii_[static_cast<std::size_t>(i)]; }
  /// gap(i, j): boundary-to-boundary distance
  double gap(Letter i, Letter j) const { return gaps_[static_cast<std::size_t>(i) * size() + static_cast<std::size_t>(j)]; }
  NoRepeatRule rule() const { return {static_cast<int>(size())}; }

  friend DiskSystem build_disk_system(const std::vector<Vec2>&, const std::vector<double>&);

 private:
  std::vector<Vec2> centers_;
  std::vector<double> radii_;
  std::vector<double> gaps_;
};

/// Signed distance from p to the convex hull of two disks (negative inside).
/// |p - c(t)| - r(t) is convex along the segment, so golden-section search is exact up to tolerance.
inline double hull_distance(const Vec2& p, const Vec2& c0, double r0, const Vec2& c1, double r1) {
  auto f = [&](double t) { return (p - (c0 + t * (c1 - c0))).norm() - (r0 + t * (r1 - r0)); };
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = 0, b = 1, x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1; x1 = b - g * (b - a); f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2; x2 = a + g * (b - a); f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f1, f2});
}

inline DiskSystem build_disk_system(const std::vector<Vec2>& centers, const std::vector<double>& radii) {
  const std::size_t n = centers.size();
  if (n < 2) fail(ErrorKind::InvalidArgument, "a disk system needs at least 2 disks");
  if (radii.size() != n) fail(ErrorKind::InvalidArgument, "centers and radii differ in length");
  if (n > 26) fail(ErrorKind::InvalidArgument, "at most 26 disks (labels A..Z)");
  for (double r : radii)
    if (!(r > 0) || !std::isfinite(r)) fail(ErrorKind::InvalidArgument, "radii must be positive");
  DiskSystem s;
  s.centers_ = centers;
  s.radii_ = radii;
  s.gaps_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double gap = (centers[i] - centers[j]).norm() - radii[i] - radii[j];
      if (!(gap > 0))
        fail(ErrorKind::DiskOverlap, "disks " + std::to_string(i) + " and " + std::to_string(j) + " touch or overlap");
      s.gaps_[i * n + j] = gap;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        if (!(hull_distance(centers[k], centers[i], radii[i], centers[j], radii[j]) > radii[k]))
          fail(ErrorKind::EclipseViolation,
               "disk " + std::string(1, static_cast<char>('A' + k)) + " meets the convex hull of " +
                   std::string(1, static_cast<char>('A' + i)) + std::string(1, static_cast<char>('A' + j)));
      }
  return s;
}

/// Unit disks of radius a at the vertices of an equilateral triangle of side R.
inline DiskSystem equilateral_three_disk(double R, double a = 1.0) {
  const double h = R / std::sqrt(3.0);  // circumradius
  std::vector<Vec2> c;
  for (int i = 0; i < 3; ++i) {
    const double t = pi / 2 + 2 * pi * i / 3;
    c.emplace_back(h * std::cos(t), h * std::sin(t));
  }
  return build_disk_system(c, {a, a, a});
}

inline DiskSystem two_disk(double R, double a = 1.0) {
  return build_disk_system({Vec2(-R / 2, 0), Vec2(R / 2, 0)}, {a, a});
}

struct BounceOrbit {
  Word word;
  std::vector<double> bounce_angles;  // position angle on each disk
  std::vector<Vec2> points;
  std::vector<double> segments;       // segment i joins bounce i to bounce i+1
  double length = 0;                  // period T
  Mat2d monodromy;
  double lambda = 0;                  // signed leading eigenvalue of the monodromy
  double jacobian = 0;                // |lambda|
  double gradient_norm = 0;
  int n_bounces() const { return static_cast<int>(word.size()); }
  double log_lambda() const { return std::log(jacobian); }
};

namespace detail {

struct Geometry {
  std::vector<Vec2> p, t, nrm;  // points, unit tangents d/dθ, outward normals
  std::vector<Vec2> e;          // unit segment directions
  std::vector<double> L;
  double total = 0;
};

inline Geometry geometry(const DiskSystem& sys, const Word& w, const Eigen::VectorXd& th) {
  const std::size_t n = w.size();
  Geometry g;
  g.p.resize(n); g.t.resize(n); g.nrm.resize(n); g.e.resize(n); g.L.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 nv(std::cos(th[static_cast<Eigen::Index>(i)]), std::sin(th[static_cast<Eigen::Index>(i)]));
    g.nrm[i] = nv;
    g.t[i] = Vec2(-nv.y(), nv.x());
    g.p[i] = sys.center(w[i]) + sys.radius(w[i]) * nv;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d = g.p[(i + 1) % n] - g.p[i];
    g.L[i] = d.norm();
    g.e[i] = d / g.L[i];
    g.total += g.L[i];
  }
  return g;
}

inline Eigen::VectorXd gradient(const DiskSystem& sys, const Word& w, const Geometry& g) {
  const std::size_t n = w.size();
  Eigen::VectorXd grad(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& ein = g.e[(i + n - 1) % n];
    grad[static_cast<Eigen::Index>(i)] = sys.radius(w[i]) * g.t[i].dot(ein - g.e[i]);
  }
  return grad;
}

inline Eigen::MatrixXd hessian(const DiskSystem& sys, const Word& w, const Geometry& g) {
  const std::size_t n = w.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const Mat2d P = (Mat2d::Identity() - g.e[i] * g.e[i].transpose()) / g.L[i];
    const Vec2 u = sys.radius(w[i]) * g.t[i], v = sys.radius(w[j]) * g.t[j];
    const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
    H(I, I) += u.dot(P * u);
    H(J, J) += v.dot(P * v);
    H(I, J) -= u.dot(P * v);
    H(J, I) -= u.dot(P * v);
    // curvature of the boundary parametrization
    const Vec2& ein = g.e[(i + n - 1) % n];
    H(I, I) -= sys.radius(w[i]) * g.nrm[i].dot(ein - g.e[i]);
  }
  return H;
}

}  // namespace detail

struct OrbitOptions {
  double gradient_tolerance = 1e-12;
  int max_iterations = 200;
};

inline void check_word(const DiskSystem& sys, const Word& w) {
  if (w.size() < 2) fail(ErrorKind::NonAdmissibleWord, "orbit words need at least 2 letters");
  for (Letter a : w)
    if (a < 0 || a >= static_cast<int>(sys.size()))
      fail(ErrorKind::NonAdmissibleWord, "letter outside the disk alphabet in " + disk_word_string(w));
  if (!is_cyclically_admissible(w, sys.rule()))
    fail(ErrorKind::NonAdmissibleWord, "repeated consecutive disk in " + disk_word_string(w));
}

inline BounceOrbit find_orbit(const DiskSystem& sys, const Word& w, const OrbitOptions& opt = {}) {
  check_word(sys, w);
  const std::size_t n = w.size();
  // start at the bisector of the directions towards the neighbouring disks
  Eigen::VectorXd th(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 c = sys.center(w[i]);
    const Vec2 d = (sys.center(w[(i + n - 1) % n]) - c).normalized() + (sys.center(w[(i + 1) % n]) - c).normalized();
    th[static_cast<Eigen::Index>(i)] = std::atan2(d.y(), d.x());
  }
  auto g = detail::geometry(sys, w, th);
  Eigen::VectorXd grad = detail::gradient(sys, w, g);
  int it = 0;
  for (; it < opt.max_iterations && grad.norm() > opt.gradient_tolerance; ++it) {
    const Eigen::MatrixXd H = detail::hessian(sys, w, g);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step;
    const bool convex = ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0).all();
    step = convex ? Eigen::VectorXd(-ldlt.solve(grad)) : Eigen::VectorXd(-grad);
    if (convex && grad.norm() < 1e-6) {
      // quadratic regime: length changes are below rounding, take the full step
      th += step;
      g = detail::geometry(sys, w, th);
      grad = detail::gradient(sys, w, g);
      continue;
    }
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, alpha /= 2) {
      const Eigen::VectorXd trial = th + alpha * step;
      auto gt = detail::geometry(sys, w, trial);
      if (gt.total <= g.total + 1e-4 * alpha * grad.dot(step) || gt.total <= g.total) {
        th = trial;
        g = std::move(gt);
        moved = true;
        break;
      }
    }
    grad = detail::gradient(sys, w, g);
    if (!moved) break;
  }
  if (!(grad.norm() <= 1e-10))
    fail(ErrorKind::NoConvergence, "orbit " + disk_word_string(w) + ": gradient residual " + fmt17(grad.norm()));

  BounceOrbit o;
  o.word = w;
  o.bounce_angles.assign(th.data(), th.data() + th.size());
  o.points = g.p;
  o.segments = g.L;
  o.length = g.total;
  o.gradient_norm = grad.norm();
  // monodromy from just after bounce 0 around the cycle back to just after bounce 0
  Mat2d M = Mat2d::Identity();
  for (std::size_t k = 1; k <= n; ++k) {
    const std::size_t i = k % n;
    Mat2d F;
    F << 1, g.L[k - 1], 0, 1;
    const double cphi = std::abs(g.e[k - 1].dot(g.nrm[i]));
    Mat2d R;
    R << -1, 0, -2 / (sys.radius(w[i]) * cphi), -1;
    M = R * F * M;
  }
  o.monodromy = M;
  const double tr = M.trace(), det = M.determinant();
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
  o.lambda = tr / 2 + (tr >= 0 ? disc : -disc);
  o.jacobian = std::abs(o.lambda);
  return o;
}

/// One orbit per admissible primitive necklace of length 2..max_word_length,
/// sorted by (length, word).
inline std::vector<BounceOrbit> enumerate_orbits(const DiskSystem& sys, int max_word_length,
                                                 std::size_t cap = 5'000'000, const OrbitOptions& opt = {}) {
  if (max_word_length < 2) fail(ErrorKind::InvalidArgument, "max_word_length must be >= 2");
  const auto words = enumerate_necklaces(sys.rule(), max_word_length, cap);
  auto orbits = parallel_map(words.size(), [&](std::size_t i) { return find_orbit(sys, words[i], opt); });
  std::sort(orbits.begin(), orbits.end(), [](const BounceOrbit& a, const BounceOrbit& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.word < b.word;
  });
  return orbits;
}

/// Cycle-expanded dynamical zeta over a fixed orbit table.
class DynamicalZeta {
 public:
  DynamicalZeta(const std::vector<BounceOrbit>& orbits, int max_word_length, bool dirichlet = true)
      : max_len_(max_word_length), dirichlet_(dirichlet) {
    for (const auto& o : orbits)
      if (o.n_bounces() <= max_word_length) entries_.push_back({o.n_bounces(), o.length, o.lambda});
  }

  int order() const { return max_len_; }

  /// Value and the magnitude of the last retained order.
  std::pair<cplx, double> evaluate_with_error(cplx k, int m_max) const {
    if (m_max < 0) fail(ErrorKind::InvalidArgument, "m_max must be >= 0");
    const std::size_t N = static_cast<std::size_t>(max_len_);
    std::vector<cplx> log_coeff(N + 1, cplx{0.0});
    for (const auto& e : entries_) {
      const double sign = (dirichlet_ && (e.n % 2)) ? -1.0 : 1.0;
      const cplx t = sign * std::exp(cplx(0, 1) * k * e.T) / std::sqrt(std::abs(e.lambda));
      cplx power = 1.0;
      for (std::size_t r = 1; r * static_cast<std::size_t>(e.n) <= N; ++r) {
        power *= t;
        const double q = std::pow(e.lambda, -static_cast<double>(r));  // Λ^{-r}, signed
        const double msum = (1 - std::pow(q, m_max + 1)) / (1 - q);
        log_coeff[r * static_cast<std::size_t>(e.n)] -= power * msum / static_cast<double>(r);
      }
    }
    const auto c = series_exp(log_coeff);
    cplx v = 0.0;
    for (const auto& x : c) v += x;
    return {v, std::abs(c[N])};
  }

  cplx evaluate(cplx k, int m_max) const { return evaluate_with_error(k, m_max).first; }

 private:
  struct Entry {
    int n;
    double T;
    double lambda;
  };
  int max_len_;
  bool dirichlet_;
  std::vector<Entry> entries_;
};

inline cplx dynamical_zeta(const DiskSystem& sys, cplx k, int max_word_length, int m_max, bool dirichlet = true) {
  return DynamicalZeta(enumerate_orbits(sys, max_word_length), max_word_length, dirichlet).evaluate(k, m_max);
}

}  // namespace reslab::billiard
