/*
 * schottky.hpp: Schottky groups of hyperbolic Möbius maps
 *
 * A rank-r group is given by r matrices in SL(2,R) acting on the upper
 * half-plane. Letter i < r is generator i; letter i + r is its inverse.
 * Disk D_i is the isometric circle |c z + d| = 1 of letter i (center -d/c,
 * radius 1/|c|), so letter i maps the exterior of D_i onto the interior of
 * D_{i+r mod 2r}. Disjointness of the 2r disks is the Schottky condition.
 *
 * Closed geodesics are primitive conjugacy classes of the free group, i.e.
 * primitive reduced necklaces. A class and its inverse are distinct.
 * Hyperbolic length: ell = 2 acosh(|trace| / 2).
 */
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "reslab/core.hpp"
#include "reslab/words.hpp"

namespace reslab::schottky {

struct Mat2 {
  double a = 1, b = 0, c = 0, d = 1;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Mat2 inverse() const { return {d, -b, -c, a}; }  // det = 1
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  template <class T>
  T apply(T z) const {
    return (a * z + b) / (c * z + d);
  }
  /// g'(x) = 1 / (c x + d)^2 for det 1.
  double derivative(double x) const {
    const double q = c * x + d;
    return 1.0 / (q * q);
  }
};

struct MoebiusGenerator {
  Mat2 m;
  int label = 0;  // letter index, 0-based
};

struct Disk {
  double center = 0;
  double radius = 0;
  double lo() const { return center - radius; }
  double hi() const { return center + radius; }
};

/// Isometric circle of g: |c z + d| = 1.
inline Disk isometric_circle(const Mat2& g) { return {-g.d / g.c, 1.0 / std::abs(g.c)}; }

class SchottkyGroup {
 public:
  int rank() const { return rank_; }
  int alphabet_size() const { return 2 * rank_; }
  int inverse(Letter i) const { return (i + rank_) % (2 * rank_); }
  const std::vector<MoebiusGenerator>& generators() const { return gens_; }
  const Mat2& matrix(Letter i) const { return gens_[static_cast<std::size_t>(i)].m; }
  const std::vector<Disk>& disks() const { return disks_; }
  const Disk& disk(Letter i) const { return disks_[static_cast<std::size_t>(i)]; }
  FreeGroupRule rule() const { return {rank_}; }

  /// Smallest boundary gap between any two disks.
  double min_separation() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < disks_.size(); ++i)
      for (std::size_t j = i + 1; j < disks_.size(); ++j)
        best = std::min(best, std::abs(disks_[i].center - disks_[j].center) - disks_[i].radius - disks_[j].radius);
    return best;
  }

  /// Product of the letter matrices along w, left to right.
  Mat2 word_matrix(const Word& w) const {
    long double a = 1, b = 0, c = 0, d = 1;
    for (Letter l : w) {
      const Mat2& g = matrix(l);
      const long double na = a * g.a + b * g.c, nb = a * g.b + b * g.d;
      const long double nc = c * g.a + d * g.c, nd = c * g.b + d * g.d;
      a = na, b = nb, c = nc, d = nd;
    }
    return {static_cast<double>(a), static_cast<double>(b), static_cast<double>(c), static_cast<double>(d)};
  }

  friend SchottkyGroup build_group(const std::vector<Mat2>& matrices);

 private:
  int rank_ = 0;
  std::vector<MoebiusGenerator> gens_;
  std::vector<Disk> disks_;
};

inline constexpr double det_tolerance = 1e-12;
inline constexpr double mapping_tolerance = 1e-10;

/// Validates the matrices and builds the group with isometric-circle disks.
inline SchottkyGroup build_group(const std::vector<Mat2>& matrices) {
  if (matrices.empty()) fail(ErrorKind::InvalidArgument, "a Schottky group needs at least one generator");
  SchottkyGroup g;
  g.rank_ = static_cast<int>(matrices.size());
  const int r = g.rank_;
  for (int i = 0; i < r; ++i) {
    const Mat2& m = matrices[static_cast<std::size_t>(i)];
    if (!(std::abs(m.det() - 1.0) <= det_tolerance))
      fail(ErrorKind::SingularMatrix, "generator " + std::to_string(i) + " has det " + fmt17(m.det()));
    if (!(std::abs(m.trace()) > 2.0))
      fail(ErrorKind::NonHyperbolicGenerator,
           "generator " + std::to_string(i) + " has |trace| = " + fmt17(std::abs(m.trace())) + " <= 2");
    if (m.c == 0.0) fail(ErrorKind::NoIsometricCircle, "generator " + std::to_string(i) + " has c = 0");
  }
  g.gens_.resize(2 * static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    g.gens_[static_cast<std::size_t>(i)] = {matrices[static_cast<std::size_t>(i)], i};
    g.gens_[static_cast<std::size_t>(i + r)] = {matrices[static_cast<std::size_t>(i)].inverse(), i + r};
  }
  for (const auto& gen : g.gens_) g.disks_.push_back(isometric_circle(gen.m));

  for (std::size_t i = 0; i < g.disks_.size(); ++i)
    for (std::size_t j = i + 1; j < g.disks_.size(); ++j) {
      const Disk &p = g.disks_[i], &q = g.disks_[j];
      if (!(std::abs(p.center - q.center) > p.radius + q.radius))
        fail(ErrorKind::DiskOverlap,
             "isometric circles of letters " + std::to_string(i) + " and " + std::to_string(j) + " intersect");
    }

  // Letter i carries the boundary of D_i onto the boundary of D_{i-bar}
  // and the point at infinity to the center of D_{i-bar}.
  for (int i = 0; i < 2 * r; ++i) {
    const Mat2& m = g.matrix(i);
    const Disk& src = g.disk(i);
    const Disk& dst = g.disk(g.inverse(i));
    for (int k = 0; k < 8; ++k) {
      const double t = 2.0 * pi * (k + 0.5) / 8.0;
      const cplx z = src.center + src.radius * std::polar(1.0, t);
      const cplx w = m.apply(z);
      if (std::abs(std::abs(w - dst.center) - dst.radius) > mapping_tolerance * std::max(1.0, dst.radius))
        fail(ErrorKind::DiskOverlap, "letter " + std::to_string(i) + " does not pair its disks");
    }
    const double inf_image = m.a / m.c;
    if (std::abs(inf_image - dst.center) >= dst.radius)
      fail(ErrorKind::DiskOverlap, "letter " + std::to_string(i) + " does not map the exterior inside");
  }
  return g;
}

// ── builders ─────────────────────────────────────────────────────────────────

/// Hyperbolic element with axis endpoints -1, +1 and translation length ell.
inline Mat2 symmetric_hyperbolic(double ell) {
  const double C = std::cosh(ell / 2), S = std::sinh(ell / 2);
  return {C, S, S, C};
}

/// Rank-1 group (hyperbolic cylinder) with core geodesic of length ell.
inline SchottkyGroup cylinder(double ell) { return build_group({symmetric_hyperbolic(ell)}); }

/// Pair of pants with boundary geodesic lengths l1, l2, l3. Generators a, b
/// have lengths l1, l2 and a b^{-1} has trace -2 cosh(l3 / 2).
inline std::vector<Mat2> three_funnel_matrices(double l1, double l2, double l3) {
  const double C1 = std::cosh(l1 / 2), S1 = std::sinh(l1 / 2);
  const double C2 = std::cosh(l2 / 2), S2 = std::sinh(l2 / 2);
  const double C3 = std::cosh(l3 / 2);
  const double ch = (C1 * C2 + C3) / (S1 * S2);
  if (!(ch > 1.0)) fail(ErrorKind::InvalidArgument, "three_funnel: no real placement for these lengths");
  const double t = std::acosh(ch);
  const Mat2 a = {C1, S1, S1, C1};
  const Mat2 b = {C2, S2 * std::exp(t), S2 * std::exp(-t), C2};
  return {a, b};
}

inline SchottkyGroup three_funnel(double l1, double l2, double l3) {
  return build_group(three_funnel_matrices(l1, l2, l3));
}

inline SchottkyGroup symmetric_three_funnel(double ell) { return three_funnel(ell, ell, ell); }

// ── closed geodesics ─────────────────────────────────────────────────────────

struct GeodesicClass {
  Word word;  // canonical (minimal rotation)
  double trace = 0;
  double length = 0;
  int word_length() const { return static_cast<int>(word.size()); }
};

inline double length_from_trace(double trace) { return 2.0 * std::acosh(std::abs(trace) / 2.0); }

inline GeodesicClass geodesic_of(const SchottkyGroup& g, const Word& w) {
  GeodesicClass c;
  c.word = minimal_rotation(w);
  c.trace = g.word_matrix(c.word).trace();
  c.length = length_from_trace(c.trace);
  return c;
}

inline constexpr std::size_t default_class_cap = 5'000'000;

/// One class per primitive conjugacy class with word length <= max_word_length,
/// sorted by (word length, length, word).
inline std::vector<GeodesicClass> enumerate_primitives(const SchottkyGroup& g, int max_word_length,
                                                       std::size_t cap = default_class_cap) {
  if (max_word_length < 1) fail(ErrorKind::InvalidArgument, "max_word_length must be >= 1");
  const auto words = enumerate_necklaces(g.rule(), max_word_length, cap);
  auto classes = parallel_map(words.size(), [&](std::size_t i) {
    GeodesicClass c;
    c.word = words[i];
    c.trace = g.word_matrix(c.word).trace();
    c.length = length_from_trace(c.trace);
    return c;
  });
  std::sort(classes.begin(), classes.end(), [](const GeodesicClass& x, const GeodesicClass& y) {
    if (x.word.size() != y.word.size()) return x.word.size() < y.word.size();
    if (x.length != y.length) return x.length < y.length;
    return x.word < y.word;
  });
  return classes;
}

// ── limit set ────────────────────────────────────────────────────────────────

struct BoxCount {
  std::vector<double> points;    // sorted
  std::vector<double> scales;    // scales used in the fit
  std::vector<std::size_t> counts;
  double dimension_estimate = 0;
  double residual = 0;           // rms of the log-log fit
  bool large_residual = false;   // residual above 0.1 in log units
};

inline constexpr std::size_t default_point_cap = 20'000'000;

/// Images g_{i1}...g_{i(n-1)}(center of D_{inverse(i_n)}) over all reduced words
/// i1..in of length n = depth: one point in every level-n cylinder.
inline std::vector<double> limit_set_points(const SchottkyGroup& g, int depth,
                                            std::size_t cap = default_point_cap) {
  if (depth < 1) fail(ErrorKind::InvalidArgument, "depth must be >= 1");
  const int q = g.alphabet_size();
  const double total = q * std::pow(q - 1.0, depth - 1);
  if (total > static_cast<double>(cap))
    fail(ErrorKind::CombinatorialOverflow, "limit-set point count exceeds cap of " + std::to_string(cap));
  // cur[a]: points for words whose first letter is a
  std::vector<std::vector<double>> cur(static_cast<std::size_t>(q));
  for (int a = 0; a < q; ++a) cur[static_cast<std::size_t>(a)] = {g.disk(g.inverse(a)).center};
  for (int level = 1; level < depth; ++level) {
    std::vector<std::vector<double>> next(static_cast<std::size_t>(q));
    for (int a = 0; a < q; ++a) {
      auto& out = next[static_cast<std::size_t>(a)];
      const Mat2& m = g.matrix(a);
      for (int b = 0; b < q; ++b) {
        if (b == g.inverse(a)) continue;
        for (double x : cur[static_cast<std::size_t>(b)]) out.push_back(m.apply(x));
      }
    }
    cur = std::move(next);
  }
  std::vector<double> pts;
  for (auto& v : cur) pts.insert(pts.end(), v.begin(), v.end());
  std::sort(pts.begin(), pts.end());
  return pts;
}

/// Number of occupied bins floor(x / eps) over sorted points.
inline std::size_t occupied_bins(const std::vector<double>& sorted_points, double eps) {
  std::size_t n = 0;
  double last = std::numeric_limits<double>::quiet_NaN();
  for (double x : sorted_points) {
    const double bin = std::floor(x / eps);
    if (bin != last) {
      ++n;
      last = bin;
    }
  }
  return n;
}

/// Box-counting dimension: slope of log N(eps) against log(1/eps). Scales at
/// or above the smallest disk diameter carry no information and are dropped.
inline BoxCount limit_set_boxcount(const SchottkyGroup& g, int depth, const std::vector<double>& scales) {
  if (depth < 2) fail(ErrorKind::InvalidArgument, "depth must be >= 2");
  for (std::size_t i = 1; i < scales.size(); ++i)
    if (!(scales[i] < scales[i - 1])) fail(ErrorKind::InvalidArgument, "scales must be strictly decreasing");
  double min_diameter = std::numeric_limits<double>::infinity();
  for (const auto& d : g.disks()) min_diameter = std::min(min_diameter, 2 * d.radius);

  BoxCount bc;
  for (double e : scales)
    if (e > 0 && e < min_diameter) bc.scales.push_back(e);
  if (bc.scales.size() < 3)
    fail(ErrorKind::InsufficientScales,
         std::to_string(bc.scales.size()) + " usable scales below the disk diameter; need 3");
  bc.points = limit_set_points(g, depth);
  std::vector<double> x, y;
  for (double e : bc.scales) {
    const std::size_t n = occupied_bins(bc.points, e);
    bc.counts.push_back(n);
    x.push_back(std::log(1.0 / e));
    y.push_back(std::log(static_cast<double>(n)));
  }
  const LineFit fit = least_squares(x, y);
  bc.dimension_estimate = fit.slope;
  bc.residual = fit.residual_rms;
  bc.large_residual = fit.residual_rms > 0.1;
  return bc;
}

/// Geometric scale ladder base^-lo_exp ... base^-hi_exp.
inline std::vector<double> dyadic_scales(int lo_exp, int hi_exp) {
  std::vector<double> s;
  for (int e = lo_exp; e <= hi_exp; ++e) s.push_back(std::ldexp(1.0, -e));
  return s;
}

}  // namespace reslab::schottky
