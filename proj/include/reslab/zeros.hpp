/*
 * zeros.hpp: zeros of analytic functions in rectangles, and resonance analytics
 *
 * count_zeros  : argument principle on the rectangle boundary; segments are
 *                bisected until every phase increment is below π/2
 * locate_zeros : quadrisection down to boxes holding one zero (or of size tol),
 *                then Newton with a central-difference derivative
 *
 * Plane dictionary (fixed here, used by every analytic below):
 *   Selberg plane s   : frequency = Im s, depth = 1/2 - Re s
 *   wavenumber plane k: frequency = Re k, depth = -Im k
 * A counting box [E - C, E + C] - i[0, γ] in frequency/depth is the strip of
 * depth γ below the critical line, window |frequency - E| ≤ C.
 */
#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "reslab/core.hpp"

namespace reslab::zeros {

using Function = std::function<cplx(cplx)>;

struct SearchRectangle {
  cplx lo;  // lower-left corner
  cplx hi;  // upper-right corner

  double width() const { return hi.real() - lo.real(); }
  double height() const { return hi.imag() - lo.imag(); }
  cplx center() const { return (lo + hi) / 2.0; }
  double diameter() const { return std::abs(hi - lo); }
  bool contains(cplx z) const {
    return z.real() >= lo.real() && z.real() <= hi.real() && z.imag() >= lo.imag() && z.imag() <= hi.imag();
  }
  void validate() const {
    if (!(width() > 0) || !(height() > 0) || !std::isfinite(width()) || !std::isfinite(height()))
      fail(ErrorKind::InvalidArgument, "search rectangle needs positive width and height");
  }
};

struct CountOptions {
  double density = 16;              // initial boundary points per unit perimeter (>= 16)
  double boundary_floor = 1e-10;    // relative to |F| at neighbouring boundary samples
  int max_bisections = 40;          // per boundary segment
  std::size_t max_points = 2'000'000;
  std::size_t min_side_points = 16;  // power of two
};

/// Thread-safe memo of F on a quantized grid, so shared box edges are evaluated once.
class CachedFunction {
 public:
  CachedFunction(Function f, double quantum) : f_(std::move(f)), q_(quantum) {}

  cplx operator()(cplx z) const {
    const auto key = std::make_pair(std::llround(z.real() / q_), std::llround(z.imag() / q_));
    {
      std::lock_guard<std::mutex> lock(m_);
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    const cplx v = f_(z);
    std::lock_guard<std::mutex> lock(m_);
    memo_.emplace(key, v);
    return v;
  }

  const Function& raw() const { return f_; }

 private:
  Function f_;
  double q_;
  mutable std::mutex m_;
  mutable std::map<std::pair<long long, long long>, cplx> memo_;
};

namespace detail {

struct Winding {
  int count = 0;
  double min_abs = 0;
  double max_abs = 0;
};

/// Phase change of F along the straight segment a -> b, with adaptive bisection.
/// `left` and `right` are |F| at the samples just outside a and b; when both
/// endpoints sit below them the segment holds a valley of |F|, which may hide a
/// zero whose full 2π phase turn aliases between the two samples.
template <class F>
double segment_phase(const F& f, cplx a, cplx fa, cplx b, cplx fb, double left, double right, int depth,
                     const CountOptions& opt, double& min_abs, double& max_abs, std::size_t& points) {
  const double step = std::arg(fb / fa);
  const double ra = std::abs(fa), rb = std::abs(fb);
  const bool valley = ra <= left && rb <= right;
  // a large modulus ratio means a zero close to the segment, where the phase can alias by 2π
  const bool smooth = std::abs(step) < pi / 4 && std::abs(std::log(rb / ra)) < 1.0;
  if (smooth && !valley) return step;
  if (depth >= opt.max_bisections)
    fail(ErrorKind::BoundaryZero, "unresolved phase jump (zero on the boundary) near " + fmt17(a.real()) + "+" +
                                      fmt17(a.imag()) + "i");
  if (points >= opt.max_points) fail(ErrorKind::NonConvergedSampling, "boundary refinement cap hit");
  const cplx m = (a + b) / 2.0;
  const cplx fm = f(m);
  ++points;
  const double rm = std::abs(fm);
  min_abs = std::min(min_abs, rm);
  max_abs = std::max(max_abs, rm);
  if (fm == 0.0) fail(ErrorKind::BoundaryZero, "F vanishes on the boundary");
  if (smooth && rm >= 0.7 * std::min(ra, rb)) {
    const double s1 = std::arg(fm / fa), s2 = std::arg(fb / fm);
    if (std::abs(s1) < pi / 4 && std::abs(s2) < pi / 4) return s1 + s2;  // shallow valley, resolved
  }
  return segment_phase(f, a, fa, m, fm, left, rb, depth + 1, opt, min_abs, max_abs, points) +
         segment_phase(f, m, fm, b, fb, ra, right, depth + 1, opt, min_abs, max_abs, points);
}

inline std::size_t side_points(double len, double density, std::size_t min_points = 16) {
  // power of two, so halved boxes reuse their parent's boundary samples
  const double want = std::max(static_cast<double>(min_points), std::ceil(len * density));
  std::size_t n = min_points;
  while (static_cast<double>(n) < want) n *= 2;
  return n;
}

template <class F>
Winding winding(const F& f, const SearchRectangle& r, const CountOptions& opt, double density_length) {
  const cplx c[4] = {r.lo, cplx(r.hi.real(), r.lo.imag()), r.hi, cplx(r.lo.real(), r.hi.imag())};
  std::vector<cplx> pts;
  for (int s = 0; s < 4; ++s) {
    const cplx a = c[s], b = c[(s + 1) % 4];
    const std::size_t n = side_points(std::abs(b - a) / density_length, opt.density, opt.min_side_points);
    for (std::size_t j = 0; j < n; ++j) pts.push_back(a + (b - a) * (static_cast<double>(j) / static_cast<double>(n)));
  }
  std::vector<cplx> vals(pts.size());
  Winding w;
  w.min_abs = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    vals[i] = f(pts[i]);
    w.min_abs = std::min(w.min_abs, std::abs(vals[i]));
    w.max_abs = std::max(w.max_abs, std::abs(vals[i]));
  }
  if (!(w.min_abs > 0) || !std::isfinite(w.max_abs)) fail(ErrorKind::BoundaryZero, "F vanishes or is not finite on the boundary");
  std::size_t points = pts.size();
  const std::size_t n = pts.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    double seg_min = std::min(std::abs(vals[i]), std::abs(vals[j])), seg_max = 0;
    total += segment_phase(f, pts[i], vals[i], pts[j], vals[j], std::abs(vals[(i + n - 1) % n]),
                           std::abs(vals[(j + 1) % n]), 0, opt, seg_min, seg_max, points);
    // compare against the neighbouring coarse samples, not the global maximum:
    // F may grow exponentially along the contour
    const double local = std::max({std::abs(vals[(i + n - 1) % n]), std::abs(vals[i]), std::abs(vals[j]),
                                   std::abs(vals[(j + 1) % n])});
    if (seg_min < opt.boundary_floor * local)
      fail(ErrorKind::BoundaryZero, "|F| dips to " + fmt17(seg_min / local) + " of its local size near " +
                                        fmt17(pts[i].real()) + "+" + fmt17(pts[i].imag()) + "i");
    w.min_abs = std::min(w.min_abs, seg_min);
    w.max_abs = std::max(w.max_abs, seg_max);
  }
  const double turns = total / (2 * pi);
  w.count = static_cast<int>(std::lround(turns));
  if (std::abs(turns - w.count) > 0.25) fail(ErrorKind::NonConvergedSampling, "winding number not near an integer");
  return w;
}

}  // namespace detail

/// Number of zeros (with multiplicity) of F inside rect. The density is per unit
/// of perimeter measured in `unit` (default 1).
inline int count_zeros(const Function& F, const SearchRectangle& rect, const CountOptions& opt = {}) {
  rect.validate();
  if (opt.density < 16) fail(ErrorKind::InvalidArgument, "boundary density must be >= 16 points per unit perimeter");
  return detail::winding(F, rect, opt, 1.0).count;
}

struct Zero {
  cplx location;
  int multiplicity = 1;
  double residual = 0;
};

struct ResonanceSet {
  std::vector<Zero> zeros;
  std::string source;
  std::string truncation;
  int total_count = 0;
  double scale = 0;  // max |F| on the search boundary
};

struct LocateOptions {
  CountOptions count;
  int max_depth = 80;
  int newton_iterations = 100;
};

namespace detail {

struct Box {
  SearchRectangle r;
  int count;
  int depth;
};

inline cplx derivative(const Function& F, cplx z, double h) { return (F(z + h) - F(z - h)) / (2 * h); }

/// Newton from z with step m·F/F'. Converges when the step reaches the
/// rounding floor or stagnates below `stall` (noisy F); returns the iterate of
/// least |F| in that case, nothing on divergence.
inline std::optional<cplx> newton(const Function& F, cplx z, int m, double h, int iters, double stall) {
  cplx best = z;
  double best_abs = std::abs(F(z));
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < iters; ++i) {
    const cplx f = F(z);
    if (f == 0.0) return z;
    const cplx d = derivative(F, z, h);
    if (d == 0.0 || !std::isfinite(std::abs(d))) return std::nullopt;
    const cplx dz = static_cast<double>(m) * f / d;
    const double step = std::abs(dz);
    if (step <= 1e-15 * std::max(1.0, std::abs(z))) return z;
    if (step < stall && step >= 0.9 * prev) return best;
    z -= dz;
    if (!std::isfinite(std::abs(z))) return std::nullopt;
    const double a = std::abs(F(z));
    if (a < best_abs) {
      best_abs = a;
      best = z;
    }
    prev = step;
  }
  if (prev < stall) return best;
  return std::nullopt;
}

}  // namespace detail

/// Sub-boxes of r split at fractions (fx, fy).
inline std::array<SearchRectangle, 4> split(const SearchRectangle& r, double fx, double fy) {
  const double x = r.lo.real() + fx * r.width(), y = r.lo.imag() + fy * r.height();
  return {SearchRectangle{r.lo, cplx(x, y)}, SearchRectangle{cplx(x, r.lo.imag()), cplx(r.hi.real(), y)},
          SearchRectangle{cplx(r.lo.real(), y), cplx(x, r.hi.imag())}, SearchRectangle{cplx(x, y), r.hi}};
}

/// Zeros closer than this are reported as one cluster: multiple zeros are only
/// resolvable to about sqrt(machine epsilon) relative.
inline double cluster_radius(cplx z, double tol) { return std::max(10 * tol, 1e-6 * std::max(1.0, std::abs(z))); }

/// Halves of an elongated box (aspect above 2), quarters otherwise, cut at fraction f.
inline std::vector<SearchRectangle> partition(const SearchRectangle& r, double f) {
  if (r.width() > 2 * r.height()) {
    const double x = r.lo.real() + f * r.width();
    return {SearchRectangle{r.lo, cplx(x, r.hi.imag())}, SearchRectangle{cplx(x, r.lo.imag()), r.hi}};
  }
  if (r.height() > 2 * r.width()) {
    const double y = r.lo.imag() + f * r.height();
    return {SearchRectangle{r.lo, cplx(r.hi.real(), y)}, SearchRectangle{cplx(r.lo.real(), y), r.hi}};
  }
  const auto q = split(r, f, 1.0 - f);
  return {q.begin(), q.end()};
}

inline ResonanceSet locate_zeros(const Function& F, const SearchRectangle& rect, double tol,
                                 const LocateOptions& opt = {}) {
  rect.validate();
  if (!(tol > 0)) fail(ErrorKind::InvalidArgument, "tolerance must be positive");
  const double quantum = rect.diameter() * 1e-13;
  auto cache = std::make_shared<CachedFunction>(F, quantum);
  const Function cf = [cache](cplx z) { return (*cache)(z); };

  ResonanceSet out;
  const auto top = detail::winding(cf, rect, opt.count, 1.0);
  out.total_count = top.count;
  out.scale = top.max_abs;
  if (top.count < 0) fail(ErrorKind::NonConvergedSampling, "negative winding: F has poles in the rectangle");
  std::vector<detail::Box> level;
  if (top.count > 0) level.push_back({rect, top.count, 0});
  static constexpr double offsets[] = {0.5, 0.4871, 0.5237, 0.4613, 0.5419};
  while (!level.empty()) {
    auto results = parallel_map(level.size(), [&](std::size_t bi) {
      const detail::Box& b = level[bi];
      std::vector<Zero> found;
      std::vector<detail::Box> children;
      const bool small = std::max(b.r.width(), b.r.height()) <= tol;
      if (b.count == 1 || small) {
        auto z = detail::newton(F, b.r.center(), small ? b.count : 1, tol, opt.newton_iterations, 1e-9 * b.r.diameter());
        const SearchRectangle grown{b.r.lo - cplx(tol, tol), b.r.hi + cplx(tol, tol)};
        if (z && grown.contains(*z)) {
          found.push_back({*z, b.count, std::abs(F(*z))});
          return std::make_pair(found, children);
        }
        if (small) {
          // cluster at resolution tol: report the box center
          found.push_back({b.r.center(), b.count, std::abs(F(b.r.center()))});
          return std::make_pair(found, children);
        }
      }
      if (b.count >= 2 && !small) {
        // likely a multiple zero: accept it once a tiny square around the Newton limit carries the whole count
        auto z = detail::newton(F, b.r.center(), b.count, tol, opt.newton_iterations, 1e-9 * b.r.diameter());
        if (z && b.r.contains(*z)) {
          const double rho = cluster_radius(*z, tol);
          try {
            if (detail::winding(cf, SearchRectangle{*z - cplx(rho, rho), *z + cplx(rho, rho)}, opt.count, 1.0).count ==
                b.count) {
              found.push_back({*z, b.count, std::abs(F(*z))});
              return std::make_pair(found, children);
            }
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::BoundaryZero) throw;
          }
        }
      }
      if (b.depth >= opt.max_depth) fail(ErrorKind::MaxDepth, "quadrisection depth cap reached");
      std::string last = "child counts do not add up";
      int parent = b.count;
      // a mismatch may come from the parent or a child count: resample both more densely
      for (double mult : {1.0, 4.0, 16.0}) {
        CountOptions co = opt.count;
        co.density *= mult;
        if (mult > 1) {
          try {
            parent = detail::winding(cf, b.r, co, 1.0).count;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::BoundaryZero) throw;
          }
          if (parent <= 0) return std::make_pair(found, children);
        }
        for (double off : offsets) {
          try {
            std::vector<detail::Box> kids;
            int sum = 0;
            for (const auto& p : partition(b.r, off)) {
              const int c = detail::winding(cf, p, co, 1.0).count;
              sum += c;
              if (c > 0) kids.push_back({p, c, b.depth + 1});
            }
            if (sum != parent) {  // inconsistent sampling, try another cut
              last = "child counts sum to " + std::to_string(sum) + ", parent has " + std::to_string(parent);
              continue;
            }
            children = std::move(kids);
            return std::make_pair(found, children);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::BoundaryZero) throw;
            last = e.what();
          }
        }
      }
      if (b.r.diameter() <= 100 * tol) {
        // a multiple zero is only resolved down to the noise floor of F
        auto z = detail::newton(F, b.r.center(), parent, tol, opt.newton_iterations, 1e-9 * b.r.diameter());
        const SearchRectangle grown{b.r.lo - cplx(tol, tol), b.r.hi + cplx(tol, tol)};
        const cplx loc = z && grown.contains(*z) ? *z : b.r.center();
        found.push_back({loc, parent, std::abs(F(loc))});
        return std::make_pair(found, children);
      }
      fail(ErrorKind::NonConvergedSampling, "could not split the box [" + fmt17(b.r.lo.real()) + ", " +
                                                fmt17(b.r.hi.real()) + "] x [" + fmt17(b.r.lo.imag()) + ", " +
                                                fmt17(b.r.hi.imag()) + "]i (" + last + ")");
    });
    std::vector<detail::Box> next;
    for (auto& [f, c] : results) {
      for (auto& z : f) out.zeros.push_back(z);
      for (auto& b : c) next.push_back(b);
    }
    level = std::move(next);
  }
  // zeros closer than tol are unresolved: one cluster at the mean, multiplicities summed
  std::vector<Zero> merged;
  std::vector<bool> used(out.zeros.size(), false);
  for (std::size_t i = 0; i < out.zeros.size(); ++i) {
    if (used[i]) continue;
    Zero c = out.zeros[i];
    cplx sum = c.location * static_cast<double>(c.multiplicity);
    for (std::size_t j = i + 1; j < out.zeros.size(); ++j) {
      if (used[j] || std::abs(out.zeros[j].location - out.zeros[i].location) > tol) continue;
      used[j] = true;
      c.multiplicity += out.zeros[j].multiplicity;
      sum += out.zeros[j].location * static_cast<double>(out.zeros[j].multiplicity);
    }
    if (c.multiplicity != out.zeros[i].multiplicity) {
      c.location = sum / static_cast<double>(c.multiplicity);
      c.residual = std::abs(F(c.location));
    }
    merged.push_back(c);
  }
  out.zeros = std::move(merged);
  std::sort(out.zeros.begin(), out.zeros.end(), [](const Zero& a, const Zero& b) {
    if (a.location.imag() != b.location.imag()) return a.location.imag() < b.location.imag();
    return a.location.real() < b.location.real();
  });
  return out;
}

// ── plane dictionary and analytics ───────────────────────────────────────────

enum class Plane { selberg, wavenumber };

struct PlaneCoords {
  double frequency;
  double depth;
};

inline PlaneCoords to_plane(cplx z, Plane p) {
  if (p == Plane::selberg) return {z.imag(), 0.5 - z.real()};
  return {z.real(), -z.imag()};
}

/// Depth of the pressure line: Re s = 1/2 + P(1/2) for surfaces, Im k = P(1/2) for billiards.
inline double pressure_line_depth(double pressure_half) { return -pressure_half; }

struct WeylFit {
  double exponent = 0;
  double prefactor = 0;
  double strip_depth = 0;
  double window_width = 0;
  std::vector<double> window_centers;
  std::vector<int> counts;
  double residual = 0;
  std::size_t point_count = 0;
};

inline std::vector<int> window_counts(const ResonanceSet& res, Plane plane, double strip_depth, double window_width,
                                      const std::vector<double>& centers) {
  std::vector<int> counts;
  for (double T : centers) {
    int n = 0;
    for (const auto& z : res.zeros) {
      const auto c = to_plane(z.location, plane);
      if (std::abs(c.frequency - T) <= window_width && c.depth <= strip_depth) n += z.multiplicity;
    }
    counts.push_back(n);
  }
  return counts;
}

inline WeylFit weyl_fit(const ResonanceSet& res, Plane plane, double strip_depth, double window_width,
                        const std::vector<double>& centers) {
  if (centers.size() < 4) fail(ErrorKind::InsufficientWindows, "weyl_fit needs at least 4 windows");
  WeylFit f;
  f.strip_depth = strip_depth;
  f.window_width = window_width;
  f.window_centers = centers;
  f.counts = window_counts(res, plane, strip_depth, window_width, centers);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (f.counts[i] == 0) fail(ErrorKind::EmptyWindow, "no zeros in the window centered at " + fmt17(centers[i]));
    if (!(centers[i] > 0)) fail(ErrorKind::InvalidArgument, "window centers must be positive");
    x.push_back(std::log(centers[i]));
    y.push_back(std::log(static_cast<double>(f.counts[i])));
    f.point_count += static_cast<std::size_t>(f.counts[i]);
  }
  const auto fit = least_squares(x, y);
  f.exponent = fit.slope;
  f.prefactor = std::exp(fit.intercept);
  f.residual = fit.residual_rms;
  return f;
}

struct StripCount {
  double depth_lo;
  double depth_hi;
  int count;
};

struct GapReport {
  Plane plane = Plane::selberg;
  cplx extremal;             // zero of least depth
  double max_coordinate = 0;  // max Re s or max Im k
  double delta = 0;
  double pressure_half = 0;
  double margin = 0;           // surfaces: δ - max Re s; billiards: max depth of the extremal zero vs the pressure line
  double observed_gap = 0;     // least depth below the critical line
  double essential_gap = 0;    // least depth among zeros in the upper half of the frequency range
  double conjecture_line = 0;  // depth (1 - δ)/2, probe only
  bool essential_gap_beyond_conjecture = false;
  std::vector<StripCount> strips;
};

inline GapReport gap_report(const ResonanceSet& res, Plane plane, double delta, double pressure_half,
                            double strip_width = 0.1, int n_strips = 10) {
  if (res.zeros.empty()) fail(ErrorKind::InvalidArgument, "gap_report needs a nonempty resonance set");
  GapReport g;
  g.plane = plane;
  g.delta = delta;
  g.pressure_half = pressure_half;
  double least = std::numeric_limits<double>::infinity(), fmax = -least, fmin = least;
  for (const auto& z : res.zeros) {
    const auto c = to_plane(z.location, plane);
    if (c.depth < least) {
      least = c.depth;
      g.extremal = z.location;
    }
    fmax = std::max(fmax, std::abs(c.frequency));
    fmin = std::min(fmin, std::abs(c.frequency));
  }
  g.observed_gap = least;
  g.max_coordinate = plane == Plane::selberg ? g.extremal.real() : g.extremal.imag();
  g.margin = plane == Plane::selberg ? delta - g.max_coordinate : pressure_half - g.max_coordinate;
  const double fcut = (fmin + fmax) / 2;
  g.essential_gap = std::numeric_limits<double>::infinity();
  for (const auto& z : res.zeros) {
    const auto c = to_plane(z.location, plane);
    if (std::abs(c.frequency) >= fcut) g.essential_gap = std::min(g.essential_gap, c.depth);
  }
  g.conjecture_line = (1 - delta) / 2;
  g.essential_gap_beyond_conjecture = g.essential_gap >= g.conjecture_line;
  const double base = pressure_line_depth(pressure_half);
  for (int i = 0; i < n_strips; ++i) {
    StripCount s{base + i * strip_width, base + (i + 1) * strip_width, 0};
    for (const auto& z : res.zeros) {
      const double d = to_plane(z.location, plane).depth;
      if (d >= s.depth_lo - 1e-12 && d < s.depth_hi - 1e-12) s.count += z.multiplicity;
    }
    g.strips.push_back(s);
  }
  return g;
}

}  // namespace reslab::zeros
