/*
 * thermo.hpp: topological pressure, entropy and Bowen dimension from periodic orbits
 *
 * An ensemble is a list of primitive orbits (T_γ, J^u(γ), n_γ) from either a
 * Schottky group (T = ℓ, J = e^ℓ) or a disk billiard (T = length, J = |Λ|).
 *
 *   window   : slope of log S(T) + log(T + 1/2) over unit windows, with
 *              S(T) = Σ_{T ≤ rT_γ < T+1} J^u(γ)^{-rβ}
 *   zeta_root: largest real s with 1/ζ(s) = Π_γ (1 - e^{-sT_γ} J^u(γ)^{-β}) = 0,
 *              cycle-expanded in the word length n_γ
 */
#pragma once

#include <boost/math/tools/toms748_solve.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reslab/billiard.hpp"
#include "reslab/core.hpp"
#include "reslab/schottky.hpp"

namespace reslab::thermo {

struct OrbitEntry {
  double T;
  double J;
  int n;  // symbolic length
};

struct OrbitEnsemble {
  std::vector<OrbitEntry> entries;  // primitives, sorted by T
  std::string source;
  int max_word_length = 0;

  double completeness_horizon() const {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& e : entries)
      if (e.n == max_word_length) h = std::min(h, e.T);
    return h;
  }
};

inline OrbitEnsemble ensemble_from(const std::vector<schottky::GeodesicClass>& classes, int max_word_length) {
  OrbitEnsemble e;
  e.source = "schottky";
  e.max_word_length = max_word_length;
  for (const auto& c : classes)
    if (c.word_length() <= max_word_length) e.entries.push_back({c.length, std::exp(c.length), c.word_length()});
  std::stable_sort(e.entries.begin(), e.entries.end(), [](auto& a, auto& b) { return a.T < b.T; });
  return e;
}

inline OrbitEnsemble ensemble_from(const std::vector<billiard::BounceOrbit>& orbits, int max_word_length) {
  OrbitEnsemble e;
  e.source = "billiard";
  e.max_word_length = max_word_length;
  for (const auto& o : orbits)
    if (o.n_bounces() <= max_word_length) e.entries.push_back({o.length, o.jacobian, o.n_bounces()});
  std::stable_sort(e.entries.begin(), e.entries.end(), [](auto& a, auto& b) { return a.T < b.T; });
  return e;
}

enum class Method { window, zeta_root };

inline std::string_view to_string(Method m) { return m == Method::window ? "window" : "zeta_root"; }

/// Cycle-expanded 1/ζ at real s, summed to order max_word_length.
inline double inverse_zeta(const OrbitEnsemble& ens, double s, double beta) {
  const std::size_t N = static_cast<std::size_t>(ens.max_word_length);
  std::vector<double> a(N + 1, 0.0);
  for (const auto& e : ens.entries) {
    const double t = std::exp(-s * e.T - beta * std::log(e.J));
    double p = 1.0;
    for (std::size_t r = 1; r * static_cast<std::size_t>(e.n) <= N; ++r) {
      p *= t;
      a[r * static_cast<std::size_t>(e.n)] -= p / static_cast<double>(r);
    }
  }
  double v = 0;
  for (double c : series_exp(a)) v += c;
  return v;
}

struct WindowOptions {
  int span = 10;                          // number of unit windows ending at the horizon
  std::optional<double> first_window;     // overrides span
  std::optional<double> last_window_end;  // overrides the completeness horizon
};

struct WindowFit {
  double pressure = 0;
  std::vector<double> window_starts;
  std::vector<double> sums;
  double residual = 0;
};

inline WindowFit pressure_window(const OrbitEnsemble& ens, double beta, const WindowOptions& opt = {}) {
  if (ens.entries.empty()) fail(ErrorKind::InvalidArgument, "empty orbit ensemble");
  const double horizon = opt.last_window_end.value_or(ens.completeness_horizon());
  const double end = std::floor(horizon);
  const double start = opt.first_window.value_or(end - opt.span);
  const int nwin = static_cast<int>(end - start);
  if (nwin < 3)
    fail(ErrorKind::EmptyWindow, "fewer than 3 unit windows below the completeness horizon " + fmt17(horizon));
  std::vector<double> S(static_cast<std::size_t>(nwin), 0.0);
  for (const auto& e : ens.entries) {
    for (int r = 1; r * e.T < end; ++r) {
      const double t = r * e.T;
      if (t < start) continue;
      S[static_cast<std::size_t>(t - start)] += std::exp(-beta * r * std::log(e.J));
    }
  }
  WindowFit f;
  std::vector<double> empty, x, y;
  for (int w = 0; w < nwin; ++w) {
    const double T = start + w;
    f.window_starts.push_back(T);
    f.sums.push_back(S[static_cast<std::size_t>(w)]);
    if (S[static_cast<std::size_t>(w)] <= 0) {
      empty.push_back(T);
      continue;
    }
    x.push_back(T);
    y.push_back(std::log(S[static_cast<std::size_t>(w)]) + std::log(T + 0.5));
  }
  if (!empty.empty()) {
    std::string list;
    for (double T : empty) list += (list.empty() ? "" : ", ") + std::string("[") + fmt17(T) + "," + fmt17(T + 1) + ")";
    fail(ErrorKind::EmptyWindow, "empty windows: " + list);
  }
  const auto fit = least_squares(x, y);
  f.pressure = fit.slope;
  f.residual = fit.residual_rms;
  return f;
}

inline double pressure_zeta_root(const OrbitEnsemble& ens, double beta) {
  if (ens.entries.empty()) fail(ErrorKind::InvalidArgument, "empty orbit ensemble");
  auto f = [&](double s) { return inverse_zeta(ens, s, beta); };
  double lam_max = 0, Tmin = ens.entries.front().T;
  for (const auto& e : ens.entries) lam_max = std::max(lam_max, std::log(e.J) / e.T);
  // growth guess from the number of words of maximal length
  std::size_t at_max = 0;
  for (const auto& e : ens.entries) at_max += (e.n == ens.max_word_length);
  const double H_guess = std::log(std::max<double>(2.0, static_cast<double>(at_max) * ens.max_word_length)) /
                         std::max(Tmin * ens.max_word_length / 2, 1e-3);
  double hi = 2 * std::max(H_guess, 0.5) + std::max(0.0, -beta) * lam_max * 2;
  double lo = -2 * std::abs(beta) * lam_max - 0.5;
  for (int expand = 0; expand <= 8; ++expand) {
    if (f(hi) <= 0) {
      hi *= 2;
      continue;
    }
    const int steps = 400;
    const double h = (hi - lo) / steps;
    double b = hi, fb = f(b);
    for (int i = 1; i <= steps; ++i) {
      const double a = hi - i * h, fa = f(a);
      if (fa == 0.0) return a;
      if ((fa < 0) != (fb < 0)) {
        std::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(
            f, a, b, fa, fb, [](double x, double y) { return std::abs(y - x) <= 1e-14 * std::max(1.0, std::abs(x)); },
            it);
        return (r.first + r.second) / 2;
      }
      b = a;
      fb = fa;
    }
    lo = lo * 2 - 0.5;
  }
  fail(ErrorKind::NoRootBracket, "no sign change of the inverse zeta at beta = " + fmt17(beta));
}

inline double pressure(const OrbitEnsemble& ens, double beta, Method m = Method::zeta_root) {
  return m == Method::window ? pressure_window(ens, beta).pressure : pressure_zeta_root(ens, beta);
}

struct PressureSample {
  double beta;
  double pressure;
};

inline std::vector<PressureSample> pressure_curve(const OrbitEnsemble& ens, const std::vector<double>& betas,
                                                  Method m = Method::zeta_root) {
  auto P = parallel_map(betas.size(), [&](std::size_t i) { return pressure(ens, betas[i], m); });
  std::vector<PressureSample> out;
  for (std::size_t i = 0; i < betas.size(); ++i) out.push_back({betas[i], P[i]});
  return out;
}

struct EntropyReport {
  double entropy = 0;
  std::optional<double> window_estimate;
  std::string window_error;
};

inline EntropyReport entropy(const OrbitEnsemble& ens) {
  EntropyReport r;
  r.entropy = pressure_zeta_root(ens, 0.0);
  try {
    r.window_estimate = pressure_window(ens, 0.0).pressure;
  } catch (const Error& e) {
    r.window_error = e.what();
  }
  return r;
}

inline double bowen_dimension(const OrbitEnsemble& ens, double tol = 1e-13) {
  auto P = [&](double b) { return pressure_zeta_root(ens, b); };
  const double p0 = P(0.0), p1 = P(1.0);
  const double resolution = 1e-12;  // roots of the inverse zeta are resolved to ~1e-14
  if (!(p0 > resolution) || !(p1 < -resolution))
    fail(ErrorKind::NoBracket, "pressure does not change sign on [0, 1]: P(0) = " + fmt17(p0) + ", P(1) = " + fmt17(p1));
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(
      P, 0.0, 1.0, p0, p1, [tol](double a, double b) { return std::abs(b - a) <= tol; }, it);
  return (r.first + r.second) / 2;
}

struct GapPrediction {
  double pressure_half = 0;
  double gap_width = 0;
  bool informative = false;
};

inline GapPrediction gap_prediction(const OrbitEnsemble& ens) {
  GapPrediction g;
  g.pressure_half = pressure_zeta_root(ens, 0.5);
  g.gap_width = std::max(0.0, -g.pressure_half);
  g.informative = g.pressure_half < 0;
  return g;
}

}  // namespace reslab::thermo
