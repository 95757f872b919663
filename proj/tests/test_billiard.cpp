#include <gtest/gtest.h>

#include <random>
#include <set>

#include "reslab/billiard.hpp"
#include "reslab/zeros.hpp"

using namespace reslab;
using namespace reslab::billiard;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

// Ray state leaving a disk boundary: position angle on the disk, direction angle of flight.
struct Ray {
  double theta, psi;
};

// Follow the ray through the disks w[1], ..., w[n-1], w[0], reflecting at each.
Ray bounce_map(const DiskSystem& sys, const Word& w, Ray r) {
  const std::size_t n = w.size();
  Vec2 p = sys.center(w[0]) + sys.radius(w[0]) * Vec2(std::cos(r.theta), std::sin(r.theta));
  Vec2 d(std::cos(r.psi), std::sin(r.psi));
  double theta = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    const Letter j = w[k % n];
    const Vec2 c = sys.center(j);
    const double a = sys.radius(j);
    const Vec2 m = p - c;
    const double b = m.dot(d), disc = b * b - (m.squaredNorm() - a * a);
    if (disc < 0) throw std::runtime_error("ray misses disk");
    const double t = -b - std::sqrt(disc);
    p = p + t * d;
    const Vec2 nrm = (p - c) / a;
    d = d - 2 * d.dot(nrm) * nrm;
    theta = std::atan2(nrm.y(), nrm.x());
  }
  return {theta, std::atan2(d.y(), d.x())};
}

// Leading eigenvalue modulus of the return map by central differences.
double fd_jacobian(const DiskSystem& sys, const BounceOrbit& o) {
  const double h = 1e-2 / o.jacobian;
  const Vec2 start = o.points[1] - o.points[0];
  const Ray r0{o.bounce_angles[0], std::atan2(start.y(), start.x())};
  Eigen::Matrix2d J;
  for (int c = 0; c < 2; ++c) {
    Ray rp = r0, rm = r0;
    (c == 0 ? rp.theta : rp.psi) += h;
    (c == 0 ? rm.theta : rm.psi) -= h;
    const Ray fp = bounce_map(sys, o.word, rp), fm = bounce_map(sys, o.word, rm);
    auto wrap = [](double x) { return std::remainder(x, 2 * pi); };
    J(0, c) = wrap(fp.theta - fm.theta) / (2 * h);
    J(1, c) = wrap(fp.psi - fm.psi) / (2 * h);
  }
  const Eigen::EigenSolver<Eigen::Matrix2d> es(J);
  return std::max(std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[1]));
}

double distance_to_segment(const Vec2& c, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((c - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - c).norm();
}

}  // namespace

TEST(DiskSystem, TwoDisksValid) {
  const auto sys = two_disk(6.0);
  EXPECT_EQ(sys.size(), 2u);
  EXPECT_NEAR(sys.gap(0, 1), 4.0, 1e-12);
}

TEST(DiskSystem, EquilateralNoEclipseBySegmentOracle) {
  const auto sys = equilateral_three_disk(6.0);
  // every segment joining points of two disks stays clear of the third disk
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const int k = 3 - i - j;
      double closest = std::numeric_limits<double>::infinity();
      for (int u = 0; u < 90; ++u)
        for (int v = 0; v < 90; ++v) {
          const Vec2 a = sys.center(i) + Vec2(std::cos(u * pi / 45), std::sin(u * pi / 45));
          const Vec2 b = sys.center(j) + Vec2(std::cos(v * pi / 45), std::sin(v * pi / 45));
          closest = std::min(closest, distance_to_segment(sys.center(k), a, b));
        }
      EXPECT_GT(closest, 1.0);
    }
}

TEST(DiskSystem, CollinearEclipse) {
  EXPECT_EQ(kind_of([] { build_disk_system({Vec2(0, 0), Vec2(4, 0), Vec2(8, 0)}, {1, 1, 1}); }),
            ErrorKind::EclipseViolation);
}

TEST(DiskSystem, Overlap) {
  EXPECT_EQ(kind_of([] { build_disk_system({Vec2(0, 0), Vec2(1.5, 0)}, {1, 1}); }), ErrorKind::DiskOverlap);
}

TEST(DiskSystem, NeedsTwoDisks) {
  EXPECT_THROW(build_disk_system({Vec2(0, 0)}, {1}), Error);
}

TEST(FindOrbit, TwoDiskBounceLength) {
  const auto o = find_orbit(two_disk(6.0), {0, 1});
  EXPECT_NEAR(o.length, 8.0, 1e-12);
}

TEST(FindOrbit, TwoDiskJacobianClosedForm) {
  // symmetric bounce between unit disks, gap L: Λ = 1 + L + sqrt(L (L + 2)) per half period, squared
  const double L = 4.0;
  const double half = 1 + L + std::sqrt(L * (L + 2));
  EXPECT_NEAR(find_orbit(two_disk(6.0), {0, 1}).jacobian, half * half, 1e-9);
}

TEST(FindOrbit, JacobianMatchesFiniteDifference) {
  const auto sys2 = two_disk(6.0);
  const auto o2 = find_orbit(sys2, {0, 1});
  EXPECT_NEAR(fd_jacobian(sys2, o2) / o2.jacobian, 1.0, 1e-4);
  const auto sys3 = equilateral_three_disk(6.0);
  for (const Word& w : {Word{0, 1, 2}, Word{0, 1, 0, 2}, Word{0, 1, 2, 1, 2}}) {
    const auto o = find_orbit(sys3, w);
    EXPECT_NEAR(fd_jacobian(sys3, o) / o.jacobian, 1.0, 1e-4) << disk_word_string(w);
  }
}

TEST(FindOrbit, SymmetricPairsAgree) {
  const auto sys = equilateral_three_disk(6.0);
  const auto a = find_orbit(sys, {0, 1, 2}), b = find_orbit(sys, {0, 2, 1});
  EXPECT_NEAR(a.length, b.length, 1e-10);
  EXPECT_NEAR(a.jacobian / b.jacobian, 1.0, 1e-10);
}

TEST(FindOrbit, InvariantsHold) {
  const auto sys = build_disk_system({Vec2(0, 0), Vec2(7, 0.5), Vec2(3, 6.5)}, {1.0, 1.3, 0.8});
  for (const auto& o : enumerate_orbits(sys, 6)) {
    const auto n = o.word.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& p = o.points[i];
      EXPECT_NEAR((p - sys.center(o.word[i])).norm(), sys.radius(o.word[i]), 1e-10);
      // reflection law: incoming and outgoing directions make equal angles with the normal
      const Vec2 nrm = (p - sys.center(o.word[i])).normalized();
      const Vec2 in = (p - o.points[(i + n - 1) % n]).normalized(), out = (o.points[(i + 1) % n] - p).normalized();
      EXPECT_NEAR(-in.dot(nrm), out.dot(nrm), 1e-10);
      EXPECT_NEAR(in.x() * nrm.y() - in.y() * nrm.x(), out.x() * nrm.y() - out.y() * nrm.x(), 1e-10);
    }
    // ad - bc cancels to rounding of ‖M‖²; beyond ‖M‖ ~ 1e4 only that floor is checkable
    const double scale = o.monodromy.squaredNorm();
    EXPECT_NEAR(o.monodromy.determinant(), 1.0, 1e-8 + 1e-14 * scale) << disk_word_string(o.word);
    EXPECT_GT(o.jacobian, 1.0);
    EXPECT_LT(o.gradient_norm, 1e-10);
    // symplectic pairing: the other eigenvalue is 1/Λ
    if (scale < 1e8) {
      const Eigen::EigenSolver<Eigen::Matrix2d> es(o.monodromy);
      const double e0 = std::abs(es.eigenvalues()[0]), e1 = std::abs(es.eigenvalues()[1]);
      EXPECT_NEAR(std::min(e0, e1), 1.0 / o.jacobian, 1e-8) << disk_word_string(o.word);
    }
  }
}

TEST(FindOrbit, LengthIsLocalMinimum) {
  const auto sys = equilateral_three_disk(6.0);
  const auto o = find_orbit(sys, {0, 1, 0, 2});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1e-3);
  for (int t = 0; t < 20; ++t) {
    double len = 0;
    std::vector<Vec2> p;
    for (std::size_t i = 0; i < o.word.size(); ++i) {
      const double th = o.bounce_angles[i] + nd(rng);
      p.push_back(sys.center(o.word[i]) + Vec2(std::cos(th), std::sin(th)));
    }
    for (std::size_t i = 0; i < p.size(); ++i) len += (p[(i + 1) % p.size()] - p[i]).norm();
    EXPECT_GE(len, o.length - 1e-12);
  }
}

TEST(FindOrbit, RejectsBadWords) {
  const auto sys = equilateral_three_disk(6.0);
  EXPECT_EQ(kind_of([&] { find_orbit(sys, {0, 0, 1}); }), ErrorKind::NonAdmissibleWord);
  EXPECT_EQ(kind_of([&] { find_orbit(sys, {0, 1, 0}); }), ErrorKind::NonAdmissibleWord);
  EXPECT_EQ(kind_of([&] { find_orbit(sys, {0, 3}); }), ErrorKind::NonAdmissibleWord);
}

TEST(EnumerateOrbits, TwoDisksSingleOrbit) {
  const auto orbits = enumerate_orbits(two_disk(6.0), 4);
  ASSERT_EQ(orbits.size(), 1u);
  EXPECT_EQ(disk_word_string(orbits[0].word), "AB");
}

TEST(EnumerateOrbits, ThreeDisksLengthTwo) {
  EXPECT_EQ(enumerate_orbits(equilateral_three_disk(6.0), 2).size(), 3u);
}

TEST(EnumerateOrbits, CountsMatchBruteForce) {
  const auto sys = equilateral_three_disk(6.0);
  for (int n = 2; n <= 7; ++n) {
    // brute force: canonical rotations of all cyclically admissible primitive words
    std::set<Word> classes;
    Word w(static_cast<std::size_t>(n));
    const auto total = static_cast<long>(std::pow(3, n));
    for (long code = 0; code < total; ++code) {
      long c = code;
      for (int i = 0; i < n; ++i, c /= 3) w[static_cast<std::size_t>(i)] = static_cast<Letter>(c % 3);
      if (is_cyclically_admissible(w, sys.rule()) && is_primitive(w)) classes.insert(minimal_rotation(w));
    }
    std::size_t expect = 0;
    for (const auto& x : classes) expect += x.size() >= 2;
    std::size_t got = 0;
    for (const auto& o : enumerate_orbits(sys, n)) got += o.n_bounces() == n;
    EXPECT_EQ(got, expect) << "n=" << n;
  }
}

TEST(EnumerateOrbits, SortedAndDeterministic) {
  const auto sys = equilateral_three_disk(6.0);
  const auto a = enumerate_orbits(sys, 6), b = enumerate_orbits(sys, 6);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].word, b[i].word);
    EXPECT_EQ(a[i].length, b[i].length);
    if (i) EXPECT_LE(a[i - 1].length, a[i].length);
  }
}

TEST(Symmetry, ThreeDiskRelabelingPreservesOrbitData) {
  const auto sys = equilateral_three_disk(6.0);
  for (const Word& w : {Word{0, 1, 0, 2}, Word{0, 1, 2, 1, 2}, Word{0, 1, 0, 1, 2}}) {
    const auto o = find_orbit(sys, w);
    for (const auto& perm : {std::array<Letter, 3>{1, 2, 0}, std::array<Letter, 3>{1, 0, 2}}) {
      Word v;
      for (Letter a : w) v.push_back(perm[static_cast<std::size_t>(a)]);
      const auto p = find_orbit(sys, v);
      EXPECT_NEAR(p.length, o.length, 1e-10);
      EXPECT_NEAR(p.jacobian / o.jacobian, 1.0, 1e-10);
    }
  }
}

TEST(Symmetry, RigidMotionPreservesLengths) {
  const std::vector<Vec2> c{Vec2(0, 0), Vec2(7, 0.5), Vec2(3, 6.5)};
  const std::vector<double> r{1.0, 1.3, 0.8};
  const auto sys = build_disk_system(c, r);
  const Eigen::Rotation2Dd rot(0.7);
  std::vector<Vec2> moved;
  for (const auto& x : c) moved.push_back(rot * x + Vec2(-3.2, 11.0));
  const auto sys2 = build_disk_system(moved, r);
  const auto a = enumerate_orbits(sys, 5), b = enumerate_orbits(sys2, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].length, b[i].length, 1e-10);
}

TEST(DynamicalZeta, TwoDiskFirstZeroClosedForm) {
  const auto sys = two_disk(6.0);
  const auto o = find_orbit(sys, {0, 1});
  // single factor m = 0: zeros at k = (2πq - i log(Λ)/2) / T
  const DynamicalZeta z(enumerate_orbits(sys, 2), 2);
  const zeros::Function F = [&](cplx k) { return z.evaluate(k, 0); };
  const double T = o.length, lam = std::log(o.jacobian);
  const cplx expect{2 * pi / T, -0.5 * lam / T};
  const auto res = zeros::locate_zeros(F, {cplx{0.3, -0.5}, cplx{1.2, -0.05}}, 1e-12);
  ASSERT_EQ(res.zeros.size(), 1u);
  EXPECT_LT(std::abs(res.zeros[0].location - expect), 1e-10);
}

TEST(DynamicalZeta, TwoDiskHalfLattice) {
  const auto sys = two_disk(6.0);
  const auto o = find_orbit(sys, {0, 1});
  const double T = o.length, lam = std::log(o.jacobian) / T;
  const DynamicalZeta z(enumerate_orbits(sys, 8), 8);
  const zeros::Function F = [&](cplx k) { return z.evaluate(k, 2); };
  const auto res = zeros::locate_zeros(F, {cplx{0.1, -1.5}, cplx{3.0, -0.05}}, 1e-11);
  // rows at depth λ (1/2 + ℓ), spacing 2π/T
  for (const auto& r : res.zeros) {
    // row 2 sits at |t| ~ Λ², where the vanishing t⁴ coefficient keeps a rounding residue of eps Λ⁸
    const double row = -r.location.imag() / lam - 0.5;
    const double tol = std::round(row) < 1.5 ? 1e-9 : 1e-6;
    EXPECT_NEAR(row, std::round(row), tol);
    const double col = r.location.real() * T / (2 * pi);
    EXPECT_NEAR(col, std::round(col), tol);
  }
  EXPECT_GE(res.zeros.size(), 6u);
}

TEST(DynamicalZeta, NoZerosOnRealAxis) {
  const auto sys = equilateral_three_disk(6.0);
  const DynamicalZeta z(enumerate_orbits(sys, 8), 8);
  double least = std::numeric_limits<double>::infinity();
  for (double k = 20; k <= 60; k += 0.01) least = std::min(least, std::abs(z.evaluate(cplx{k}, 3)));
  EXPECT_GT(least, 0.05);
}

TEST(DynamicalZeta, CurvatureDecay) {
  const auto sys = equilateral_three_disk(6.0);
  const auto orbits = enumerate_orbits(sys, 10);
  const cplx k{3.0, -0.1};
  std::vector<double> err;
  for (int n = 2; n <= 10; ++n) err.push_back(DynamicalZeta(orbits, n).evaluate_with_error(k, 3).second);
  for (std::size_t i = 2; i < err.size(); ++i) EXPECT_LT(err[i], err[i - 2]) << "order " << i + 2;
  EXPECT_LT(err.back(), 1e-3 * err.front());
}

TEST(DynamicalZeta, ConjugateSymmetry) {
  const auto sys = equilateral_three_disk(6.0);
  const DynamicalZeta z(enumerate_orbits(sys, 6), 6);
  for (cplx k : {cplx{5.0, -0.3}, cplx{17.5, -1.1}}) {
    EXPECT_LT(std::abs(z.evaluate(-std::conj(k), 3) - std::conj(z.evaluate(k, 3))), 1e-12);
  }
}

TEST(DynamicalZeta, FreeFunctionMatchesClass) {
  const auto sys = equilateral_three_disk(6.0);
  const cplx k{12.0, -0.4};
  EXPECT_EQ(dynamical_zeta(sys, k, 5, 2), DynamicalZeta(enumerate_orbits(sys, 5), 5).evaluate(k, 2));
}
