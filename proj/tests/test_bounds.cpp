#include "doctest.h"

#include "gmsurf/bounds.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace gmsurf;

namespace {

CoeffTensor random_tensor(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CoeffTensor t;
  for (double& v : t.a) v = u(rng);
  return t;
}

// Range of the tensor polynomial on an n^3 grid.
Interval sampled_range(const CoeffTensor& t, int n) {
  Interval r{1e300, -1e300};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec3 q(-1 + 2.0 * i / (n - 1), -1 + 2.0 * j / (n - 1), -1 + 2.0 * k / (n - 1));
        const double v = eval_tensor(t, q);
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
      }
  return r;
}

}  // namespace

TEST_CASE("svd_split of a rank-one tensor") {
  const std::array<double, 4> u{1.0, -0.5, 0.25, 2.0}, v{0.3, 0.0, -1.0, 0.7}, w{-2.0, 1.0, 0.5, 0.1};
  CoeffTensor t;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) t(i, j, k) = u[i] * v[j] * w[k];
  const SvdSplit s = svd_split(t);
  REQUIRE(s.terms.size() == 1);
  CHECK(s.terms[0].sub.size() == 1);
  for (double r : s.residue.a) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("svd_split of zero") {
  const SvdSplit s = svd_split(CoeffTensor{});
  CHECK(s.terms.empty());
  for (double r : s.residue.a) CHECK(r == 0.0);
}

TEST_CASE("svd_split reconstructs random tensors and keeps 0.99 of the mass") {
  std::mt19937_64 rng(10);
  for (int n = 0; n < 100; ++n) {
    const CoeffTensor t = random_tensor(rng);
    const SvdSplit s = svd_split(t);
    const CoeffTensor back = s.reconstruct();
    for (int e = 0; e < 64; ++e) CHECK(std::abs(back.a[e] - t.a[e]) <= 1e-10);

    // Independent first-level singular values via the 4x4 Gram matrix.
    Eigen::Matrix<double, 4, 16> A1;
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) A1(k, 4 * i + j) = t(i, j, k);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(A1 * A1.transpose());
    double total = 0.0;
    for (int i = 0; i < 4; ++i) total += std::sqrt(std::max(0.0, es.eigenvalues()[i]));
    double kept = 0.0;
    for (const auto& term : s.terms) kept += term.sigma;
    CHECK(kept >= 0.99 * total - 1e-12);
  }
}

TEST_CASE("full retention leaves no residue") {
  std::mt19937_64 rng(12);
  const CoeffTensor t = random_tensor(rng);
  const SvdSplit s = svd_split(t, SvdThresholds{1.0, 1.0});
  for (double r : s.residue.a) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("bound_poly1d closed cases") {
  const Interval a = bound_poly1d({0, 1, 0, 0});
  CHECK(a.lo == doctest::Approx(-1.0));
  CHECK(a.hi == doctest::Approx(1.0));
  const Interval b = bound_poly1d({0, 0, 1, 0});
  CHECK(b.lo == doctest::Approx(-0.5));
  CHECK(b.hi == doctest::Approx(1.0));
  const Interval c = bound_poly1d({0, 0, 0, 1});  // L3 has interior extrema at t = +-1/sqrt(5)
  CHECK(c.lo == doctest::Approx(-1.0));
  CHECK(c.hi == doctest::Approx(1.0));
}

TEST_CASE("bound_poly1d against dense sampling") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    const std::array<double, 4> c{u(rng), u(rng), u(rng), u(rng)};
    double lo = 1e300, hi = -1e300;
    for (int s = 0; s < 10000; ++s) {
      const double t = -1.0 + 2.0 * s / 9999.0;
      const auto L = legendre(t);
      const double v = c[0] * L[0] + c[1] * L[1] + c[2] * L[2] + c[3] * L[3];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const Interval b = bound_poly1d(c);
    CHECK(b.lo <= lo);
    CHECK(b.hi >= hi);
    CHECK(b.width() <= (hi - lo) + 1e-6);
  }
}

TEST_CASE("bound_tensor closed cases") {
  CoeffTensor c5;
  c5(0, 0, 0) = 5.0;
  const Interval a = bound_tensor(svd_split(c5));
  CHECK(a.lo == doctest::Approx(5.0));
  CHECK(a.hi == doctest::Approx(5.0));
  CoeffTensor x;
  x(1, 0, 0) = 1.0;
  const Interval b = bound_tensor(svd_split(x));
  CHECK(b.lo == doctest::Approx(-1.0));
  CHECK(b.hi == doctest::Approx(1.0));
}

TEST_CASE("bound_tensor is sound on 1000 random tensors") {
  std::mt19937_64 rng(14);
  for (int n = 0; n < 1000; ++n) {
    const CoeffTensor t = random_tensor(rng);
    const Interval b = bound_tensor(svd_split(t));
    const Interval s = sampled_range(t, 21);
    CHECK(b.lo <= s.lo);
    CHECK(b.hi >= s.hi);
  }
}

TEST_CASE("growing the residue never shrinks the bound") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  for (int n = 0; n < 100; ++n) {
    SvdSplit s = svd_split(random_tensor(rng));
    Interval prev = bound_tensor(s);
    for (int step = 0; step < 5; ++step) {
      const int e = static_cast<int>(u(rng) * 200) % 64;
      double& r = s.residue.a[e];
      r += std::copysign(u(rng), r == 0.0 ? 1.0 : r);
      const Interval cur = bound_tensor(s);
      CHECK(cur.lo <= prev.lo);
      CHECK(cur.hi >= prev.hi);
      prev = cur;
    }
  }
}

TEST_CASE("cube_may_intersect is inclusive at the boundary") {
  CoeffTensor c5;
  c5(0, 0, 0) = 5.0;
  CHECK_FALSE(cube_may_intersect(svd_split(c5), 1.0));
  CoeffTensor c1;
  c1(0, 0, 0) = 1.0;
  CHECK(cube_may_intersect(svd_split(c1), 1.0));
}

TEST_CASE("product covers all four sign cases") {
  const Interval r = product({-2.0, 3.0}, {-1.0, 4.0});
  CHECK(r.lo == -8.0);
  CHECK(r.hi == 12.0);
  const Interval p = product({1.0, 2.0}, {3.0, 5.0});
  CHECK(p.lo == 3.0);
  CHECK(p.hi == 10.0);
}
