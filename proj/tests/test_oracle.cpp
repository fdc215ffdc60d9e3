#include "doctest.h"

#include "gmsurf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace gmsurf;

namespace {

GaussianField sphere_field() { return GaussianField({Atom{Vec3::Zero(), 2.0, 0.0}}, 1.0, 1.0); }

GaussianField two_atoms() {
  return GaussianField({Atom{Vec3(-0.9, 0.1, 0.0), 1.6, 0.0}, Atom{Vec3(1.0, -0.2, 0.3), 1.3, 0.0}}, 1.0, 1.0);
}

}  // namespace

TEST_CASE("marching tetrahedra reproduces the r = 2 sphere") {
  const GaussianField f = sphere_field();
  const NeighborGrid g(f);
  OracleParams p;
  p.spacing = 0.1;
  const TriangleMesh m = mc_reference(f, g, p);
  const MeshReport r = full_report(m, 1);
  CHECK(r.defects() == 0);
  CHECK(r.closed());
  CHECK(r.euler_characteristic == 2);
  CHECK(r.components == 1);
  CHECK(std::abs(r.area / (16 * std::numbers::pi) - 1) < 0.01);
  CHECK(std::abs(r.volume / (32.0 / 3.0 * std::numbers::pi) - 1) < 0.01);
  // Linear interpolation along an edge of length L misplaces the root by about
  // L^2 / 8 * |phi'' / phi'|; radially at s = 2 that ratio is (4 s^2 - 2) / (2 s).
  const double L = 0.1 * std::sqrt(3.0);
  const double bound = L * L / 8.0 * (4 * 4.0 - 2) / 4.0;
  double worst = 0.0;
  for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs(v.norm() - 2.0));
  CHECK(worst <= 1.1 * bound);
}

TEST_CASE("halving the spacing moves the sphere area toward 16 pi") {
  const GaussianField f = sphere_field();
  const NeighborGrid g(f);
  double last = 1e300;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    OracleParams p;
    p.spacing = h;
    const double err = std::abs(metrics(mc_reference(f, g, p)).area - 16 * std::numbers::pi);
    MESSAGE("spacing " << h << " area error " << err);
    CHECK(err < last);
    last = err;
  }
}

TEST_CASE("two-atom oracle mesh is clean") {
  const GaussianField f = two_atoms();
  const NeighborGrid g(f);
  OracleParams p;
  p.spacing = 0.15;
  p.workers = 2;
  const MeshReport r = full_report(mc_reference(f, g, p), 2);
  CHECK(r.defects() == 0);
  CHECK(r.components == 1);
  CHECK(r.euler_characteristic == 2);
}

TEST_CASE("lattice over the memory cap is refused") {
  const GaussianField f = sphere_field();
  const NeighborGrid g(f);
  OracleParams p;
  p.spacing = 0.001;
  p.memory_cap = 1 << 20;
  CHECK_THROWS_WITH_AS(mc_reference(f, g, p), doctest::Contains("larger spacing"), Error);
}

TEST_CASE("surface samples sit on the level set") {
  {
    const GaussianField f = sphere_field();
    const NeighborGrid g(f);
    const SurfaceSamples s = surface_samples(f, g, 200);
    CHECK(s.skipped == 0);
    REQUIRE(s.points.size() == 200);
    for (const Vec3& x : s.points) CHECK(std::abs(x.norm() - 2.0) <= 1e-9);
  }
  {
    const GaussianField f = two_atoms();
    const NeighborGrid g(f);
    const SurfaceSamples s = surface_samples(f, g, 300);
    CHECK(s.points.size() + s.skipped == 300);
    CHECK(s.points.size() >= 250);
    for (const Vec3& x : s.points) CHECK(std::abs(eval_field(f, g, x).phi - 1.0) <= 1e-10);
  }
}

TEST_CASE("distance to mesh") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  CHECK(distance_to_mesh(m, Vec3(0.2, 0.2, 0.5)) == doctest::Approx(0.5));
  CHECK(distance_to_mesh(m, Vec3(-1, 0, 0)) == doctest::Approx(1.0));
  CHECK(distance_to_mesh(m, Vec3(1, 1, 0)) == doctest::Approx(std::sqrt(0.5)));
}
