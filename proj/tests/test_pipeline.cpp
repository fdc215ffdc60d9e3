#include "doctest.h"

#include "gmsurf/oracle.hpp"
#include "gmsurf/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace gmsurf;

namespace {

std::vector<Atom> ring(int n, double ring_radius, double atom_radius) {
  std::vector<Atom> a;
  for (int k = 0; k < n; ++k) {
    const double t = 2 * std::numbers::pi * k / n;
    a.push_back({Vec3(ring_radius * std::cos(t), ring_radius * std::sin(t), 0.0), atom_radius, 0.0});
  }
  return a;
}

std::string off_bytes(const TriangleMesh& m) {
  std::ostringstream s;
  write_off(m, s);
  return s.str();
}

MeshConfig config(double tau, int workers = 1) {
  MeshConfig c;
  c.tau = tau;
  c.workers = workers;
  return c;
}

}  // namespace

TEST_CASE("single atom gives a closed sphere") {
  const MeshRun r = run_mesh({Atom{Vec3(0.3, -0.2, 0.1), 2.0, 0.0}}, config(1e-3));
  CHECK(r.report.defects() == 0);
  CHECK(r.report.closed());
  CHECK(r.report.components == 1);
  CHECK(r.report.euler_characteristic == 2);
  CHECK(std::abs(r.report.area / (16 * std::numbers::pi) - 1) < 0.02);
  CHECK(std::abs(r.report.volume / (32.0 / 3.0 * std::numbers::pi) - 1) < 0.02);
}

TEST_CASE("decay and isovalue move the sphere radius as the field predicts") {
  // exp(-D (s^2 - r^2)) = c  gives  s^2 = r^2 - ln(c) / D.
  MeshConfig c = config(1e-3);
  c.decay = 2.0;
  c.isovalue = 0.5;
  const double R = std::sqrt(1.5 * 1.5 - std::log(0.5) / 2.0);
  const MeshRun r = run_mesh({Atom{Vec3::Zero(), 1.5, 0.0}}, c);
  CHECK(r.report.defects() == 0);
  CHECK(std::abs(r.report.area / (4 * std::numbers::pi * R * R) - 1) < 0.02);
  for (const Vec3& v : r.mesh.vertices) CHECK(std::abs(v.norm() - R) < 0.02 * R);
}

TEST_CASE("ring of atoms gives a torus") {
  const std::vector<Atom> atoms = ring(12, 3.0, 1.0);
  const GaussianField f(atoms, 1.0, 1.0);
  const NeighborGrid g(f);
  OracleParams op;
  op.spacing = 0.1;
  CHECK(check_manifold(mc_reference(f, g, op)).euler_characteristic == 0);

  const MeshRun r = run_mesh(atoms, config(1e-2));
  CHECK(r.report.defects() == 0);
  CHECK(r.report.components == 1);
  CHECK(r.report.euler_characteristic == 0);
}

TEST_CASE("two atoms mesh cleanly and match the oracle") {
  const std::vector<Atom> atoms = {{Vec3(-0.9, 0.1, 0.0), 1.6, 0.0}, {Vec3(1.0, -0.2, 0.3), 1.3, 0.0}};
  const MeshRun r = run_mesh(atoms, config(1e-3));
  CHECK(r.report.defects() == 0);
  CHECK(r.report.euler_characteristic == 2);
  const GaussianField f(atoms, 1.0, 1.0);
  const NeighborGrid g(f);
  OracleParams op;
  op.spacing = 0.1;
  const MeshReport o = metrics(mc_reference(f, g, op));
  CHECK(std::abs(r.report.area / o.area - 1) < 0.03);
  CHECK(std::abs(r.report.volume / o.volume - 1) < 0.03);

  // Oracle samples lie close to the mesh.
  const SurfaceSamples s = surface_samples(f, g, 100);
  for (const Vec3& p : s.points) CHECK(distance_to_mesh(r.mesh, p) <= r.max_leaf_diagonal);
}

TEST_CASE("synthetic molecules are manifold and free of intersections") {
  for (const char* name : {"cluster7.pqr", "cluster39.pqr"}) {
    const std::vector<Atom> atoms = parse_pqr_file(std::string(GMSURF_TEST_DATA) + "/" + name);
    for (double tau : {4e-2, 1e-2, 2.5e-3}) {
      const MeshRun r = run_mesh(atoms, config(tau));
      INFO(name << " tau " << tau);
      CHECK(r.report.non_manifold_edges == 0);
      CHECK(r.report.non_manifold_vertices == 0);
      CHECK(r.report.orientation_conflicts == 0);
      CHECK(r.report.intersecting_pairs == 0);
      CHECK(r.extract.stray_fold_ends == 0);
    }
  }
}

TEST_CASE("output does not depend on the worker count") {
  const std::vector<Atom> atoms = parse_pqr_file(std::string(GMSURF_TEST_DATA) + "/cluster39.pqr");
  const std::string one = off_bytes(run_mesh(atoms, config(1e-2, 1)).mesh);
  CHECK(off_bytes(run_mesh(atoms, config(1e-2, 3)).mesh) == one);
}

TEST_CASE("bad parameters are rejected") {
  MeshConfig c;
  c.tau = 0.0;
  CHECK_THROWS_AS(run_mesh({Atom{}}, c), Error);
  c = MeshConfig{};
  c.cutoff_eps = 1e-2;
  CHECK_THROWS_AS(run_mesh({Atom{}}, c), Error);
  CHECK_THROWS_AS(run_mesh({}, MeshConfig{}), Error);
}

TEST_CASE("report lines are key=value") {
  const MeshRun r = run_mesh({Atom{Vec3::Zero(), 1.5, 0.0}}, config(1e-2));
  std::istringstream s(report_text(r));
  std::string line;
  int n = 0;
  while (std::getline(s, line)) {
    CHECK(line.find('=') != std::string::npos);
    ++n;
  }
  CHECK(n > 20);
}
