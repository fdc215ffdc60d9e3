#include "doctest.h"

#include "gmsurf/cellcontour.hpp"

#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace gmsurf;

namespace {

TrilinearCell cell_from(const std::function<double(const Vec3&)>& g) {
  std::array<double, 8> c{};
  for (int k = 0; k < 8; ++k) c[k] = g(TrilinearCell::corner_position(k));
  return TrilinearCell::from_corners(c, Box{Vec3::Constant(-1), Vec3::Constant(1)});
}

Vec3 tri_normal(const CellOutput& m, const std::array<std::uint32_t, 3>& t) {
  return (m.positions[t[1]] - m.positions[t[0]]).cross(m.positions[t[2]] - m.positions[t[0]]);
}

// Directed-edge bookkeeping: every edge inside the cube must be used once in
// each direction; edges on the cube boundary once.
struct EdgeAudit {
  int interior_mismatch = 0;
  int repeated = 0;
};

EdgeAudit audit(const CellOutput& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> dir;
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) ++dir[{t[e], t[(e + 1) % 3]}];
  EdgeAudit a;
  for (const auto& [e, n] : dir) {
    if (n > 1) ++a.repeated;
    if (dir.count({e.second, e.first})) continue;
    // unmatched: both ends must lie on a common cube face
    const Vec3 &p = m.positions[e.first], &q = m.positions[e.second];
    bool common = false;
    for (int ax = 0; ax < 3; ++ax)
      for (double s : {-1.0, 1.0}) common |= std::abs(p[ax] - s) < 1e-9 && std::abs(q[ax] - s) < 1e-9;
    if (!common) ++a.interior_mismatch;
  }
  return a;
}

}  // namespace

TEST_CASE("plane x = 0 gives one loop and two outward triangles") {
  const TrilinearCell g = cell_from([](const Vec3& p) { return p.x(); });
  const auto pts = edge_intersections(g, 0.0);
  REQUIRE(pts.size() == 4);
  for (const FacePoint& p : pts) CHECK(std::abs(p.local.x()) <= 1e-9);
  CHECK(fold_segments(g, 0.0).empty());
  const auto loops = trace_face_loops(g, 0.0);
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].size() == 4);
  const CellOutput m = contour_cell(isolated_cell_input(g, 0.0));
  REQUIRE(m.triangles.size() == 2);
  for (const auto& t : m.triangles) CHECK(tri_normal(m, t).x() < 0.0);  // outward is -grad g
}

TEST_CASE("z - xy = 1 crosses the edge y = 1, z = 1 at x = 0") {
  const TrilinearCell g = cell_from([](const Vec3& p) { return p.z() - p.x() * p.y(); });
  bool found = false;
  for (const FacePoint& p : edge_intersections(g, 1.0))
    if (std::abs(p.local.y() - 1) < 1e-12 && std::abs(p.local.z() - 1) < 1e-12) {
      CHECK(std::abs(p.local.x()) <= 1e-12);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("z - xy = 0 has x and y folds meeting at the origin") {
  const TrilinearCell g = cell_from([](const Vec3& p) { return p.z() - p.x() * p.y(); });
  const auto fx = fold_segments(g, 0.0, 0), fy = fold_segments(g, 0.0, 1), fz = fold_segments(g, 0.0, 2);
  REQUIRE(fx.size() == 1);
  REQUIRE(fy.size() == 1);
  CHECK(fz.empty());
  CHECK(fx[0].end(0).isApprox(Vec3(-1, 0, 0)));
  CHECK(fy[0].end(1).isApprox(Vec3(0, 1, 0)));
  const auto cp = critical_points(g, 0.0);
  REQUIRE(cp.size() == 1);
  CHECK(cp[0].norm() <= 1e-12);

  const auto patches = split_patches(isolated_cell_input(g, 0.0));
  CHECK(patches.size() == 4);
  for (const Patch& p : patches) {
    // every normal component keeps one sign on the patch
    for (int a = 0; a < 3; ++a) {
      int pos = 0, neg = 0;
      for (const Vec3& n : p.normal) {
        pos += n[a] > 1e-9;
        neg += n[a] < -1e-9;
      }
      CHECK((pos == 0 || neg == 0));
    }
  }
}

TEST_CASE("tile_chains pairs four crossings by the asymptotic decider") {
  auto run = [](std::array<double, 4> f) {
    TileCurveInput t;
    t.f = f;
    const UV pos[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
    for (int e = 0; e < 4; ++e) t.crossings[e] = ChainPoint{{PointKind::EdgeCrossing, 0, std::uint64_t(e)}, Vec3::Zero(), pos[e]};
    t.to_world = [](const UV&) { return Vec3::Zero(); };
    t.sagitta = 10.0;
    return tile_chains(t);
  };
  // f00 f11 - f10 f01 > 0: c10 and c01 are cut off.
  auto a = run({1.0, -1.0, -1.0, 2.0});
  REQUIRE(a.size() == 2);
  std::set<std::set<std::uint64_t>> pairs;
  for (const Chain& c : a) pairs.insert({c.front().key.b, c.back().key.b});
  CHECK(pairs == std::set<std::set<std::uint64_t>>{{0, 1}, {2, 3}});
  auto b = run({-1.0, 1.0, 1.0, -2.0});
  pairs.clear();
  for (const Chain& c : b) pairs.insert({c.front().key.b, c.back().key.b});
  CHECK(pairs == std::set<std::set<std::uint64_t>>{{0, 1}, {2, 3}});
  auto d = run({1.0, -2.0, -2.0, 1.0});
  pairs.clear();
  for (const Chain& c : d) pairs.insert({c.front().key.b, c.back().key.b});
  CHECK(pairs == std::set<std::set<std::uint64_t>>{{0, 3}, {1, 2}});
}

TEST_CASE("tile chains keep the inside on the left") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    const TrilinearCell g = cell_from([&](const Vec3&) { return u(rng); });
    const CellGraphInput in = isolated_cell_input(g, 0.0);
    for (const auto& [face, chain] : in.boundary) {
      // Reoriented per cell: inside is on the right seen from outside, i.e.
      // the cell-outward normal crossed with the chain direction points inside.
      const int axis = face / 2;
      const Vec3 out = (face % 2 ? 1.0 : -1.0) * Vec3::Unit(axis);
      for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        const Vec3 a = chain[k].world, b = chain[k + 1].world;
        const Vec3 side = (b - a).cross(out);  // right-hand side seen from outside
        if (side.norm() < 1e-9) continue;
        // g grows toward the inside; use its in-face gradient at both ends.
        Vec3 grad = g.gradient(a) + g.gradient(b);
        grad[axis] = 0.0;
        CHECK(grad.dot(side) > 0.0);
      }
    }
  }
}

TEST_CASE("random cells triangulate into consistently oriented patches") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int cells = 0, failures = 0, flipped = 0, flat = 0, mismatched = 0, mixed_sign = 0;
  for (int n = 0; n < 3000; ++n) {
    std::array<double, 8> c{};
    for (double& v : c) v = u(rng);
    const TrilinearCell g = TrilinearCell::from_corners(c, Box{Vec3::Constant(-1), Vec3::Constant(1)});
    CellOutput m;
    try {
      m = contour_cell(isolated_cell_input(g, 0.0, n));
    } catch (const TopologyError&) {
      ++failures;
      continue;
    }
    ++cells;
    const EdgeAudit a = audit(m);
    mismatched += a.interior_mismatch + a.repeated;
    // Each triangle faces the octant of its patch's normals.
    for (const Patch& p : split_patches(isolated_cell_input(g, 0.0, n))) {
      Vec3 d = Vec3::Zero();
      for (const Vec3& v : p.normal) d += v;
      for (int a = 0; a < 3; ++a) {
        d[a] = d[a] >= 0 ? 1.0 : -1.0;
        for (const Vec3& v : p.normal) mixed_sign += v[a] * d[a] < -1e-9;
      }
      for (const auto& t : triangulate_patch(p)) {
        const Vec3 nrm = (p.local[t[1]] - p.local[t[0]]).cross(p.local[t[2]] - p.local[t[0]]);
        if (nrm.dot(d) <= 0) ++flipped;
      }
    }
    for (const auto& t : m.triangles) {
      for (int ax = 0; ax < 3; ++ax)
        for (double s : {-1.0, 1.0}) {
          bool all = true;
          for (int k = 0; k < 3; ++k) all &= std::abs(m.positions[t[k]][ax] - s) < 1e-12;
          flat += all;
        }
    }
  }
  MESSAGE("cells " << cells << " failures " << failures << " flipped " << flipped << " flat " << flat);
  CHECK(failures == 0);
  CHECK(mismatched == 0);
  CHECK(flipped == 0);
  CHECK(flat == 0);
  CHECK(mixed_sign == 0);
}
