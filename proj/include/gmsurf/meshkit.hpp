#pragma once

#include "gmsurf/common.hpp"
#include "gmsurf/provenance.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gmsurf {

/// Indexed triangle mesh; triangles are counter-clockwise seen from outside.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

struct MeshReport {
  std::size_t vertices = 0;
  std::size_t triangles = 0;
  std::size_t boundary_edges = 0;      // face-degree 1
  std::size_t non_manifold_edges = 0;  // face-degree != 2 (includes boundary edges)
  std::size_t non_manifold_vertices = 0;
  std::size_t orientation_conflicts = 0;  // edges used twice in the same direction
  std::size_t intersecting_pairs = 0;
  std::size_t degenerate_triangles = 0;
  double area = 0.0;
  double volume = 0.0;  // only when closed
  double vertex_density = 0.0;
  long euler_characteristic = 0;
  std::size_t components = 0;
  double min_edge = 0.0;
  double max_edge = 0.0;
  double min_angle_deg = 0.0;

  bool closed() const { return non_manifold_edges == 0 && orientation_conflicts == 0; }
  std::size_t defects() const {
    return non_manifold_edges + non_manifold_vertices + orientation_conflicts + intersecting_pairs;
  }
};

/// Merge per-cell outputs by provenance key, in the given cell order.
/// Throws WeldError if two cells traverse a shared edge the same way.
TriangleMesh weld(const std::vector<CellOutput>& cells);

/// Edge degrees, vertex fans, orientation, Euler characteristic, components.
MeshReport check_manifold(const TriangleMesh& mesh);

/// Non-adjacent triangle pairs (no shared vertex) whose closed triangles
/// meet. Exact predicates; a uniform hash grid finds candidates.
std::size_t check_intersections(const TriangleMesh& mesh, int workers = 1);

/// Area, volume, density, edge and angle statistics, Euler characteristic,
/// components. Throws Error if the mesh is not closed.
MeshReport metrics(const TriangleMesh& mesh);

/// Everything above in one report; volume is left at 0 for open meshes.
MeshReport full_report(const TriangleMesh& mesh, int workers = 1);

/// Exact triangle-triangle overlap of closed triangles.
bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0, const Vec3& b1,
                         const Vec3& b2);

/// Sign of the determinant orienting d against the plane abc (exact).
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

void write_off(const TriangleMesh& mesh, std::ostream& out);
void write_off(const TriangleMesh& mesh, const std::string& path);
TriangleMesh read_off(std::istream& in);
TriangleMesh read_off(const std::string& path);

}  // namespace gmsurf
