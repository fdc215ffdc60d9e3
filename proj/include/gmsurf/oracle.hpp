#pragma once

#include "gmsurf/meshkit.hpp"
#include "gmsurf/molmodel.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace gmsurf {

/// phi sampled on a uniform node lattice.
struct DenseGrid {
  Vec3 origin = Vec3::Zero();
  double spacing = 0.0;
  std::array<int, 3> dims{};  // node counts
  std::vector<double> values;  // x fastest

  double at(int x, int y, int z) const {
    return values[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x];
  }
  Vec3 node(int x, int y, int z) const { return origin + spacing * Vec3(x, y, z); }
};

struct OracleParams {
  double spacing = 0.2;                      // Angstrom
  std::size_t memory_cap = std::size_t{1} << 30;  // bytes for the sampled lattice
  int workers = 1;
};

/// A box certain to contain {phi >= c}: outside every ball of radius
/// sqrt(r_i^2 + ln(N / c) / D) each kernel is below c / N.
Box level_set_bounds(const GaussianField& field);

/// Sample phi on a lattice covering level_set_bounds with two spare nodes per
/// side. Throws Error when the lattice would exceed the memory cap.
DenseGrid sample_dense(const GaussianField& field, const NeighborGrid& grid, const OracleParams& params);

/// Reference surface by marching tetrahedra on the dense lattice (each cube
/// split into six tetrahedra around its main diagonal, so neighbouring cubes
/// agree on shared faces). Nodes with phi = c count as inside; crossings are
/// kept 1e-9 away from nodes so no two vertices coincide. Closed, manifold
/// and outward oriented.
TriangleMesh mc_reference(const GaussianField& field, const NeighborGrid& grid, const OracleParams& params = {});
TriangleMesh mc_reference(const DenseGrid& dense, double isovalue);

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::size_t skipped = 0;  // rays that found no crossing to the residual bound
};

/// n points on phi = c: rays leave atom centres (atoms taken round-robin)
/// along Fibonacci-sphere directions and bisect the first crossing until
/// |phi - c| <= 1e-10.
SurfaceSamples surface_samples(const GaussianField& field, const NeighborGrid& grid, std::size_t n);

/// Distance from p to the nearest triangle of the mesh (brute force).
double distance_to_mesh(const TriangleMesh& mesh, const Vec3& p);

}  // namespace gmsurf
