#pragma once

#include "gmsurf/cellcontour.hpp"
#include "gmsurf/molmodel.hpp"
#include "gmsurf/partition.hpp"
#include "gmsurf/provenance.hpp"

#include <cstddef>
#include <vector>

namespace gmsurf {

struct ExtractParams {
  double sagitta = 0.05;  // in tile coordinates
  int workers = 1;
};

struct ExtractStats {
  std::size_t leaves = 0;
  std::size_t nodes = 0;
  std::size_t hanging_nodes = 0;
  std::size_t contoured_cells = 0;
  std::size_t tiles = 0;
  std::size_t fold_segments = 0;
  std::size_t critical_points = 0;
  std::size_t stray_fold_ends = 0;  // fold ends with no curve to attach to
};

struct Extraction {
  std::vector<CellOutput> cells;  // sorted by packed cell key
  ExtractStats stats;
};

/// Contour every leaf of the refined tree whose corner values straddle c.
///
/// The contoured function is the trilinear interpolant of values at lattice
/// nodes (leaf corners). A node that is a corner of every leaf touching it
/// takes phi - c. Any other node lies inside an edge or face of some coarser
/// leaf and takes the interpolated value from the coarsest such leaf, summed
/// exactly so its sign is reliable. The result is continuous across faces of
/// different sizes, so neighbouring cells see the same face curves.
Extraction extract_cells(const Octree& tree, const GaussianField& field, const NeighborGrid& grid,
                         const ExtractParams& params = {});

}  // namespace gmsurf
