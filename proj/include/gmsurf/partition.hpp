#pragma once

#include "gmsurf/bounds.hpp"
#include "gmsurf/molmodel.hpp"
#include "gmsurf/polyfit.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace gmsurf {

/// Octree cell address: level plus integer position at that level.
/// Packed as 4 bits of level and 20 bits per coordinate.
struct CellKey {
  int level = 0;
  std::array<std::int64_t, 3> idx{};

  std::uint64_t packed() const {
    return static_cast<std::uint64_t>(level) | (static_cast<std::uint64_t>(idx[0]) << 4) |
           (static_cast<std::uint64_t>(idx[1]) << 24) | (static_cast<std::uint64_t>(idx[2]) << 44);
  }
  static CellKey unpack(std::uint64_t p) {
    constexpr std::uint64_t m = (1u << 20) - 1;
    return {static_cast<int>(p & 15u),
            {static_cast<std::int64_t>((p >> 4) & m), static_cast<std::int64_t>((p >> 24) & m),
             static_cast<std::int64_t>((p >> 44) & m)}};
  }
  CellKey child(int octant) const {
    return {level + 1,
            {2 * idx[0] + (octant & 1), 2 * idx[1] + ((octant >> 1) & 1), 2 * idx[2] + ((octant >> 2) & 1)}};
  }
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

enum class CellState : std::uint8_t { Internal, Surface, Empty };

/// Octree over an n_x x n_y x n_z grid of equal root cubes. Every cell ever
/// created is recorded, so the leaves (Surface and Empty) tile the domain.
/// Lattice coordinates count finest-level cube edges from the origin.
class Octree {
 public:
  Octree() = default;
  Octree(const Vec3& origin, double root_edge, std::array<int, 3> dims, int max_depth);

  const Vec3& origin() const { return origin_; }
  double root_edge() const { return root_edge_; }
  const std::array<int, 3>& dims() const { return dims_; }
  int max_depth() const { return max_depth_; }
  double lattice_unit() const { return unit_; }

  /// Edge length of a level-l cell in lattice units.
  std::int64_t span(int level) const { return std::int64_t{1} << (max_depth_ - level); }
  std::array<std::int64_t, 3> lattice_lo(const CellKey& k) const {
    const std::int64_t s = span(k.level);
    return {k.idx[0] * s, k.idx[1] * s, k.idx[2] * s};
  }
  Box box(const CellKey& k) const;
  Vec3 lattice_point(const std::array<std::int64_t, 3>& p) const {
    return origin_ + unit_ * Vec3(double(p[0]), double(p[1]), double(p[2]));
  }
  std::array<std::int64_t, 3> lattice_extent() const {
    return {dims_[0] * span(0), dims_[1] * span(0), dims_[2] * span(0)};
  }

  void set(const CellKey& k, CellState s) { cells_[k.packed()] = s; }
  std::optional<CellState> state(const CellKey& k) const;

  /// Leaf containing the point given in doubled lattice coordinates (2 * lattice).
  /// Callers pass odd coordinates so the point is never on a cell boundary.
  std::optional<CellKey> leaf_at_doubled(const std::array<std::int64_t, 3>& p2) const;

  /// Leaf containing a world point (ties resolved toward the upper cell).
  std::optional<CellKey> leaf_at(const Vec3& p) const;

  /// Leaf across face (axis, side) of cell k that touches the face centre.
  std::optional<CellKey> face_neighbor(const CellKey& k, int axis, int side) const;

  std::size_t size() const { return cells_.size(); }
  std::vector<CellKey> leaves(CellState which) const;

 private:
  Vec3 origin_ = Vec3::Zero();
  double root_edge_ = 1.0;
  double unit_ = 1.0;
  std::array<int, 3> dims_{};
  int max_depth_ = 0;
  std::unordered_map<std::uint64_t, CellState> cells_;
};

/// Axis-aligned grid of equal root cubes covering every influence ball,
/// padded by one cube, with edge `cell_target`.
Octree initial_grid(const GaussianField& field, const NeighborGrid& grid, double cell_target,
                    int max_depth);

/// A cube becomes a leaf once both the high-order coefficient mass and the
/// collapse error bound are at most tau * tolerance_scale * c. With the
/// default scale of 100, tau is quoted in hundredths of c; tolerance_scale = 1
/// gives the unscaled rule.
struct PartitionParams {
  double tau = 1e-2;
  double tolerance_scale = 100.0;
  int max_depth = 8;
  SvdThresholds thresholds{};
  /// Skip re-projection for children whose parent-restricted polynomial is
  /// certified away from c by more than the parent's high-order mass.
  bool prefilter = true;
  /// Split any leaf that is more than one level coarser than a surface leaf
  /// touching it (faces, edges or corners).
  bool balance = true;
  int workers = 1;
};

struct Leaf {
  CellKey key;
  Box box;
  TrilinearCell cell;
  double high_order = 0.0;
  bool forced = false;  // hit max_depth with high_order > tau * c
};

struct LeafSet {
  std::vector<Leaf> leaves;  // sorted by packed key
  std::size_t cubes_evaluated = 0;
  std::size_t discarded = 0;
  std::size_t prefiltered = 0;
  std::size_t forced_leaves = 0;
  std::size_t balance_splits = 0;

  /// Indices of surface leaves sharing a face with leaf i.
  std::vector<std::size_t> face_adjacent(const Octree& tree, std::size_t i) const;
  std::optional<std::size_t> find(const CellKey& k) const;
};

/// Adaptive estimate/divide loop. Mutates `tree` to record every cell created.
LeafSet refine(Octree& tree, const GaussianField& field, const NeighborGrid& grid,
               const PartitionParams& params);

/// Legendre coefficients of the parent cubic restricted to one child octant
/// (bit 0: upper x half, bit 1: upper y, bit 2: upper z).
CoeffTensor subdivide_tensor(const CoeffTensor& parent, int octant);

}  // namespace gmsurf
