#pragma once

#include "gmsurf/common.hpp"
#include "gmsurf/polyfit.hpp"
#include "gmsurf/provenance.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

namespace gmsurf {

// Faces of a cube are numbered 2 * axis + side (side 0 is the -1 face).
// A face or tile uses the frame (u, v) = (axis + 1, axis + 2) mod 3, with
// corners ordered c00, c10, c01, c11 (first index along u).

using UV = std::array<double, 2>;

struct FacePoint {
  int face = -1;  // -1 for interior points
  UV uv{};        // face coordinates in [-1,1]^2; unused for interior points
  Vec3 local = Vec3::Zero();
  Vec3 world = Vec3::Zero();
  PointKind kind = PointKind::EdgeCrossing;
  VertexKey key;
};

/// Points where g = c on the 12 edges of the cube. A corner counts as
/// inside when g >= c, so every edge has at most one crossing.
std::vector<FacePoint> edge_intersections(const TrilinearCell& cell, double c, std::uint64_t cell_id = 0);

/// A segment on the surface parallel to `axis` through the whole cube, where
/// the surface normal has no component along that axis. (beta, gamma) are its
/// coordinates along axes axis+1 and axis+2.
struct FoldSegment {
  int axis = 0;
  int index = 0;  // 0 or 1 among the segments for this axis
  double beta = 0.0;
  double gamma = 0.0;
  Vec3 point(double t) const;  // local point with coordinate t along the axis
  Vec3 end(int side) const { return point(side ? 1.0 : -1.0); }
};

std::vector<FoldSegment> fold_segments(const TrilinearCell& cell, double c, int axis);
std::vector<FoldSegment> fold_segments(const TrilinearCell& cell, double c);

/// Crossing of two fold segments of different axes (indices into the list).
struct CriticalPoint {
  Vec3 local = Vec3::Zero();
  int fold_a = 0;
  int fold_b = 0;
};
std::vector<CriticalPoint> critical_points(const std::vector<FoldSegment>& folds);
std::vector<Vec3> critical_points(const TrilinearCell& cell, double c);

VertexKey fold_end_key(std::uint64_t cell_id, const FoldSegment& s, int side);
VertexKey critical_key(std::uint64_t cell_id, std::size_t index);

// ---- Curves on one square tile -------------------------------------------

struct ChainPoint {
  VertexKey key;
  Vec3 world = Vec3::Zero();
  UV uv{};
};
using Chain = std::vector<ChainPoint>;

struct TileCurveInput {
  std::array<double, 4> f{};  // corner values minus c: c00, c10, c01, c11
  /// Crossings on the edges v=-1, u=+1, v=+1, u=-1 (in that order); present
  /// exactly where the edge's corner signs differ.
  std::array<std::optional<ChainPoint>, 4> crossings;
  /// Points known to lie on the curve (fold ends from the cells on both sides).
  std::vector<ChainPoint> extras;
  std::function<Vec3(const UV&)> to_world;
  VertexKey sample_base;  // kind CurveSample; chain and pair indices go into b
  double sagitta = 0.05;  // insert a curve midpoint when a chord bows more
};

/// Branches of the bilinear curve, each oriented with the inside (f >= 0) on
/// its left in the (u, v) frame. Four crossings are paired by the sign of
/// f00 f11 - f10 f01: non-negative cuts off c10 and c01.
std::vector<Chain> tile_chains(const TileCurveInput& tile);

// ---- One cell --------------------------------------------------------------

struct CellGraphInput {
  std::uint64_t cell_id = 0;
  TrilinearCell cell;  // cell.bounds is the world box
  double c = 0.0;
  /// Boundary curve pieces on the cube faces, already oriented for this cell:
  /// the inside lies to the right when seen from outside the cube.
  std::vector<std::pair<int, Chain>> boundary;
  std::vector<FoldSegment> folds;
  std::vector<CriticalPoint> criticals;
  /// Fold ends of this cell that coincide with another cell's fold end on a
  /// shared face and appear in the boundary under that key instead.
  std::unordered_map<VertexKey, VertexKey, VertexKeyHash> aliases;
};

/// One piece of the cell's surface on which every component of the normal
/// keeps its sign. Boundary is counter-clockwise seen from the outside.
struct Patch {
  std::vector<VertexKey> keys;
  std::vector<Vec3> local;
  std::vector<Vec3> world;
  std::vector<Vec3> normal;           // outward unit normal, -grad g
  std::vector<std::uint8_t> faces;    // bit f set when the point lies on face f
};

std::vector<Patch> split_patches(const CellGraphInput& in);

/// Ear clipping after projection along the patch's normal octant. Ears with
/// all three corners on one cube face are used only as a last resort.
std::vector<std::array<int, 3>> triangulate_patch(const Patch& patch, std::uint64_t cell_id = 0);

CellOutput contour_cell(const CellGraphInput& in);

// ---- A cube on its own -----------------------------------------------------

/// Graph input for a cube whose faces are not shared with anything.
CellGraphInput isolated_cell_input(const TrilinearCell& cell, double c, std::uint64_t cell_id = 0,
                                   double sagitta = 0.05);

/// Closed boundary loops on the faces of an isolated cube, inside on the
/// right when seen from outside.
std::vector<std::vector<FacePoint>> trace_face_loops(const TrilinearCell& cell, double c,
                                                     std::uint64_t cell_id = 0);

}  // namespace gmsurf
