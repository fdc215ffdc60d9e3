#pragma once

#include "gmsurf/common.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace gmsurf {

enum class PointKind : std::uint8_t {
  EdgeCrossing = 0,  // g = c on a cube edge (or atomic lattice segment)
  FoldEnd = 1,       // end of a fold segment on a cube face
  CurveSample = 2,   // extra sample on a face curve
  Critical = 3,      // intersection of two fold segments
};

/// Identity of a surface vertex independent of which cell emits it. Two
/// cells that meet at a point derive the same key for it.
struct VertexKey {
  PointKind kind = PointKind::EdgeCrossing;
  std::uint64_t a = 0;
  std::uint64_t b = 0;

  friend bool operator==(const VertexKey&, const VertexKey&) = default;
  friend bool operator<(const VertexKey& x, const VertexKey& y) {
    if (x.kind != y.kind) return x.kind < y.kind;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  }
};

struct VertexKeyHash {
  std::size_t operator()(const VertexKey& k) const {
    std::uint64_t h = k.a * 0x9E3779B97F4A7C15ull;
    h ^= (k.b + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2));
    h ^= static_cast<std::uint64_t>(k.kind) * 0xBF58476D1CE4E5B9ull;
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

/// Triangles emitted by one cell. `triangles` index into `keys`/`positions`.
struct CellOutput {
  std::uint64_t cell = 0;
  std::vector<VertexKey> keys;
  std::vector<Vec3> positions;  // world coordinates
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

}  // namespace gmsurf
