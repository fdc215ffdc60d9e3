#include "gmsurf/extract.hpp"

#include "gmsurf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>

namespace gmsurf {

namespace {

using Lattice = std::array<std::int64_t, 3>;

std::uint64_t pack_node(const Lattice& p) {
  return static_cast<std::uint64_t>(p[0]) | (static_cast<std::uint64_t>(p[1]) << 21) |
         (static_cast<std::uint64_t>(p[2]) << 42);
}

// Nonoverlapping floating-point expansion; the sum of its components is the
// exact value of everything added.
class ExactSum {
 public:
  void add(double q) {
    std::vector<double> h;
    h.reserve(e_.size() + 1);
    for (double x : e_) {
      const double s = q + x, bv = s - q, av = s - bv;
      const double err = (q - av) + (x - bv);
      if (err != 0.0) h.push_back(err);
      q = s;
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    e_.swap(h);
  }
  void add_product(double w, double f) {
    const double p = w * f;
    add(std::fma(w, f, -p));
    add(p);
  }
  int sign() const {
    for (auto it = e_.rbegin(); it != e_.rend(); ++it)
      if (*it != 0.0) return *it > 0.0 ? 1 : -1;
    return 0;
  }
  /// Rounded value with the exact sign (zero stays zero).
  double value() const {
    double s = 0.0;
    for (double x : e_) s += x;
    const int sg = sign();
    if (sg > 0 && s <= 0.0) s = std::numeric_limits<double>::denorm_min();
    if (sg < 0 && s >= 0.0) s = -std::numeric_limits<double>::denorm_min();
    if (sg == 0) s = 0.0;
    return s;
  }

 private:
  std::vector<double> e_;
};

struct Node {
  Lattice p{};
  double f = 0.0;
  bool regular = true;
  CellKey owner{};  // coarsest leaf having this node inside an edge or face
};

struct Tile {
  int axis = 0;
  int level = 0;
  std::int64_t span = 0;
  Lattice lo{};  // lattice corner; lo[axis] is the plane
  VertexKey base;
  std::array<int, 4> corner{};  // node indices c00, c10, c01, c11
  std::array<std::optional<ChainPoint>, 4> crossings;
  std::vector<ChainPoint> extras;
  std::vector<Chain> chains;
  Vec3 wlo = Vec3::Zero(), whi = Vec3::Zero();

  UV uv(const Vec3& w) const {
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    return {2.0 * (w[ua] - wlo[ua]) / (whi[ua] - wlo[ua]) - 1.0, 2.0 * (w[va] - wlo[va]) / (whi[va] - wlo[va]) - 1.0};
  }
  Vec3 world(const UV& q) const {
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    Vec3 w = wlo;
    w[ua] = wlo[ua] + 0.5 * (q[0] + 1.0) * (whi[ua] - wlo[ua]);
    w[va] = wlo[va] + 0.5 * (q[1] + 1.0) * (whi[va] - wlo[va]);
    return w;
  }
};

struct Contour {
  CellKey key;
  TrilinearCell cell;
  std::vector<FoldSegment> folds;
  std::vector<CriticalPoint> criticals;
  std::array<std::vector<int>, 6> face_tiles;
};

class Extractor {
 public:
  Extractor(const Octree& tree, const GaussianField& field, const NeighborGrid& grid, const ExtractParams& p)
      : tree_(tree), field_(field), grid_(grid), p_(p), ext_(tree.lattice_extent()) {}

  Extraction run() {
    std::vector<CellKey> leaves = tree_.leaves(CellState::Surface);
    const auto empty = tree_.leaves(CellState::Empty);
    leaves.insert(leaves.end(), empty.begin(), empty.end());
    std::sort(leaves.begin(), leaves.end(), [](const CellKey& a, const CellKey& b) { return a.packed() < b.packed(); });
    stats_.leaves = leaves.size();

    for (const CellKey& k : leaves)
      for (int c = 0; c < 8; ++c) node_index(corner_of(k, c), /*create=*/true);
    classify_nodes();
    evaluate_nodes();

    for (const CellKey& k : leaves) {
      bool pos = false, neg = false;
      std::array<double, 8> f{};
      for (int c = 0; c < 8; ++c) {
        f[c] = nodes_[node_index(corner_of(k, c))].f;
        (f[c] >= 0.0 ? pos : neg) = true;
      }
      if (!(pos && neg)) continue;
      Contour ct;
      ct.key = k;
      ct.cell = TrilinearCell::from_corners(f, tree_.box(k));
      cells_.push_back(std::move(ct));
    }
    stats_.contoured_cells = cells_.size();

    parallel_for(cells_.size(), p_.workers, [&](std::size_t i) {
      Contour& ct = cells_[i];
      ct.folds = fold_segments(ct.cell, 0.0);
    });

    for (Contour& ct : cells_)
      for (int face = 0; face < 6; ++face) ct.face_tiles[face] = tiles_on_face(ct.key, face / 2, face % 2);
    stats_.tiles = tiles_.size();
    for (Tile& t : tiles_) find_crossings(t);
    for (Contour& ct : cells_) attach_fold_ends(ct);
    for (Tile& t : tiles_) merge_coincident_extras(t);

    parallel_for(tiles_.size(), p_.workers, [&](std::size_t i) {
      Tile& t = tiles_[i];
      TileCurveInput in;
      for (int k = 0; k < 4; ++k) in.f[k] = nodes_[t.corner[k]].f;
      in.crossings = t.crossings;
      in.extras = t.extras;
      in.to_world = [&t](const UV& q) { return t.world(q); };
      in.sample_base = t.base;
      in.sagitta = p_.sagitta;
      t.chains = tile_chains(in);
    });

    Extraction out;
    out.cells.resize(cells_.size());
    parallel_for(cells_.size(), p_.workers, [&](std::size_t i) {
      const Contour& ct = cells_[i];
      CellGraphInput in;
      in.cell_id = ct.key.packed();
      in.cell = ct.cell;
      in.c = 0.0;
      in.folds = ct.folds;
      in.criticals = ct.criticals;
      for (const FoldSegment& s : ct.folds)
        for (int side = 0; side < 2; ++side)
          if (const auto a = aliases_.find(fold_end_key(in.cell_id, s, side)); a != aliases_.end())
            in.aliases.insert(*a);
      for (int face = 0; face < 6; ++face)
        for (int ti : ct.face_tiles[face])
          for (const Chain& ch : tiles_[ti].chains) {
            Chain oriented = ch;
            if (face % 2) std::reverse(oriented.begin(), oriented.end());
            in.boundary.emplace_back(face, std::move(oriented));
          }
      out.cells[i] = contour_cell(in);
    });
    for (const Contour& ct : cells_) {
      stats_.fold_segments += ct.folds.size();
      stats_.critical_points += ct.criticals.size();
    }
    out.stats = stats_;
    return out;
  }

 private:
  Lattice corner_of(const CellKey& k, int c) const {
    Lattice p = tree_.lattice_lo(k);
    const std::int64_t s = tree_.span(k.level);
    for (int a = 0; a < 3; ++a) p[a] += ((c >> a) & 1) ? s : 0;
    return p;
  }

  int node_index(const Lattice& p, bool create = false) {
    const std::uint64_t key = pack_node(p);
    const auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    if (!create) return -1;
    const int i = static_cast<int>(nodes_.size());
    index_.emplace(key, i);
    nodes_.push_back(Node{.p = p});
    return i;
  }

  void classify_nodes() {
    for (Node& n : nodes_) {
      std::optional<CellKey> best;
      for (int o = 0; o < 8; ++o) {
        Lattice p2{};
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
          p2[a] = 2 * n.p[a] + (((o >> a) & 1) ? 1 : -1);
          inside = inside && p2[a] > 0 && p2[a] < 2 * ext_[a];
        }
        if (!inside) continue;
        const auto k = tree_.leaf_at_doubled(p2);
        if (!k) continue;
        const Lattice lo = tree_.lattice_lo(*k);
        const std::int64_t s = tree_.span(k->level);
        bool corner = true;
        for (int a = 0; a < 3; ++a) corner = corner && (n.p[a] == lo[a] || n.p[a] == lo[a] + s);
        if (corner) continue;
        if (!best || k->level < best->level || (k->level == best->level && k->packed() < best->packed())) best = *k;
      }
      if (best) {
        n.regular = false;
        n.owner = *best;
        ++stats_.hanging_nodes;
      }
    }
    stats_.nodes = nodes_.size();
  }

  void evaluate_nodes() {
    const double c = field_.isovalue;
    parallel_for(nodes_.size(), p_.workers, [&](std::size_t i) {
      Node& n = nodes_[i];
      if (n.regular) n.f = eval_field(field_, grid_, tree_.lattice_point(n.p)).phi - c;
    });
    std::unordered_map<int, std::vector<std::pair<int, double>>> memo;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].regular) continue;
      ExactSum sum;
      for (const auto& [j, w] : expand(static_cast<int>(i), memo)) sum.add_product(w, nodes_[j].f);
      nodes_[i].f = sum.value();
    }
  }

  // Weights of the regular nodes whose combination defines node i. The
  // weights are dyadic rationals and exact in double.
  const std::vector<std::pair<int, double>>& expand(int i, std::unordered_map<int, std::vector<std::pair<int, double>>>& memo) {
    const auto it = memo.find(i);
    if (it != memo.end()) return it->second;
    std::vector<std::pair<int, double>> out;
    const Node& n = nodes_[i];
    if (n.regular) {
      out.emplace_back(i, 1.0);
      return memo.emplace(i, std::move(out)).first->second;
    }
    const Lattice lo = tree_.lattice_lo(n.owner);
    const std::int64_t s = tree_.span(n.owner.level);
    std::vector<int> free_axes;
    std::array<double, 3> t{};
    for (int a = 0; a < 3; ++a) {
      t[a] = static_cast<double>(n.p[a] - lo[a]) / static_cast<double>(s);
      if (n.p[a] != lo[a] && n.p[a] != lo[a] + s) free_axes.push_back(a);
    }
    std::map<int, double> acc;
    for (int m = 0; m < (1 << free_axes.size()); ++m) {
      Lattice q = n.p;
      double w = 1.0;
      for (std::size_t b = 0; b < free_axes.size(); ++b) {
        const int a = free_axes[b];
        const bool up = (m >> b) & 1;
        q[a] = up ? lo[a] + s : lo[a];
        w *= up ? t[a] : 1.0 - t[a];
      }
      const int j = node_index(q);
      if (j < 0) throw Error("interpolation corner is not a lattice node");
      const auto terms = expand(j, memo);  // copy: memo may rehash
      for (const auto& [r, wr] : terms) acc[r] += w * wr;
    }
    for (const auto& [r, w] : acc)
      if (w != 0.0) out.emplace_back(r, w);
    return memo.emplace(i, std::move(out)).first->second;
  }

  int tile_for(const CellKey& leaf, int axis, int side) {
    Lattice lo = tree_.lattice_lo(leaf);
    const std::int64_t s = tree_.span(leaf.level);
    if (side) lo[axis] += s;
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    const std::uint64_t a = static_cast<std::uint64_t>(lo[axis]) | (static_cast<std::uint64_t>(lo[ua]) << 21) |
                            (static_cast<std::uint64_t>(lo[va]) << 42);
    const std::uint64_t b = static_cast<std::uint64_t>(axis) | (static_cast<std::uint64_t>(leaf.level) << 2);
    const auto key = std::make_pair(a, b);
    const auto it = tile_index_.find(key);
    if (it != tile_index_.end()) return it->second;

    Tile t;
    t.axis = axis;
    t.level = leaf.level;
    t.span = s;
    t.lo = lo;
    t.base = {PointKind::CurveSample, a, b};
    for (int iv = 0; iv < 2; ++iv)
      for (int iu = 0; iu < 2; ++iu) {
        Lattice q = lo;
        q[ua] += iu * s;
        q[va] += iv * s;
        const int j = node_index(q);
        if (j < 0) throw Error("tile corner is not a lattice node");
        t.corner[iu + 2 * iv] = j;
      }
    Lattice hi = lo;
    hi[ua] += s;
    hi[va] += s;
    t.wlo = tree_.lattice_point(lo);
    t.whi = tree_.lattice_point(hi);
    const int id = static_cast<int>(tiles_.size());
    tiles_.push_back(std::move(t));
    tile_index_.emplace(key, id);
    return id;
  }

  // The smaller faces covering face (axis, side) of k.
  std::vector<int> tiles_on_face(const CellKey& k, int axis, int side) {
    CellKey n = k;
    n.idx[axis] += side ? 1 : -1;
    const std::int64_t count = static_cast<std::int64_t>(tree_.dims()[axis]) << k.level;
    if (n.idx[axis] < 0 || n.idx[axis] >= count) return {tile_for(k, axis, side)};
    const auto st = tree_.state(n);
    if (st && *st != CellState::Internal) return {tile_for(k, axis, side)};
    if (!st) return {tile_for(k, axis, side)};  // inside a coarser leaf
    std::vector<int> out;
    std::vector<CellKey> stack{n};
    while (!stack.empty()) {
      const CellKey c = stack.back();
      stack.pop_back();
      for (int o = 0; o < 8; ++o) {
        if (((o >> axis) & 1) != (side ? 0 : 1)) continue;
        const CellKey ch = c.child(o);
        const auto cs = tree_.state(ch);
        if (!cs) throw Error("octree has a missing child");
        if (*cs == CellState::Internal)
          stack.push_back(ch);
        else
          out.push_back(tile_for(ch, axis, side ? 0 : 1));
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void find_crossings(Tile& t) {
    static constexpr int kEdge[4][2] = {{0, 1}, {1, 3}, {2, 3}, {0, 2}};
    const int ua = (t.axis + 1) % 3, va = (t.axis + 2) % 3;
    for (int e = 0; e < 4; ++e) {
      const Node &a = nodes_[t.corner[kEdge[e][0]]], &b = nodes_[t.corner[kEdge[e][1]]];
      if ((a.f >= 0.0) == (b.f >= 0.0)) continue;
      const int d = (e % 2 == 0) ? ua : va;
      // Walk the lattice nodes between the two corners.
      int prev = t.corner[kEdge[e][0]];
      int found = 0;
      for (std::int64_t step = 1; step <= t.span; ++step) {
        Lattice q = a.p;
        q[d] += step;
        const int j = node_index(q);
        if (j < 0) continue;
        const Node &n0 = nodes_[prev], &n1 = nodes_[j];
        if ((n0.f >= 0.0) != (n1.f >= 0.0)) {
          const double s = std::clamp(n0.f / (n0.f - n1.f), 1e-9, 1.0 - 1e-9);
          const Vec3 w0 = tree_.lattice_point(n0.p), w1 = tree_.lattice_point(n1.p);
          ChainPoint cp;
          cp.key = {PointKind::EdgeCrossing, pack_node(n0.p), static_cast<std::uint64_t>(d)};
          cp.world = w0 + s * (w1 - w0);
          cp.uv = t.uv(cp.world);
          // Pin the coordinate that is exactly on the tile edge.
          cp.uv[e % 2 == 0 ? 1 : 0] = (e == 0 || e == 3) ? -1.0 : 1.0;
          t.crossings[e] = cp;
          ++found;
        }
        prev = j;
      }
      if (found != 1) throw Error("tile edge does not have exactly one sign change");
    }
  }

  void attach_fold_ends(Contour& ct) {
    const std::uint64_t id = ct.key.packed();
    const Box box = tree_.box(ct.key);
    std::vector<FoldSegment> kept;
    for (const FoldSegment& s : ct.folds) {
      std::array<std::pair<int, ChainPoint>, 2> ends;
      bool ok = true;
      for (int side = 0; side < 2 && ok; ++side) {
        const Vec3 w = box.to_world(s.end(side));
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int ti : ct.face_tiles[2 * s.axis + side]) {
          const Tile& t = tiles_[ti];
          bool any = false;
          for (const auto& c : t.crossings) any = any || c.has_value();
          if (!any) continue;
          const UV q = t.uv(w);
          const double d = std::max({std::abs(q[0]) - 1.0, std::abs(q[1]) - 1.0, 0.0});
          if (d < best_d) best_d = d, best = ti;
        }
        if (best < 0) {
          ok = false;
          break;
        }
        ChainPoint cp;
        cp.key = fold_end_key(id, s, side);
        cp.world = w;
        cp.uv = tiles_[best].uv(w);
        ends[side] = {best, cp};
      }
      if (!ok) {
        ++stats_.stray_fold_ends;
        continue;
      }
      for (auto& [ti, cp] : ends) tiles_[ti].extras.push_back(cp);
      kept.push_back(s);
    }
    ct.folds = std::move(kept);
    ct.criticals = critical_points(ct.folds);
  }

  // Fold ends of two cells can meet the shared face at the same point (mirror
  // symmetric data does this). Keep one vertex there.
  void merge_coincident_extras(Tile& t) {
    std::sort(t.extras.begin(), t.extras.end(), [](const ChainPoint& a, const ChainPoint& b) { return a.key < b.key; });
    std::vector<ChainPoint> kept;
    for (const ChainPoint& p : t.extras) {
      const auto same = std::find_if(kept.begin(), kept.end(), [&](const ChainPoint& q) {
        return std::max(std::abs(p.uv[0] - q.uv[0]), std::abs(p.uv[1] - q.uv[1])) <= 1e-9;
      });
      if (same == kept.end()) kept.push_back(p);
      else aliases_.emplace(p.key, same->key);
    }
    t.extras = std::move(kept);
  }

  const Octree& tree_;
  const GaussianField& field_;
  const NeighborGrid& grid_;
  const ExtractParams& p_;
  Lattice ext_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, int> index_;
  std::vector<Tile> tiles_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, int> tile_index_;
  std::vector<Contour> cells_;
  std::unordered_map<VertexKey, VertexKey, VertexKeyHash> aliases_;
  ExtractStats stats_;
};

}  // namespace

Extraction extract_cells(const Octree& tree, const GaussianField& field, const NeighborGrid& grid,
                         const ExtractParams& params) {
  return Extractor(tree, field, grid, params).run();
}

}  // namespace gmsurf
