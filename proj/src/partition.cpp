#include "gmsurf/partition.hpp"

#include "gmsurf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace gmsurf {

namespace {

constexpr int kMaxLevels = 15;                   // 4 bits of level in a packed key
constexpr std::int64_t kMaxLattice = 1 << 20;   // 20 bits per coordinate

}  // namespace

Octree::Octree(const Vec3& origin, double root_edge, std::array<int, 3> dims, int max_depth)
    : origin_(origin), root_edge_(root_edge), dims_(dims), max_depth_(max_depth) {
  if (max_depth < 0 || max_depth > kMaxLevels) throw Error("max_depth must be in [0, 15]");
  if (!(root_edge > 0.0)) throw Error("root cube edge must be positive");
  for (int d : dims)
    if (d <= 0 || static_cast<std::int64_t>(d) << max_depth >= kMaxLattice)
      throw Error("octree lattice too large; raise --cell or lower --max-depth");
  unit_ = root_edge / static_cast<double>(span(0));
}

Box Octree::box(const CellKey& k) const {
  const auto lo = lattice_lo(k);
  const std::int64_t s = span(k.level);
  return {lattice_point(lo), lattice_point({lo[0] + s, lo[1] + s, lo[2] + s})};
}

std::optional<CellState> Octree::state(const CellKey& k) const {
  auto it = cells_.find(k.packed());
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

std::optional<CellKey> Octree::leaf_at_doubled(const std::array<std::int64_t, 3>& p2) const {
  const auto ext = lattice_extent();
  for (int a = 0; a < 3; ++a)
    if (p2[a] < 0 || p2[a] >= 2 * ext[a]) return std::nullopt;
  for (int level = 0; level <= max_depth_; ++level) {
    const std::int64_t s2 = 2 * span(level);
    const CellKey k{level, {p2[0] / s2, p2[1] / s2, p2[2] / s2}};
    const auto st = state(k);
    if (!st) return std::nullopt;
    if (*st != CellState::Internal) return k;
  }
  return std::nullopt;
}

std::optional<CellKey> Octree::leaf_at(const Vec3& p) const {
  std::array<std::int64_t, 3> p2{};
  for (int a = 0; a < 3; ++a) {
    const double x = std::floor((p[a] - origin_[a]) / unit_);
    if (!(x >= 0.0) || x >= static_cast<double>(kMaxLattice)) return std::nullopt;
    p2[a] = 2 * static_cast<std::int64_t>(x) + 1;
  }
  return leaf_at_doubled(p2);
}

std::optional<CellKey> Octree::face_neighbor(const CellKey& k, int axis, int side) const {
  const auto lo = lattice_lo(k);
  const std::int64_t s = span(k.level);
  std::array<std::int64_t, 3> p2{};
  for (int a = 0; a < 3; ++a) p2[a] = 2 * lo[a] + s;  // face centre, doubled
  p2[axis] = side ? 2 * (lo[axis] + s) + 1 : 2 * lo[axis] - 1;
  // The doubled centre is even on the tangent axes when s > 1; nudge to odd so
  // the query never sits on a lattice plane.
  for (int a = 0; a < 3; ++a)
    if (a != axis && p2[a] % 2 == 0) p2[a] += 1;
  return leaf_at_doubled(p2);
}

std::vector<CellKey> Octree::leaves(CellState which) const {
  std::vector<std::uint64_t> keys;
  for (const auto& [key, st] : cells_)
    if (st == which) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  std::vector<CellKey> out;
  out.reserve(keys.size());
  for (auto k : keys) out.push_back(CellKey::unpack(k));
  return out;
}

Octree initial_grid(const GaussianField& field, const NeighborGrid& grid, double cell_target,
                    int max_depth) {
  if (field.atoms.empty()) throw Error("empty atom list");
  if (!(cell_target > 0.0)) throw Error("cell size must be positive");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = 0; i < field.atoms.size(); ++i) {
    const double rho = grid.influence_radius(i);
    lo = lo.cwiseMin(field.atoms[i].center - Vec3::Constant(rho));
    hi = hi.cwiseMax(field.atoms[i].center + Vec3::Constant(rho));
  }
  const Vec3 center = 0.5 * (lo + hi);
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    // One padding cube on each side keeps the surface strictly interior.
    dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / cell_target)) + 2;
  }
  const Vec3 half = 0.5 * cell_target * Vec3(dims[0], dims[1], dims[2]);
  Octree tree(center - half, cell_target, dims, max_depth);
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) tree.set(CellKey{0, {x, y, z}}, CellState::Internal);
  return tree;
}

CoeffTensor subdivide_tensor(const CoeffTensor& parent, int octant) {
  // M[h][i][j]: coefficient of L_j(s) in L_i((s + (2h - 1)) / 2). Products have
  // degree <= 6, so the 16-point rule is exact.
  static const auto remap = [] {
    std::array<std::array<std::array<double, kTerms>, kTerms>, 2> M{};
    const GaussRule& g = gauss16();
    for (int h = 0; h < 2; ++h)
      for (int q = 0; q < 16; ++q) {
        const double s = g.x[q];
        const auto Ls = legendre(s);
        const auto Lt = legendre(0.5 * (s + (2 * h - 1)));
        for (int i = 0; i < kTerms; ++i)
          for (int j = 0; j < kTerms; ++j) M[h][i][j] += 0.5 * (2 * j + 1) * g.w[q] * Lt[i] * Ls[j];
      }
    return M;
  }();
  const auto& Mx = remap[octant & 1];
  const auto& My = remap[(octant >> 1) & 1];
  const auto& Mz = remap[(octant >> 2) & 1];

  CoeffTensor a = parent, b;
  // Mode-by-mode contraction.
  for (int k = 0; k < kTerms; ++k)
    for (int j = 0; j < kTerms; ++j)
      for (int i2 = 0; i2 < kTerms; ++i2) {
        double s = 0.0;
        for (int i = 0; i < kTerms; ++i) s += Mx[i][i2] * a(i, j, k);
        b(i2, j, k) = s;
      }
  for (int k = 0; k < kTerms; ++k)
    for (int j2 = 0; j2 < kTerms; ++j2)
      for (int i = 0; i < kTerms; ++i) {
        double s = 0.0;
        for (int j = 0; j < kTerms; ++j) s += My[j][j2] * b(i, j, k);
        a(i, j2, k) = s;
      }
  for (int k2 = 0; k2 < kTerms; ++k2)
    for (int j = 0; j < kTerms; ++j)
      for (int i = 0; i < kTerms; ++i) {
        double s = 0.0;
        for (int k = 0; k < kTerms; ++k) s += Mz[k][k2] * a(i, j, k);
        b(i, j, k2) = s;
      }

  const Vec3 mid = parent.bounds.center();
  for (int ax = 0; ax < 3; ++ax) {
    const bool upper = (octant >> ax) & 1;
    b.bounds.lo[ax] = upper ? mid[ax] : parent.bounds.lo[ax];
    b.bounds.hi[ax] = upper ? parent.bounds.hi[ax] : mid[ax];
  }
  return b;
}

namespace {

struct WorkItem {
  CellKey key;
  std::vector<std::uint32_t> atoms;
};

enum class Verdict : std::uint8_t { Empty, Leaf, Forced, Split };

struct Outcome {
  Verdict verdict = Verdict::Empty;
  CoeffTensor tensor;
  double high_order = 0.0;
  std::array<bool, 8> child_skip{};
};

std::vector<std::uint32_t> filter_atoms(const std::vector<std::uint32_t>& parent,
                                        const GaussianField& field, const NeighborGrid& grid,
                                        const Box& box) {
  std::vector<std::uint32_t> out;
  out.reserve(parent.size());
  for (std::uint32_t i : parent) {
    const double rho = grid.influence_radius(i);
    if (box_distance2(box, field.atoms[i].center) <= rho * rho) out.push_back(i);
  }
  return out;
}

// One-dimensional projections depend only on (atom, axis, slab), so every cube
// in a slab shares them. Built per batch of work items before the parallel phase.
class SlabCache {
 public:
  SlabCache(const Octree& tree, const GaussianField& field, const NeighborGrid& grid,
            const std::array<std::vector<std::pair<double, std::uint32_t>>, 3>& sorted, double rho_max,
            const std::vector<WorkItem>& items, int workers)
      : tree_(tree), field_(field) {
    for (const WorkItem& w : items)
      if (!w.atoms.empty())
        for (int a = 0; a < 3; ++a) keys_.push_back(key(a, w.key.level, w.key.idx[a]));
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
    slabs_.resize(keys_.size());
    parallel_for(keys_.size(), workers, [&](std::size_t n) {
      const int axis = static_cast<int>(keys_[n] >> 62);
      const int level = static_cast<int>((keys_[n] >> 56) & 63);
      const auto idx = static_cast<std::int64_t>(keys_[n] & ((std::uint64_t{1} << 56) - 1));
      const std::int64_t span = tree_.span(level);
      const double lo = tree_.origin()[axis] + tree_.lattice_unit() * double(idx * span);
      const double hi = tree_.origin()[axis] + tree_.lattice_unit() * double((idx + 1) * span);
      const auto& list = sorted[axis];
      auto it = std::lower_bound(list.begin(), list.end(), std::make_pair(lo - rho_max, std::uint32_t{0}));
      Slab& slab = slabs_[n];
      for (; it != list.end() && it->first <= hi + rho_max; ++it) {
        const double x = it->first;
        const double d = std::max({lo - x, 0.0, x - hi});
        const double rho = grid.influence_radius(it->second);
        if (d * d <= rho * rho) slab.atoms.push_back(it->second);
      }
      std::sort(slab.atoms.begin(), slab.atoms.end());
      slab.coeffs.reserve(slab.atoms.size());
      for (std::uint32_t i : slab.atoms)
        slab.coeffs.push_back(project_axis(field_.atoms[i].center[axis], field_.decay, lo, hi));
    });
  }

  /// Same sum as assemble_tensor, with the per-axis factors looked up.
  CoeffTensor assemble(const WorkItem& item, const Box& box) const {
    CoeffTensor t;
    t.bounds = box;
    std::array<const Slab*, 3> slab{};
    std::array<std::size_t, 3> pos{};
    for (int a = 0; a < 3; ++a) slab[a] = &find(key(a, item.key.level, item.key.idx[a]));
    const double D = field_.decay;
    for (std::uint32_t i : item.atoms) {
      std::array<const AxisCoeffs*, 3> b{};
      for (int a = 0; a < 3; ++a) {
        while (slab[a]->atoms[pos[a]] < i) ++pos[a];
        b[a] = &slab[a]->coeffs[pos[a]];
      }
      const double r = field_.atoms[i].radius;
      const double w = std::exp(D * r * r);
      for (int k = 0; k < kTerms; ++k) {
        const double wk = w * b[2]->c[k];
        for (int j = 0; j < kTerms; ++j) {
          const double wjk = wk * b[1]->c[j];
          for (int m = 0; m < kTerms; ++m) t(m, j, k) += wjk * b[0]->c[m];
        }
      }
    }
    return t;
  }

 private:
  struct Slab {
    std::vector<std::uint32_t> atoms;
    std::vector<AxisCoeffs> coeffs;
  };
  static std::uint64_t key(int axis, int level, std::int64_t idx) {
    return (static_cast<std::uint64_t>(axis) << 62) | (static_cast<std::uint64_t>(level) << 56) |
           static_cast<std::uint64_t>(idx);
  }
  const Slab& find(std::uint64_t k) const {
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
    return slabs_[static_cast<std::size_t>(it - keys_.begin())];
  }

  const Octree& tree_;
  const GaussianField& field_;
  std::vector<std::uint64_t> keys_;
  std::vector<Slab> slabs_;
};

// |P - A_000| <= sum of the other |A_ijk| since |L_j| <= 1 on the cube.
bool trivially_excludes(const CoeffTensor& t, double c) {
  double rest = 0.0;
  for (std::size_t n = 1; n < t.a.size(); ++n) rest += std::abs(t.a[n]);
  return std::abs(t.a[0] - c) > rest * (1.0 + 1e-12);
}

// Corner values bracket c: the polynomial provably takes c somewhere on the cube.
bool corners_straddle(const CoeffTensor& t, double c) {
  bool above = false, below = false;
  for (int k = 0; k < 8; ++k) {
    const double v = eval_tensor(t, TrilinearCell::corner_position(k));
    above |= v >= c;
    below |= v <= c;
  }
  return above && below;
}

class Refiner {
 public:
  Refiner(Octree& tree, const GaussianField& field, const NeighborGrid& grid, const PartitionParams& p)
      : tree_(tree), field_(field), grid_(grid), p_(p) {
    for (std::uint32_t i = 0; i < field.atoms.size(); ++i) {
      for (int a = 0; a < 3; ++a) sorted_[a].emplace_back(field.atoms[i].center[a], i);
      rho_max_ = std::max(rho_max_, grid.influence_radius(i));
    }
    for (auto& v : sorted_) std::sort(v.begin(), v.end());
  }

  LeafSet run() {
    std::vector<WorkItem> frontier;
    const auto& d = tree_.dims();
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          CellKey k{0, {x, y, z}};
          frontier.push_back({k, grid_.atoms_touching(tree_.box(k))});
        }

    while (!frontier.empty()) {
      const SlabCache cache(tree_, field_, grid_, sorted_, rho_max_, frontier, p_.workers);
      std::vector<Outcome> out(frontier.size());
      parallel_for(frontier.size(), p_.workers,
                   [&](std::size_t n) { out[n] = evaluate(cache, frontier[n], /*allow_split=*/true); });

      std::vector<WorkItem> next;
      for (std::size_t n = 0; n < frontier.size(); ++n) {
        WorkItem& item = frontier[n];
        Outcome& o = out[n];
        if (o.verdict != Verdict::Empty) ++set_.cubes_evaluated;
        switch (o.verdict) {
          case Verdict::Empty:
            if (!item.atoms.empty()) ++set_.cubes_evaluated, ++set_.discarded;
            tree_.set(item.key, CellState::Empty);
            break;
          case Verdict::Leaf:
          case Verdict::Forced:
            add_leaf(item.key, o);
            break;
          case Verdict::Split:
            tree_.set(item.key, CellState::Internal);
            for (int c = 0; c < 8; ++c) {
              const CellKey ck = item.key.child(c);
              if (o.child_skip[c]) {
                tree_.set(ck, CellState::Empty);
                ++set_.prefiltered;
                continue;
              }
              next.push_back({ck, filter_atoms(item.atoms, field_, grid_, tree_.box(ck))});
            }
            break;
        }
      }
      frontier = std::move(next);
    }

    if (p_.balance) balance();

    std::sort(set_.leaves.begin(), set_.leaves.end(),
              [](const Leaf& a, const Leaf& b) { return a.key.packed() < b.key.packed(); });
    for (const Leaf& l : set_.leaves) set_.forced_leaves += l.forced ? 1 : 0;
    return std::move(set_);
  }

 private:
  Outcome evaluate(const SlabCache& cache, const WorkItem& item, bool allow_split) const {
    Outcome o;
    if (item.atoms.empty()) return o;
    const double c = field_.isovalue;
    o.tensor = cache.assemble(item, tree_.box(item.key));
    if (trivially_excludes(o.tensor, c) ||
        (!corners_straddle(o.tensor, c) && !cube_may_intersect(svd_split(o.tensor, p_.thresholds), c))) {
      o.verdict = Verdict::Empty;
      return o;
    }
    o.high_order = high_order_norm(o.tensor);
    const double limit = p_.tau * p_.tolerance_scale * c;
    if (!allow_split || (o.high_order <= limit && collapse_error_bound(o.tensor) <= limit)) {
      o.verdict = Verdict::Leaf;
      return o;
    }
    if (item.key.level >= tree_.max_depth()) {
      o.verdict = Verdict::Forced;
      return o;
    }
    o.verdict = Verdict::Split;
    if (p_.prefilter) {
      for (int k = 0; k < 8; ++k) {
        const CoeffTensor child = subdivide_tensor(o.tensor, k);
        if (corners_straddle(child, c)) continue;
        const Interval b = bound_tensor(svd_split(child, p_.thresholds));
        const double margin = std::max(b.lo - c, c - b.hi);
        o.child_skip[k] = margin > o.high_order;
      }
    }
    return o;
  }

  void add_leaf(const CellKey& key, const Outcome& o) {
    tree_.set(key, CellState::Surface);
    Leaf leaf;
    leaf.key = key;
    leaf.box = o.tensor.bounds;
    leaf.cell = collapse_trilinear(o.tensor);
    leaf.high_order = o.high_order;
    leaf.forced = o.verdict == Verdict::Forced;
    set_.leaves.push_back(std::move(leaf));
  }

  // Leaves (of either kind) more than one level coarser than some surface
  // leaf in its 26-neighbourhood.
  std::vector<CellKey> coarse_neighbors() const {
    std::vector<std::uint64_t> found;
    const auto ext = tree_.lattice_extent();
    for (const Leaf& leaf : set_.leaves) {
      const CellKey& k = leaf.key;
      const auto lo = tree_.lattice_lo(k);
      const std::int64_t s = tree_.span(k.level);
      for (int d = 0; d < 27; ++d) {
        if (d == 13) continue;
        std::array<std::int64_t, 3> p2{};
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
          const int o = (d / (a == 0 ? 1 : a == 1 ? 3 : 9)) % 3 - 1;
          p2[a] = o < 0 ? 2 * lo[a] - 1 : o > 0 ? 2 * (lo[a] + s) + 1 : 2 * lo[a] + s;
          inside = inside && p2[a] > 0 && p2[a] < 2 * ext[a];
        }
        if (!inside) continue;
        const auto n = tree_.leaf_at_doubled(p2);
        if (n && n->level < k.level - 1) found.push_back(n->packed());
      }
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    std::vector<CellKey> out;
    for (std::uint64_t f : found) out.push_back(CellKey::unpack(f));
    return out;
  }

  void balance() {
    for (;;) {
      const std::vector<CellKey> split = coarse_neighbors();
      if (split.empty()) break;

      std::vector<WorkItem> items;
      for (const CellKey& k : split) {
        const auto atoms = grid_.atoms_touching(tree_.box(k));
        for (int c = 0; c < 8; ++c) {
          const CellKey ck = k.child(c);
          items.push_back({ck, filter_atoms(atoms, field_, grid_, tree_.box(ck))});
        }
      }
      const SlabCache cache(tree_, field_, grid_, sorted_, rho_max_, items, p_.workers);
      std::vector<Outcome> out(items.size());
      parallel_for(items.size(), p_.workers,
                   [&](std::size_t n) { out[n] = evaluate(cache, items[n], /*allow_split=*/false); });

      // Remove the split parents, then append the children.
      std::vector<std::uint64_t> gone;
      for (const CellKey& k : split) {
        gone.push_back(k.packed());
        tree_.set(k, CellState::Internal);
      }
      std::sort(gone.begin(), gone.end());
      std::erase_if(set_.leaves, [&](const Leaf& l) {
        return std::binary_search(gone.begin(), gone.end(), l.key.packed());
      });
      set_.balance_splits += split.size();
      for (std::size_t n = 0; n < items.size(); ++n) {
        ++set_.cubes_evaluated;
        if (out[n].verdict == Verdict::Leaf) {
          add_leaf(items[n].key, out[n]);
        } else {
          if (!items[n].atoms.empty()) ++set_.discarded;
          tree_.set(items[n].key, CellState::Empty);
        }
      }
    }
  }

  Octree& tree_;
  const GaussianField& field_;
  const NeighborGrid& grid_;
  const PartitionParams& p_;
  LeafSet set_;
  std::array<std::vector<std::pair<double, std::uint32_t>>, 3> sorted_;
  double rho_max_ = 0.0;
};

}  // namespace

LeafSet refine(Octree& tree, const GaussianField& field, const NeighborGrid& grid,
               const PartitionParams& params) {
  if (!(params.tau > 0.0)) throw Error("tau must be positive");
  if (params.max_depth != tree.max_depth()) throw Error("max_depth differs from the octree's");
  return Refiner(tree, field, grid, params).run();
}

std::optional<std::size_t> LeafSet::find(const CellKey& k) const {
  const std::uint64_t p = k.packed();
  auto it = std::lower_bound(leaves.begin(), leaves.end(), p,
                             [](const Leaf& l, std::uint64_t v) { return l.key.packed() < v; });
  if (it == leaves.end() || it->key.packed() != p) return std::nullopt;
  return static_cast<std::size_t>(it - leaves.begin());
}

std::vector<std::size_t> LeafSet::face_adjacent(const Octree& tree, std::size_t i) const {
  std::vector<std::size_t> out;
  const CellKey& k = leaves[i].key;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      CellKey n = k;
      n.idx[axis] += side ? 1 : -1;
      const std::int64_t count = static_cast<std::int64_t>(tree.dims()[axis]) << k.level;
      if (n.idx[axis] < 0 || n.idx[axis] >= count) continue;
      // Same-size or coarser neighbour: walk up until a recorded cell.
      CellKey up = n;
      while (!tree.state(up) && up.level > 0) {
        up = CellKey{up.level - 1, {up.idx[0] >> 1, up.idx[1] >> 1, up.idx[2] >> 1}};
      }
      const auto st = tree.state(up);
      if (!st) continue;
      if (*st == CellState::Surface) {
        if (auto j = find(up)) out.push_back(*j);
        continue;
      }
      if (*st != CellState::Internal) continue;
      std::vector<CellKey> stack{up};
      while (!stack.empty()) {
        const CellKey c = stack.back();
        stack.pop_back();
        for (int o = 0; o < 8; ++o) {
          if (((o >> axis) & 1) != (side ? 0 : 1)) continue;
          const CellKey ch = c.child(o);
          const auto cs = tree.state(ch);
          if (!cs) continue;
          if (*cs == CellState::Internal)
            stack.push_back(ch);
          else if (*cs == CellState::Surface)
            if (auto j = find(ch)) out.push_back(*j);
        }
      }
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace gmsurf
