#include "gmsurf/cellcontour.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <unordered_map>

namespace gmsurf {

namespace {

// Monomial slot of x^i y^j z^k in TrilinearCell::mono.
constexpr int kMono[2][2][2] = {{{0, 3}, {2, 6}}, {{1, 5}, {4, 7}}};

int mono_index(int axis_exp_a, int exp_b, int exp_c, int axis) {
  std::array<int, 3> e{};
  e[axis] = axis_exp_a;
  e[(axis + 1) % 3] = exp_b;
  e[(axis + 2) % 3] = exp_c;
  return kMono[e[0]][e[1]][e[2]];
}

int corner_index(const std::array<int, 3>& bits) { return bits[0] + 2 * bits[1] + 4 * bits[2]; }

// Corner of face (axis, side) at frame position (iu, iv).
int face_corner(int axis, int side, int iu, int iv) {
  std::array<int, 3> b{};
  b[axis] = side;
  b[(axis + 1) % 3] = iu;
  b[(axis + 2) % 3] = iv;
  return corner_index(b);
}

double cross2(const UV& a, const UV& b) { return a[0] * b[1] - a[1] * b[0]; }
UV sub(const UV& a, const UV& b) { return {a[0] - b[0], a[1] - b[1]}; }

// Bilinear F(u,v) = b0 + b1 u + b2 v + b3 uv through the four corners.
std::array<double, 4> bilinear(const std::array<double, 4>& f) {
  return {0.25 * (f[0] + f[1] + f[2] + f[3]), 0.25 * (-f[0] + f[1] - f[2] + f[3]),
          0.25 * (-f[0] - f[1] + f[2] + f[3]), 0.25 * (f[0] - f[1] - f[2] + f[3])};
}

double eval_bilinear(const std::array<double, 4>& b, const UV& p) {
  return b[0] + b[1] * p[0] + b[2] * p[1] + b[3] * p[0] * p[1];
}

}  // namespace

// ---- Edges, folds, critical points ------------------------------------------

std::vector<FacePoint> edge_intersections(const TrilinearCell& cell, double c, std::uint64_t cell_id) {
  std::vector<FacePoint> out;
  for (int axis = 0; axis < 3; ++axis)
    for (int iu = 0; iu < 2; ++iu)
      for (int iv = 0; iv < 2; ++iv) {
        // Edge along `axis` at the given sides of the other two axes.
        const int c0 = face_corner(axis, 0, iu, iv), c1 = face_corner(axis, 1, iu, iv);
        const double f0 = cell.corner[c0] - c, f1 = cell.corner[c1] - c;
        if ((f0 >= 0) == (f1 >= 0)) continue;
        const double t = std::clamp(f0 / (f0 - f1), 1e-9, 1.0 - 1e-9);
        FacePoint p;
        p.local = TrilinearCell::corner_position(c0);
        p.local[axis] = -1.0 + 2.0 * t;
        p.world = cell.bounds.to_world(p.local);
        p.kind = PointKind::EdgeCrossing;
        p.key = {PointKind::EdgeCrossing, cell_id, static_cast<std::uint64_t>(axis * 4 + iu * 2 + iv)};
        p.face = 2 * ((axis + 1) % 3) + iu;  // one of the two faces containing the edge
        out.push_back(p);
      }
  return out;
}

Vec3 FoldSegment::point(double t) const {
  Vec3 p;
  p[axis] = t;
  p[(axis + 1) % 3] = beta;
  p[(axis + 2) % 3] = gamma;
  return p;
}

std::vector<FoldSegment> fold_segments(const TrilinearCell& cell, double c, int axis) {
  // g = A(beta, gamma) + t B(beta, gamma) along the axis; a fold is A = c, B = 0.
  const auto& m = cell.mono;
  const double p0 = m[mono_index(0, 0, 0, axis)] - c, p1 = m[mono_index(0, 1, 0, axis)],
               p2 = m[mono_index(0, 0, 1, axis)], p3 = m[mono_index(0, 1, 1, axis)];
  const double q0 = m[mono_index(1, 0, 0, axis)], q1 = m[mono_index(1, 1, 0, axis)],
               q2 = m[mono_index(1, 0, 1, axis)], q3 = m[mono_index(1, 1, 1, axis)];
  double scale = std::abs(c);
  for (double v : m) scale += std::abs(v);
  if (scale == 0.0) return {};

  // Eliminating beta leaves a quadratic in gamma.
  const double a2 = q2 * p3 - p2 * q3;
  const double a1 = q0 * p3 + q2 * p1 - p0 * q3 - p2 * q1;
  const double a0 = q0 * p1 - p0 * q1;
  const double tiny = 1e-14 * scale * scale;
  std::vector<double> roots;
  if (std::abs(a2) > tiny) {
    const double disc = a1 * a1 - 4 * a2 * a0;
    if (disc < 0) return {};
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (a1 + std::copysign(sq, a1));
    if (qq != 0.0) roots.push_back(qq / a2), roots.push_back(a0 / qq);
    else roots.push_back(0.0);
  } else if (std::abs(a1) > tiny) {
    roots.push_back(-a0 / a1);
  } else {
    return {};  // B vanishes identically or shares a factor with A - c
  }

  std::vector<FoldSegment> out;
  for (double g : roots) {
    if (!(g > -1.0 && g < 1.0)) continue;
    const double den_b = q1 + q3 * g, den_a = p1 + p3 * g;
    double b;
    if (std::abs(den_b) >= std::abs(den_a)) {
      if (den_b == 0.0) continue;
      b = -(q0 + q2 * g) / den_b;
    } else {
      b = -(p0 + p2 * g) / den_a;
    }
    if (!(b > -1.0 && b < 1.0)) continue;
    const double ra = p0 + p1 * b + p2 * g + p3 * b * g, rb = q0 + q1 * b + q2 * g + q3 * b * g;
    if (std::abs(ra) > 1e-9 * scale || std::abs(rb) > 1e-9 * scale) continue;
    bool dup = false;
    for (const FoldSegment& s : out) dup |= std::abs(s.beta - b) < 1e-12 && std::abs(s.gamma - g) < 1e-12;
    if (!dup) out.push_back({axis, 0, b, g});
  }
  std::sort(out.begin(), out.end(), [](const FoldSegment& x, const FoldSegment& y) {
    return x.beta != y.beta ? x.beta < y.beta : x.gamma < y.gamma;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = static_cast<int>(i);
  return out;
}

std::vector<FoldSegment> fold_segments(const TrilinearCell& cell, double c) {
  std::vector<FoldSegment> all;
  for (int axis = 0; axis < 3; ++axis) {
    const auto f = fold_segments(cell, c, axis);
    all.insert(all.end(), f.begin(), f.end());
  }
  return all;
}

std::vector<CriticalPoint> critical_points(const std::vector<FoldSegment>& folds) {
  constexpr double kTol = 1e-6;
  std::vector<CriticalPoint> out;
  for (std::size_t i = 0; i < folds.size(); ++i)
    for (std::size_t j = i + 1; j < folds.size(); ++j) {
      const FoldSegment &a = folds[i], &b = folds[j];
      if (a.axis == b.axis) continue;
      const int k = 3 - a.axis - b.axis;  // the axis both segments fix
      const Vec3 pa = a.point(0.0), pb = b.point(0.0);
      if (std::abs(pa[k] - pb[k]) > kTol) continue;
      Vec3 p;
      p[k] = 0.5 * (pa[k] + pb[k]);
      p[a.axis] = pb[a.axis];
      p[b.axis] = pa[b.axis];
      out.push_back({p, static_cast<int>(i), static_cast<int>(j)});
    }
  return out;
}

std::vector<Vec3> critical_points(const TrilinearCell& cell, double c) {
  std::vector<Vec3> out;
  for (const CriticalPoint& p : critical_points(fold_segments(cell, c))) out.push_back(p.local);
  return out;
}

VertexKey fold_end_key(std::uint64_t cell_id, const FoldSegment& s, int side) {
  return {PointKind::FoldEnd, cell_id, static_cast<std::uint64_t>(s.axis * 4 + s.index * 2 + side)};
}

VertexKey critical_key(std::uint64_t cell_id, std::size_t index) {
  return {PointKind::Critical, cell_id, static_cast<std::uint64_t>(index)};
}

// ---- Tile curves -------------------------------------------------------------

std::vector<Chain> tile_chains(const TileCurveInput& tile) {
  static constexpr UV kCorner[4] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
  // Corner pairs of the edges v=-1, u=+1, v=+1, u=-1.
  static constexpr int kEdge[4][2] = {{0, 1}, {1, 3}, {2, 3}, {0, 2}};
  const auto& f = tile.f;
  std::array<bool, 4> in{};
  for (int k = 0; k < 4; ++k) in[k] = f[k] >= 0.0;

  std::vector<int> crossing_edges;
  for (int e = 0; e < 4; ++e) {
    const bool differs = in[kEdge[e][0]] != in[kEdge[e][1]];
    if (differs != tile.crossings[e].has_value())
      throw Error("tile crossings disagree with corner signs");
    if (differs) crossing_edges.push_back(e);
  }
  if (crossing_edges.empty()) return {};

  // Each branch joins two edge crossings; `corner` is a corner it separates.
  struct Branch {
    int e0, e1, corner;
  };
  std::vector<Branch> branches;
  if (crossing_edges.size() == 2) {
    branches.push_back({crossing_edges[0], crossing_edges[1], -1});
  } else {
    if (f[0] * f[3] - f[1] * f[2] >= 0.0)
      branches = {{0, 1, 1}, {2, 3, 2}};  // around c10 and c01
    else
      branches = {{0, 3, 0}, {1, 2, 3}};  // around c00 and c11
  }

  const auto b = bilinear(f);
  std::vector<Chain> out;
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const Branch& br = branches[bi];
    ChainPoint A = *tile.crossings[br.e0], B = *tile.crossings[br.e1];
    const UV chord = sub(B.uv, A.uv);
    int k = br.corner;
    if (k < 0) {
      double best = -1.0;
      for (int q = 0; q < 4; ++q) {
        const double d = std::abs(cross2(chord, sub(kCorner[q], A.uv)));
        if (d > best) best = d, k = q;
      }
    }
    if ((cross2(chord, sub(kCorner[k], A.uv)) > 0.0) != in[k]) std::swap(A, B);

    // Extras on this branch, ordered along the chord.
    const UV dir = sub(B.uv, A.uv);
    std::vector<std::pair<double, ChainPoint>> mid;
    for (const ChainPoint& p : tile.extras) {
      if (branches.size() == 2 && b[3] != 0.0) {
        const double u_star = -b[2] / b[3];
        const bool right = p.uv[0] > u_star;
        const bool branch_right = kCorner[br.corner][0] > 0.0;
        if (right != branch_right) continue;
      }
      const UV d = sub(p.uv, A.uv);
      mid.emplace_back(d[0] * dir[0] + d[1] * dir[1], p);
    }
    std::stable_sort(mid.begin(), mid.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    Chain chain{A};
    for (auto& m : mid) chain.push_back(m.second);
    chain.push_back(B);

    // Split chords that bow away from the curve by more than the sagitta.
    Chain refined{chain.front()};
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      const UV& P = chain[i].uv;
      const UV& Q = chain[i + 1].uv;
      const UV d = sub(Q, P);
      const double len = std::hypot(d[0], d[1]);
      if (len > 1e-12) {
        const UV M{0.5 * (P[0] + Q[0]), 0.5 * (P[1] + Q[1])};
        const UV n{-d[1] / len, d[0] / len};
        // F(M + s n) = c0 + c1 s + c2 s^2
        const double c0 = eval_bilinear(b, M);
        const double c1 = b[1] * n[0] + b[2] * n[1] + b[3] * (M[0] * n[1] + M[1] * n[0]);
        const double c2 = b[3] * n[0] * n[1];
        double s = std::numeric_limits<double>::infinity();
        if (std::abs(c2) > 1e-14 * (std::abs(c1) + std::abs(c0))) {
          const double disc = c1 * c1 - 4 * c2 * c0;
          if (disc >= 0) {
            const double qq = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
            for (double r : {qq / c2, qq != 0.0 ? c0 / qq : 0.0})
              if (std::abs(r) < std::abs(s)) s = r;
          }
        } else if (c1 != 0.0) {
          s = -c0 / c1;
        }
        const UV S{M[0] + s * n[0], M[1] + s * n[1]};
        bool same_branch = true;
        if (branches.size() == 2 && b[3] != 0.0)
          same_branch = (S[0] > -b[2] / b[3]) == (kCorner[br.corner][0] > 0.0);
        if (std::isfinite(s) && std::abs(s) > tile.sagitta && same_branch && std::abs(S[0]) < 1.0 &&
            std::abs(S[1]) < 1.0) {
          ChainPoint cp;
          cp.uv = S;
          cp.world = tile.to_world(S);
          cp.key = tile.sample_base;
          cp.key.b |= (static_cast<std::uint64_t>(bi) << 40) | (static_cast<std::uint64_t>(i) << 44);
          refined.push_back(cp);
        }
      }
      refined.push_back(chain[i + 1]);
    }
    out.push_back(std::move(refined));
  }
  return out;
}

// ---- Patches ------------------------------------------------------------------

std::vector<Patch> split_patches(const CellGraphInput& in) {
  const TrilinearCell& g = in.cell;
  const Box& box = g.bounds;
  struct Vert {
    VertexKey key;
    Vec3 local, world, normal;
    std::uint8_t faces = 0;
  };
  std::vector<Vert> verts;
  std::unordered_map<VertexKey, int, VertexKeyHash> id;
  auto add = [&](const VertexKey& key, const Vec3& world, const Vec3& local) {
    const auto [it, fresh] = id.emplace(key, static_cast<int>(verts.size()));
    if (fresh) verts.push_back({key, local, world, Vec3::Zero(), 0});
    return it->second;
  };

  struct Half {
    int from, to;
  };
  std::vector<Half> half;
  std::vector<int> in_deg, out_deg;
  for (const auto& [face, chain] : in.boundary) {
    int prev = -1;
    for (const ChainPoint& p : chain) {
      const int v = add(p.key, p.world, box.to_local(p.world));
      verts[v].faces |= static_cast<std::uint8_t>(1u << face);
      if (prev >= 0) half.push_back({prev, v});
      prev = v;
    }
  }
  in_deg.assign(verts.size(), 0);
  out_deg.assign(verts.size(), 0);
  for (const Half& h : half) ++out_deg[h.from], ++in_deg[h.to];
  for (std::size_t v = 0; v < verts.size(); ++v)
    if (in_deg[v] != 1 || out_deg[v] != 1) throw TopologyError(in.cell_id, "open face curve");

  std::vector<int> crit_ids;
  for (std::size_t i = 0; i < in.criticals.size(); ++i)
    crit_ids.push_back(add(critical_key(in.cell_id, i), box.to_world(in.criticals[i].local), in.criticals[i].local));
  for (std::size_t fi = 0; fi < in.folds.size(); ++fi) {
    const FoldSegment& s = in.folds[fi];
    std::vector<std::pair<double, int>> stops;
    for (int side = 0; side < 2; ++side) {
      VertexKey key = fold_end_key(in.cell_id, s, side);
      if (const auto a = in.aliases.find(key); a != in.aliases.end()) key = a->second;
      const auto it = id.find(key);
      if (it == id.end()) throw TopologyError(in.cell_id, "fold end missing from face curve");
      stops.emplace_back(side ? 1.0 : -1.0, it->second);
    }
    for (std::size_t ci = 0; ci < in.criticals.size(); ++ci) {
      const CriticalPoint& cp = in.criticals[ci];
      if (cp.fold_a == static_cast<int>(fi) || cp.fold_b == static_cast<int>(fi))
        stops.emplace_back(cp.local[s.axis], crit_ids[ci]);
    }
    std::sort(stops.begin(), stops.end());
    for (std::size_t k = 0; k + 1 < stops.size(); ++k) {
      half.push_back({stops[k].second, stops[k + 1].second});
      half.push_back({stops[k + 1].second, stops[k].second});
    }
  }

  // Tangent-plane angle of every half-edge at its origin.
  std::vector<std::array<Vec3, 2>> frame(verts.size());
  for (std::size_t v = 0; v < verts.size(); ++v) {
    const Vec3 n = -g.gradient(verts[v].local);
    const double len = n.norm();
    if (!(len > 1e-300)) throw TopologyError(in.cell_id, "vanishing gradient on the surface");
    verts[v].normal = n / len;
    int k = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(verts[v].normal[a]) < std::abs(verts[v].normal[k])) k = a;
    const Vec3 e1 = verts[v].normal.cross(Vec3::Unit(k)).normalized();
    frame[v] = {e1, verts[v].normal.cross(e1)};
  }
  auto angle = [&](int v, int w) {
    const Vec3 d = verts[w].local - verts[v].local;
    return std::atan2(d.dot(frame[v][1]), d.dot(frame[v][0]));
  };
  std::vector<std::vector<int>> out(verts.size());
  std::vector<double> ang(half.size());
  for (std::size_t h = 0; h < half.size(); ++h) {
    out[half[h].from].push_back(static_cast<int>(h));
    ang[h] = angle(half[h].from, half[h].to);
  }

  // Walk faces: at each vertex leave by the first edge clockwise from the
  // way we came in, which keeps the face on the left.
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<char> used(half.size(), 0);
  std::vector<Patch> patches;
  for (std::size_t h0 = 0; h0 < half.size(); ++h0) {
    if (used[h0]) continue;
    std::vector<int> cycle;
    std::size_t h = h0;
    for (std::size_t steps = 0;; ++steps) {
      if (steps > half.size() || used[h]) throw TopologyError(in.cell_id, "face walk does not close");
      used[h] = 1;
      cycle.push_back(half[h].from);
      const int v = half[h].to;
      const double ref = angle(v, half[h].from);
      int best = -1;
      double best_cw = std::numeric_limits<double>::infinity();
      for (int e : out[v]) {
        double cw = std::fmod(ref - ang[e], kTwoPi);
        if (cw <= 0.0) cw += kTwoPi;
        if (half[e].to == half[h].from) cw = kTwoPi + 1.0;  // going straight back
        if (cw < best_cw) best_cw = cw, best = e;
      }
      if (best < 0) throw TopologyError(in.cell_id, "dead end in face walk");
      h = static_cast<std::size_t>(best);
      if (h == h0) break;
    }
    if (cycle.size() < 3) throw TopologyError(in.cell_id, "degenerate patch");

    Patch p;
    Vec3 newell = Vec3::Zero(), nsum = Vec3::Zero();
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      const Vert& a = verts[cycle[i]];
      const Vec3& b = verts[cycle[(i + 1) % cycle.size()]].local;
      newell += a.local.cross(b);
      nsum += a.normal;
      p.keys.push_back(a.key);
      p.local.push_back(a.local);
      p.world.push_back(a.world);
      p.normal.push_back(a.normal);
      p.faces.push_back(a.faces);
    }
    if (newell.dot(nsum) < 0.0) throw TopologyError(in.cell_id, "patch boundary runs clockwise (annulus)");
    patches.push_back(std::move(p));
  }
  return patches;
}

std::vector<std::array<int, 3>> triangulate_patch(const Patch& patch, std::uint64_t cell_id) {
  const int n = static_cast<int>(patch.local.size());
  if (n < 3) throw TopologyError(cell_id, "patch with fewer than three points");

  // Project along the octant diagonal matching the normals.
  Vec3 nsum = Vec3::Zero();
  for (const Vec3& v : patch.normal) nsum += v;
  Vec3 d(nsum.x() >= 0 ? 1.0 : -1.0, nsum.y() >= 0 ? 1.0 : -1.0, nsum.z() >= 0 ? 1.0 : -1.0);
  d.normalize();
  int k = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(d[a]) < std::abs(d[k])) k = a;
  const Vec3 e1 = d.cross(Vec3::Unit(k)).normalized();
  const Vec3 e2 = d.cross(e1);
  std::vector<UV> p(n);
  double lo_u = 1e300, hi_u = -1e300;
  for (int i = 0; i < n; ++i) {
    p[i] = {patch.local[i].dot(e1), patch.local[i].dot(e2)};
    lo_u = std::min({lo_u, p[i][0], p[i][1]});
    hi_u = std::max({hi_u, p[i][0], p[i][1]});
  }
  const double eps = 1e-14 * (hi_u - lo_u) * (hi_u - lo_u);

  auto min_angle = [&](int a, int b, int c) {
    const Vec3 &A = patch.local[a], &B = patch.local[b], &C = patch.local[c];
    auto ang = [](const Vec3& u, const Vec3& v) {
      const double nu = u.norm(), nv = v.norm();
      if (nu == 0.0 || nv == 0.0) return 0.0;
      return std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
    };
    return std::min({ang(B - A, C - A), ang(A - B, C - B), ang(A - C, B - C)});
  };
  auto inside = [&](const UV& q, int a, int b, int c) {
    const double d1 = cross2(sub(p[b], p[a]), sub(q, p[a]));
    const double d2 = cross2(sub(p[c], p[b]), sub(q, p[b]));
    const double d3 = cross2(sub(p[a], p[c]), sub(q, p[c]));
    return d1 >= -eps && d2 >= -eps && d3 >= -eps;
  };

  // Optimal triangulation over the polygon's diagonals: triangles lying flat
  // in a cube face cost far more than anything else, then prefer fat ones.
  auto left = [&](int a, int b, int c) { return cross2(sub(p[b], p[a]), sub(p[c], p[a])) > eps; };
  auto left_on = [&](int a, int b, int c) { return cross2(sub(p[b], p[a]), sub(p[c], p[a])) >= -eps; };
  auto proper_cross = [&](int a, int b, int c, int d) {
    const double d1 = cross2(sub(p[b], p[a]), sub(p[c], p[a])), d2 = cross2(sub(p[b], p[a]), sub(p[d], p[a]));
    const double d3 = cross2(sub(p[d], p[c]), sub(p[a], p[c])), d4 = cross2(sub(p[d], p[c]), sub(p[b], p[c]));
    return ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps));
  };
  auto diagonal = [&](int a, int b) {
    if ((a + 1) % n == b || (b + 1) % n == a) return true;
    const int a0 = (a + n - 1) % n, a1 = (a + 1) % n;
    const bool in_cone = left_on(a, a1, a0) ? (left(a, b, a0) && left(b, a, a1))
                                             : !(left_on(a, b, a1) && left_on(b, a, a0));
    if (!in_cone) return false;
    for (int e = 0; e < n; ++e) {
      const int f = (e + 1) % n;
      if (e == a || e == b || f == a || f == b) continue;
      if (proper_cross(a, b, e, f)) return false;
      // a polygon vertex sitting on the diagonal also rules it out
      if (std::abs(cross2(sub(p[b], p[a]), sub(p[e], p[a]))) <= eps) {
        const UV d = sub(p[b], p[a]);
        const double t = (d[0] * (p[e][0] - p[a][0]) + d[1] * (p[e][1] - p[a][1])) / (d[0] * d[0] + d[1] * d[1]);
        if (t > 0.0 && t < 1.0) return false;
      }
    }
    return true;
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(n) * n, kInf);
  std::vector<int> pick(static_cast<std::size_t>(n) * n, -1);
  std::vector<signed char> diag(static_cast<std::size_t>(n) * n, -1);
  auto is_diag = [&](int a, int b) {
    signed char& d = diag[static_cast<std::size_t>(a) * n + b];
    if (d < 0) d = diagonal(a, b) ? 1 : 0;
    return d == 1;
  };
  auto at = [&](int i, int j) -> double& { return cost[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i + 1 < n; ++i) at(i, i + 1) = 0.0;
  for (int len = 2; len < n; ++len)
    for (int i = 0; i + len < n; ++i) {
      const int j = i + len;
      if (!is_diag(i, j)) continue;
      for (int k = i + 1; k < j; ++k) {
        if (!std::isfinite(at(i, k)) || !std::isfinite(at(k, j)) || !left(i, k, j)) continue;
        double t = -min_angle(i, k, j);
        if (patch.faces[i] & patch.faces[k] & patch.faces[j]) t += 1000.0;
        const double total = at(i, k) + at(k, j) + t;
        if (total < at(i, j)) at(i, j) = total, pick[static_cast<std::size_t>(i) * n + j] = k;
      }
    }
  std::vector<std::array<int, 3>> tris;
  if (std::isfinite(at(0, n - 1))) {
    std::vector<std::pair<int, int>> stack{{0, n - 1}};
    while (!stack.empty()) {
      const auto [i, j] = stack.back();
      stack.pop_back();
      if (j - i < 2) continue;
      const int k = pick[static_cast<std::size_t>(i) * n + j];
      tris.push_back({i, k, j});
      stack.push_back({i, k});
      stack.push_back({k, j});
    }
    return tris;
  }

  // The projection is not a simple polygon: clip ears, taking the most
  // convex corner when no clean ear exists.
  std::vector<int> poly(n);
  for (int i = 0; i < n; ++i) poly[i] = i;
  while (poly.size() > 3) {
    const int m = static_cast<int>(poly.size());
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    int fallback = 0;
    double fallback_cross = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const int a = poly[(i + m - 1) % m], b = poly[i], c = poly[(i + 1) % m];
      const double cr = cross2(sub(p[b], p[a]), sub(p[c], p[b]));
      if (cr > fallback_cross) fallback_cross = cr, fallback = i;
      if (cr <= eps) continue;
      bool blocked = false;
      for (int j = 0; j < m && !blocked; ++j) {
        const int q = poly[j];
        if (q == a || q == b || q == c) continue;
        if (p[q] == p[a] || p[q] == p[b] || p[q] == p[c]) continue;
        blocked = inside(p[q], a, b, c);
      }
      if (blocked) continue;
      double score = min_angle(a, b, c);
      if (patch.faces[a] & patch.faces[b] & patch.faces[c]) score -= 10.0;
      if (score > best_score) best_score = score, best = i;
    }
    if (best < 0) best = fallback;
    tris.push_back({poly[(best + m - 1) % m], poly[best], poly[(best + 1) % m]});
    poly.erase(poly.begin() + best);
  }
  tris.push_back({poly[0], poly[1], poly[2]});
  return tris;
}

CellOutput contour_cell(const CellGraphInput& in) {
  CellOutput out;
  out.cell = in.cell_id;
  std::unordered_map<VertexKey, std::uint32_t, VertexKeyHash> index;
  for (const Patch& patch : split_patches(in)) {
    std::vector<std::uint32_t> local(patch.keys.size());
    for (std::size_t i = 0; i < patch.keys.size(); ++i) {
      const auto [it, fresh] = index.emplace(patch.keys[i], static_cast<std::uint32_t>(out.keys.size()));
      if (fresh) {
        out.keys.push_back(patch.keys[i]);
        out.positions.push_back(patch.world[i]);
      }
      local[i] = it->second;
    }
    for (const auto& t : triangulate_patch(patch, in.cell_id))
      out.triangles.push_back({local[t[0]], local[t[1]], local[t[2]]});
  }
  return out;
}

// ---- Isolated cube -------------------------------------------------------------

CellGraphInput isolated_cell_input(const TrilinearCell& cell, double c, std::uint64_t cell_id, double sagitta) {
  CellGraphInput in;
  in.cell_id = cell_id;
  in.cell = cell;
  in.c = c;
  if ((cell.bounds.hi - cell.bounds.lo).minCoeff() <= 0.0) in.cell.bounds = Box{Vec3::Constant(-1), Vec3::Constant(1)};
  const Box& box = in.cell.bounds;
  in.folds = fold_segments(cell, c);
  in.criticals = critical_points(in.folds);

  std::map<std::uint64_t, FacePoint> crossing;
  for (const FacePoint& p : edge_intersections(in.cell, c, cell_id)) crossing.emplace(p.key.b, p);

  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      const int face = 2 * axis + side, ua = (axis + 1) % 3, va = (axis + 2) % 3;
      auto uv_of = [&](const Vec3& q) { return UV{q[ua], q[va]}; };
      TileCurveInput t;
      for (int iv = 0; iv < 2; ++iv)
        for (int iu = 0; iu < 2; ++iu) t.f[iu + 2 * iv] = cell.corner[face_corner(axis, side, iu, iv)] - c;
      // Tile edges v=-1, u=+1, v=+1, u=-1 as (edge axis, u bit, v bit).
      const std::array<std::array<int, 3>, 4> edges{{{ua, 0, 0}, {va, 1, 0}, {ua, 0, 1}, {va, 0, 0}}};
      for (int e = 0; e < 4; ++e) {
        std::array<int, 3> bits{};
        bits[axis] = side;
        bits[ua] = edges[e][1];
        bits[va] = edges[e][2];
        const int ea = edges[e][0];
        const std::uint64_t eid = static_cast<std::uint64_t>(ea * 4 + bits[(ea + 1) % 3] * 2 + bits[(ea + 2) % 3]);
        const auto it = crossing.find(eid);
        if (it != crossing.end()) t.crossings[e] = ChainPoint{it->second.key, it->second.world, uv_of(it->second.local)};
      }
      for (const FoldSegment& s : in.folds)
        if (s.axis == axis) t.extras.push_back({fold_end_key(cell_id, s, side), box.to_world(s.end(side)), {s.beta, s.gamma}});
      t.to_world = [&box, axis, side, ua, va](const UV& q) {
        Vec3 l;
        l[axis] = side ? 1.0 : -1.0;
        l[ua] = q[0];
        l[va] = q[1];
        return box.to_world(l);
      };
      t.sample_base = {PointKind::CurveSample, cell_id, static_cast<std::uint64_t>(face)};
      t.sagitta = sagitta;
      for (Chain& ch : tile_chains(t)) {
        if (side) std::reverse(ch.begin(), ch.end());
        in.boundary.emplace_back(face, std::move(ch));
      }
    }
  return in;
}

std::vector<std::vector<FacePoint>> trace_face_loops(const TrilinearCell& cell, double c, std::uint64_t cell_id) {
  const CellGraphInput in = isolated_cell_input(cell, c, cell_id);
  const auto& chains = in.boundary;
  std::unordered_map<VertexKey, std::size_t, VertexKeyHash> starts;
  for (std::size_t i = 0; i < chains.size(); ++i) starts.emplace(chains[i].second.front().key, i);
  std::vector<char> used(chains.size(), 0);
  std::vector<std::vector<FacePoint>> loops;
  for (std::size_t i0 = 0; i0 < chains.size(); ++i0) {
    if (used[i0]) continue;
    std::vector<FacePoint> loop;
    for (std::size_t i = i0; !used[i];) {
      used[i] = 1;
      const auto& [face, chain] = chains[i];
      for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        FacePoint fp;
        fp.face = face;
        fp.uv = chain[k].uv;
        fp.world = chain[k].world;
        fp.local = in.cell.bounds.to_local(fp.world);
        fp.kind = chain[k].key.kind;
        fp.key = chain[k].key;
        loop.push_back(fp);
      }
      const auto it = starts.find(chain.back().key);
      if (it == starts.end()) throw TopologyError(cell_id, "open face curve");
      i = it->second;
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace gmsurf
