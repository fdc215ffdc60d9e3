#include "gmsurf/meshkit.hpp"

#include "gmsurf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace gmsurf {

namespace {

// ---- Exact arithmetic on floating-point expansions ----------------------------

using Expansion = std::vector<double>;

inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double bv = s - a, av = s - bv;
  e = (a - av) + (b - bv);
}

Expansion grow(const Expansion& e, double b) {
  Expansion h;
  h.reserve(e.size() + 1);
  double q = b;
  for (double x : e) {
    double err;
    two_sum(q, x, q, err);
    if (err != 0.0) h.push_back(err);
  }
  if (q != 0.0 || h.empty()) h.push_back(q);
  return h;
}

Expansion add(Expansion a, const Expansion& b) {
  for (double x : b) a = grow(a, x);
  return a;
}

Expansion scale(const Expansion& e, double b) {
  Expansion r;
  for (double x : e) {
    const double p = x * b;
    r = grow(r, std::fma(x, b, -p));
    r = grow(r, p);
  }
  return r;
}

Expansion mul(const Expansion& a, const Expansion& b) {
  Expansion r;
  for (double y : b) r = add(r, scale(a, y));
  return r;
}

Expansion diff(double a, double b) {
  double s, e;
  two_sum(a, -b, s, e);
  return e != 0.0 ? Expansion{e, s} : Expansion{s};
}

Expansion negate(Expansion e) {
  for (double& x : e) x = -x;
  return e;
}

int sign_of(const Expansion& e) {
  for (auto it = e.rbegin(); it != e.rend(); ++it)
    if (*it != 0.0) return *it > 0.0 ? 1 : -1;
  return 0;
}

int orient2d(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c) {
  const double l = (a[0] - c[0]) * (b[1] - c[1]), r = (a[1] - c[1]) * (b[0] - c[0]);
  const double det = l - r;
  const double bound = 3.3306690738754716e-16 * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const Expansion x = mul(diff(a[0], c[0]), diff(b[1], c[1]));
  const Expansion y = mul(diff(a[1], c[1]), diff(b[0], c[0]));
  return sign_of(add(x, negate(y)));
}

// ---- Triangle-triangle ------------------------------------------------------------

bool segment_hits_triangle(const Vec3& s0, const Vec3& s1, const Vec3& a, const Vec3& b, const Vec3& c) {
  const int o0 = orient3d(a, b, c, s0), o1 = orient3d(a, b, c, s1);
  if (o0 == 0 && o1 == 0) return false;  // lies in the plane; the coplanar edges are caught elsewhere
  if (o0 * o1 > 0) return false;
  const int e0 = orient3d(s0, s1, a, b), e1 = orient3d(s0, s1, b, c), e2 = orient3d(s0, s1, c, a);
  return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

using P2 = std::array<double, 2>;

bool on_segment(const P2& p, const P2& a, const P2& b) {
  return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) && std::min(a[1], b[1]) <= p[1] &&
         p[1] <= std::max(a[1], b[1]);
}

bool segments_meet(const P2& a, const P2& b, const P2& c, const P2& d) {
  const int o1 = orient2d(a, b, c), o2 = orient2d(a, b, d), o3 = orient2d(c, d, a), o4 = orient2d(c, d, b);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  return (o1 == 0 && on_segment(c, a, b)) || (o2 == 0 && on_segment(d, a, b)) || (o3 == 0 && on_segment(a, c, d)) ||
         (o4 == 0 && on_segment(b, c, d));
}

bool inside_2d(const P2& p, const P2& a, const P2& b, const P2& c) {
  const int o1 = orient2d(a, b, p), o2 = orient2d(b, c, p), o3 = orient2d(c, a, p);
  return (o1 >= 0 && o2 >= 0 && o3 >= 0) || (o1 <= 0 && o2 <= 0 && o3 <= 0);
}

bool coplanar_overlap(const std::array<Vec3, 3>& A, const std::array<Vec3, 3>& B) {
  Vec3 n = (A[1] - A[0]).cross(A[2] - A[0]);
  if (n.squaredNorm() == 0.0) n = (B[1] - B[0]).cross(B[2] - B[0]);
  int drop = 0;
  for (int k = 1; k < 3; ++k)
    if (std::abs(n[k]) > std::abs(n[drop])) drop = k;
  const int i = (drop + 1) % 3, j = (drop + 2) % 3;
  std::array<P2, 3> a, b;
  for (int k = 0; k < 3; ++k) a[k] = {A[k][i], A[k][j]}, b[k] = {B[k][i], B[k][j]};
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      if (segments_meet(a[p], a[(p + 1) % 3], b[q], b[(q + 1) % 3])) return true;
  return inside_2d(a[0], b[0], b[1], b[2]) || inside_2d(b[0], a[0], a[1], a[2]);
}

struct Aabb {
  Vec3 lo, hi;
};

Aabb bounds_of(const TriangleMesh& m, std::size_t t) {
  const auto& tr = m.triangles[t];
  Aabb b{m.vertices[tr[0]], m.vertices[tr[0]]};
  for (int k = 1; k < 3; ++k) {
    b.lo = b.lo.cwiseMin(m.vertices[tr[k]]);
    b.hi = b.hi.cwiseMax(m.vertices[tr[k]]);
  }
  return b;
}

struct EdgeUse {
  std::uint32_t lo, hi;
  bool forward;  // lo -> hi in the triangle
  std::uint32_t tri;
};

std::vector<EdgeUse> edge_uses(const TriangleMesh& m) {
  std::vector<EdgeUse> e;
  e.reserve(3 * m.triangles.size());
  for (std::uint32_t t = 0; t < m.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = m.triangles[t][k], b = m.triangles[t][(k + 1) % 3];
      e.push_back({std::min(a, b), std::max(a, b), a < b, t});
    }
  std::sort(e.begin(), e.end(), [](const EdgeUse& x, const EdgeUse& y) {
    return x.lo != y.lo ? x.lo < y.lo : x.hi != y.hi ? x.hi < y.hi : x.tri < y.tri;
  });
  return e;
}

std::size_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double adx = a.x() - d.x(), bdx = b.x() - d.x(), cdx = c.x() - d.x();
  const double ady = a.y() - d.y(), bdy = b.y() - d.y(), cdy = c.y() - d.y();
  const double adz = a.z() - d.z(), bdz = b.z() - d.z(), cdz = c.z() - d.z();
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy, cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double det = adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy) + cdz * (adxbdy - bdxady);
  const double perm = (std::abs(bdxcdy) + std::abs(cdxbdy)) * std::abs(adz) +
                      (std::abs(cdxady) + std::abs(adxcdy)) * std::abs(bdz) +
                      (std::abs(adxbdy) + std::abs(bdxady)) * std::abs(cdz);
  const double bound = 7.7715611723761027e-16 * perm;
  if (det > bound) return 1;
  if (-det > bound) return -1;

  const Expansion ex = diff(a.x(), d.x()), bx = diff(b.x(), d.x()), cx = diff(c.x(), d.x());
  const Expansion ey = diff(a.y(), d.y()), by = diff(b.y(), d.y()), cy = diff(c.y(), d.y());
  const Expansion ez = diff(a.z(), d.z()), bz = diff(b.z(), d.z()), cz = diff(c.z(), d.z());
  const Expansion t1 = mul(ez, add(mul(bx, cy), negate(mul(cx, by))));
  const Expansion t2 = mul(bz, add(mul(cx, ey), negate(mul(ex, cy))));
  const Expansion t3 = mul(cz, add(mul(ex, by), negate(mul(bx, ey))));
  return sign_of(add(add(t1, t2), t3));
}

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0, const Vec3& b1,
                         const Vec3& b2) {
  const int da0 = orient3d(b0, b1, b2, a0), da1 = orient3d(b0, b1, b2, a1), da2 = orient3d(b0, b1, b2, a2);
  if ((da0 > 0 && da1 > 0 && da2 > 0) || (da0 < 0 && da1 < 0 && da2 < 0)) return false;
  const int db0 = orient3d(a0, a1, a2, b0), db1 = orient3d(a0, a1, a2, b1), db2 = orient3d(a0, a1, a2, b2);
  if ((db0 > 0 && db1 > 0 && db2 > 0) || (db0 < 0 && db1 < 0 && db2 < 0)) return false;
  if (da0 == 0 && da1 == 0 && da2 == 0) return coplanar_overlap({a0, a1, a2}, {b0, b1, b2});
  return segment_hits_triangle(a0, a1, b0, b1, b2) || segment_hits_triangle(a1, a2, b0, b1, b2) ||
         segment_hits_triangle(a2, a0, b0, b1, b2) || segment_hits_triangle(b0, b1, a0, a1, a2) ||
         segment_hits_triangle(b1, b2, a0, a1, a2) || segment_hits_triangle(b2, b0, a0, a1, a2);
}

TriangleMesh weld(const std::vector<CellOutput>& cells) {
  TriangleMesh m;
  std::unordered_map<VertexKey, std::uint32_t, VertexKeyHash> id;
  std::unordered_map<std::uint64_t, std::uint64_t> directed;  // (a,b) -> cell
  for (const CellOutput& c : cells) {
    std::vector<std::uint32_t> local(c.keys.size());
    for (std::size_t i = 0; i < c.keys.size(); ++i) {
      const auto [it, fresh] = id.emplace(c.keys[i], static_cast<std::uint32_t>(m.vertices.size()));
      if (fresh) m.vertices.push_back(c.positions[i]);
      local[i] = it->second;
    }
    for (const auto& t : c.triangles) {
      const std::array<std::uint32_t, 3> g{local[t[0]], local[t[1]], local[t[2]]};
      for (int k = 0; k < 3; ++k) {
        const std::uint64_t e = (static_cast<std::uint64_t>(g[k]) << 32) | g[(k + 1) % 3];
        const auto [it, fresh] = directed.emplace(e, c.cell);
        if (!fresh) throw WeldError(it->second, c.cell);
      }
      m.triangles.push_back(g);
    }
  }
  return m;
}

MeshReport check_manifold(const TriangleMesh& m) {
  MeshReport r;
  r.vertices = m.vertices.size();
  r.triangles = m.triangles.size();
  const auto uses = edge_uses(m);
  std::size_t edges = 0;
  for (std::size_t i = 0; i < uses.size();) {
    std::size_t j = i;
    int fwd = 0;
    while (j < uses.size() && uses[j].lo == uses[i].lo && uses[j].hi == uses[i].hi) fwd += uses[j++].forward;
    const std::size_t deg = j - i;
    ++edges;
    if (deg != 2) ++r.non_manifold_edges;
    if (deg == 1) ++r.boundary_edges;
    if (deg == 2 && fwd != 1) ++r.orientation_conflicts;
    i = j;
  }

  // Vertex fans: the link edges (a -> b) of all incident triangles must form one cycle.
  std::vector<std::uint32_t> start(m.vertices.size() + 1, 0);
  for (const auto& t : m.triangles)
    for (auto v : t) ++start[v + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<std::uint32_t> inc(start.back()), fill(start.begin(), start.end() - 1);
  for (std::uint32_t t = 0; t < m.triangles.size(); ++t)
    for (auto v : m.triangles[t]) inc[fill[v]++] = t;
  for (std::uint32_t v = 0; v < m.vertices.size(); ++v) {
    const std::uint32_t n = start[v + 1] - start[v];
    if (n == 0) continue;
    std::unordered_map<std::uint32_t, std::uint32_t> next;
    std::unordered_map<std::uint32_t, int> in_count;
    bool ok = true;
    for (std::uint32_t k = start[v]; k < start[v + 1] && ok; ++k) {
      const auto& t = m.triangles[inc[k]];
      const int at = t[0] == v ? 0 : t[1] == v ? 1 : 2;
      const std::uint32_t a = t[(at + 1) % 3], b = t[(at + 2) % 3];
      ok = next.emplace(a, b).second && ++in_count[b] == 1;
    }
    if (ok) {
      std::uint32_t x = next.begin()->first, steps = 0;
      do {
        const auto it = next.find(x);
        if (it == next.end()) {
          ok = false;
          break;
        }
        x = it->second;
        ++steps;
      } while (x != next.begin()->first && steps <= n);
      ok = ok && steps == n;
    }
    if (!ok) ++r.non_manifold_vertices;
  }

  std::vector<std::uint32_t> parent(m.vertices.size());
  std::iota(parent.begin(), parent.end(), 0u);
  for (const auto& t : m.triangles)
    for (int k = 1; k < 3; ++k) {
      const auto a = find_root(parent, t[0]), b = find_root(parent, t[k]);
      if (a != b) parent[a] = static_cast<std::uint32_t>(b);
    }
  std::vector<char> used(m.vertices.size(), 0);
  for (const auto& t : m.triangles)
    for (auto v : t) used[v] = 1;
  std::size_t referenced = 0;
  for (std::uint32_t v = 0; v < m.vertices.size(); ++v) {
    referenced += used[v];
    if (used[v] && find_root(parent, v) == v) ++r.components;
  }
  r.euler_characteristic = static_cast<long>(referenced) - static_cast<long>(edges) + static_cast<long>(m.triangles.size());
  return r;
}

std::size_t check_intersections(const TriangleMesh& m, int workers) {
  const std::size_t n = m.triangles.size();
  if (n < 2) return 0;
  std::vector<Aabb> box(n);
  Vec3 lo = Vec3::Constant(1e300);
  double edge_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    box[t] = bounds_of(m, t);
    lo = lo.cwiseMin(box[t].lo);
    edge_sum += (box[t].hi - box[t].lo).maxCoeff();
  }
  const double h = std::max(2.0 * edge_sum / static_cast<double>(n), 1e-12);
  auto cell = [&](const Vec3& p, int a) { return static_cast<std::int64_t>(std::floor((p[a] - lo[a]) / h)); };
  auto pack = [](std::int64_t x, std::int64_t y, std::int64_t z) {
    return static_cast<std::uint64_t>(x) | (static_cast<std::uint64_t>(y) << 21) | (static_cast<std::uint64_t>(z) << 42);
  };
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
  for (std::uint32_t t = 0; t < n; ++t)
    for (std::int64_t z = cell(box[t].lo, 2); z <= cell(box[t].hi, 2); ++z)
      for (std::int64_t y = cell(box[t].lo, 1); y <= cell(box[t].hi, 1); ++y)
        for (std::int64_t x = cell(box[t].lo, 0); x <= cell(box[t].hi, 0); ++x) buckets[pack(x, y, z)].push_back(t);

  std::vector<std::uint32_t> hits(n, 0);
  parallel_for(n, workers, [&](std::size_t i) {
    std::vector<std::uint32_t> cand;
    for (std::int64_t z = cell(box[i].lo, 2); z <= cell(box[i].hi, 2); ++z)
      for (std::int64_t y = cell(box[i].lo, 1); y <= cell(box[i].hi, 1); ++y)
        for (std::int64_t x = cell(box[i].lo, 0); x <= cell(box[i].hi, 0); ++x) {
          const auto it = buckets.find(pack(x, y, z));
          for (std::uint32_t j : it->second)
            if (j > i) cand.push_back(j);
        }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    const auto& a = m.triangles[i];
    for (std::uint32_t j : cand) {
      const auto& b = m.triangles[j];
      bool shared = false;
      for (auto u : a)
        for (auto v : b) shared = shared || u == v;
      if (shared) continue;
      if ((box[i].lo.array() > box[j].hi.array()).any() || (box[j].lo.array() > box[i].hi.array()).any()) continue;
      if (triangles_intersect(m.vertices[a[0]], m.vertices[a[1]], m.vertices[a[2]], m.vertices[b[0]],
                              m.vertices[b[1]], m.vertices[b[2]]))
        ++hits[i];
    }
  });
  return std::accumulate(hits.begin(), hits.end(), std::size_t{0});
}

namespace {

void fill_geometry(const TriangleMesh& m, MeshReport& r, bool with_volume) {
  double area = 0.0, vol = 0.0;
  double min_e = std::numeric_limits<double>::infinity(), max_e = 0.0, min_ang = 180.0;
  for (const auto& t : m.triangles) {
    const Vec3 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &c = m.vertices[t[2]];
    const double ta = 0.5 * (b - a).cross(c - a).norm();
    area += ta;
    vol += a.dot(b.cross(c)) / 6.0;
    const std::array<double, 3> len{(b - a).norm(), (c - b).norm(), (a - c).norm()};
    for (double l : len) min_e = std::min(min_e, l), max_e = std::max(max_e, l);
    const double longest = std::max({len[0], len[1], len[2]});
    if (ta <= 1e-14 * longest * longest) ++r.degenerate_triangles;
    for (int k = 0; k < 3; ++k) {
      const Vec3 u = m.vertices[t[(k + 1) % 3]] - m.vertices[t[k]], v = m.vertices[t[(k + 2) % 3]] - m.vertices[t[k]];
      const double nu = u.norm(), nv = v.norm();
      if (nu > 0 && nv > 0)
        min_ang = std::min(min_ang, std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0)) * 180.0 / std::numbers::pi);
      else
        min_ang = 0.0;
    }
  }
  r.area = area;
  r.volume = with_volume ? std::abs(vol) : 0.0;
  r.vertex_density = area > 0 ? static_cast<double>(r.vertices) / area : 0.0;
  r.min_edge = m.triangles.empty() ? 0.0 : min_e;
  r.max_edge = max_e;
  r.min_angle_deg = m.triangles.empty() ? 0.0 : min_ang;
}

}  // namespace

MeshReport metrics(const TriangleMesh& m) {
  MeshReport r = check_manifold(m);
  if (!r.closed()) throw Error("volume needs a closed, consistently oriented mesh");
  fill_geometry(m, r, true);
  return r;
}

MeshReport full_report(const TriangleMesh& m, int workers) {
  MeshReport r = check_manifold(m);
  r.intersecting_pairs = check_intersections(m, workers);
  fill_geometry(m, r, r.closed());
  return r;
}

// ---- OFF ------------------------------------------------------------------------------

void write_off(const TriangleMesh& m, std::ostream& out) {
  out << "OFF\n" << m.vertices.size() << ' ' << m.triangles.size() << " 0\n";
  char buf[128];
  for (const Vec3& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : m.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_off(const TriangleMesh& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  write_off(m, f);
  if (!f) throw Error("failed writing " + path);
}

TriangleMesh read_off(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  // Next line with content, comments removed.
  auto next = [&](const char* what) {
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return;
    }
    throw ParseError(line_no + 1, std::string("unexpected end of file, expected ") + what);
  };

  next("OFF header");
  std::istringstream head(line);
  std::string tag;
  head >> tag;
  if (tag != "OFF") throw ParseError(line_no, "missing OFF header");
  std::string rest;
  std::getline(head, rest);
  if (rest.find_first_not_of(" \t\r") == std::string::npos) next("counts");
  else line = rest;
  long long nv = -1, nf = -1, ne = -1;
  {
    std::istringstream counts(line);
    std::string extra;
    if (!(counts >> nv >> nf >> ne) || (counts >> extra) || nv < 0 || nf < 0 || ne < 0)
      throw ParseError(line_no, "counts line must hold three non-negative integers");
  }

  TriangleMesh m;
  m.vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    next("vertex");
    std::istringstream s(line);
    double x, y, z;
    if (!(s >> x >> y >> z)) throw ParseError(line_no, "vertex needs three coordinates");
    m.vertices.emplace_back(x, y, z);
  }
  m.triangles.reserve(static_cast<std::size_t>(nf));
  for (long long i = 0; i < nf; ++i) {
    next("face");
    std::istringstream s(line);
    long long k, a, b, c;
    if (!(s >> k)) throw ParseError(line_no, "face needs a vertex count");
    if (k != 3) throw ParseError(line_no, "only triangular faces are supported");
    if (!(s >> a >> b >> c)) throw ParseError(line_no, "face needs three indices");
    for (long long v : {a, b, c})
      if (v < 0 || v >= nv) throw ParseError(line_no, "face index out of range");
    m.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)});
  }
  return m;
}

TriangleMesh read_off(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return read_off(f);
}

}  // namespace gmsurf
