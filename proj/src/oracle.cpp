#include "gmsurf/oracle.hpp"

#include "gmsurf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

namespace gmsurf {

Box level_set_bounds(const GaussianField& field) {
  if (field.atoms.empty()) throw Error("empty atom list");
  const double n = static_cast<double>(field.atoms.size());
  const double extra = std::max(0.0, std::log(n / field.isovalue) / field.decay);
  Box b{Vec3::Constant(std::numeric_limits<double>::infinity()), Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const Atom& a : field.atoms) {
    const double R = std::sqrt(a.radius * a.radius + extra);
    b.lo = b.lo.cwiseMin(a.center - Vec3::Constant(R));
    b.hi = b.hi.cwiseMax(a.center + Vec3::Constant(R));
  }
  return b;
}

DenseGrid sample_dense(const GaussianField& field, const NeighborGrid& grid, const OracleParams& params) {
  if (!(params.spacing > 0.0)) throw Error("oracle spacing must be positive");
  const Box b = level_set_bounds(field);
  DenseGrid d;
  d.spacing = params.spacing;
  d.origin = b.lo - Vec3::Constant(2.0 * params.spacing);
  double nodes = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double n = std::ceil((b.hi[a] - b.lo[a]) / params.spacing) + 5.0;
    nodes *= n;
    d.dims[a] = n < 2e9 ? static_cast<int>(n) : std::numeric_limits<int>::max();
  }
  if (nodes * sizeof(double) > static_cast<double>(params.memory_cap))
    throw Error("oracle lattice needs " + std::to_string(static_cast<long long>(nodes * sizeof(double) / 1048576.0)) +
                " MiB, over the cap; use a larger spacing");
  d.values.resize(static_cast<std::size_t>(nodes));
  parallel_for(static_cast<std::size_t>(d.dims[2]), params.workers, [&](std::size_t z) {
    for (int y = 0; y < d.dims[1]; ++y)
      for (int x = 0; x < d.dims[0]; ++x)
        d.values[(z * d.dims[1] + y) * d.dims[0] + x] = eval_field(field, grid, d.node(x, y, static_cast<int>(z))).phi;
  });
  return d;
}

TriangleMesh mc_reference(const DenseGrid& d, double c) {
  // Six tetrahedra around the 0-7 diagonal; corner bits are x=1, y=2, z=4.
  static constexpr int tets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
  const auto [nx, ny, nz] = d.dims;
  TriangleMesh m;
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  auto node_id = [&](int x, int y, int z) {
    return (static_cast<std::uint64_t>(z) * ny + y) * nx + x;
  };

  for (int z = 0; z + 1 < nz; ++z)
    for (int y = 0; y + 1 < ny; ++y)
      for (int x = 0; x + 1 < nx; ++x) {
        std::array<double, 8> f;
        std::array<Vec3, 8> p;
        int inside = 0;
        for (int k = 0; k < 8; ++k) {
          const int cx = x + (k & 1), cy = y + ((k >> 1) & 1), cz = z + ((k >> 2) & 1);
          f[k] = d.at(cx, cy, cz) - c;
          p[k] = d.node(cx, cy, cz);
          inside += f[k] >= 0.0;
        }
        if (inside == 0 || inside == 8) continue;

        // Vertex on the edge between corners i and j (i's bits a subset of j's).
        auto vertex = [&](int i, int j) {
          if (i > j) std::swap(i, j);
          const std::uint64_t key =
              node_id(x + (i & 1), y + ((i >> 1) & 1), z + ((i >> 2) & 1)) * 8 + static_cast<std::uint64_t>(i ^ j);
          const auto [it, fresh] = index.emplace(key, static_cast<std::uint32_t>(m.vertices.size()));
          if (fresh) {
            const double t = std::clamp(f[i] / (f[i] - f[j]), 1e-9, 1.0 - 1e-9);
            m.vertices.push_back(p[i] + t * (p[j] - p[i]));
          }
          return it->second;
        };
        auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t e, int in, int out) {
          const Vec3 n = (m.vertices[b] - m.vertices[a]).cross(m.vertices[e] - m.vertices[a]);
          if (n.dot(p[out] - p[in]) < 0.0) std::swap(b, e);
          m.triangles.push_back({a, b, e});
        };

        for (const auto& t : tets) {
          std::array<int, 4> in{}, out{};
          int ni = 0, no = 0;
          for (int v : t) (f[v] >= 0.0 ? in[ni++] : out[no++]) = v;
          if (ni == 0 || no == 0) continue;
          if (ni == 1 || no == 1) {
            const int apex = ni == 1 ? in[0] : out[0];
            const auto& rest = ni == 1 ? out : in;
            emit(vertex(apex, rest[0]), vertex(apex, rest[1]), vertex(apex, rest[2]), in[0], out[0]);
          } else {
            const std::uint32_t a = vertex(in[0], out[0]), b = vertex(in[0], out[1]), q = vertex(in[1], out[1]),
                                e = vertex(in[1], out[0]);
            emit(a, b, q, in[0], out[0]);
            emit(a, q, e, in[0], out[0]);
          }
        }
      }
  return m;
}

TriangleMesh mc_reference(const GaussianField& field, const NeighborGrid& grid, const OracleParams& params) {
  return mc_reference(sample_dense(field, grid, params), field.isovalue);
}

SurfaceSamples surface_samples(const GaussianField& field, const NeighborGrid& grid, std::size_t n) {
  if (n == 0) throw Error("sample count must be positive");
  if (field.atoms.empty()) throw Error("empty atom list");
  const Box b = level_set_bounds(field);
  const double reach = (b.hi - b.lo).norm();
  const double c = field.isovalue;
  auto phi = [&](const Vec3& x) { return eval_field(field, grid, x).phi; };

  SurfaceSamples out;
  const std::size_t atoms = field.atoms.size();
  const std::size_t per_atom = (n + atoms - 1) / atoms;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t s = 0; s < n; ++s) {
    const Atom& a = field.atoms[s % atoms];
    const std::size_t k = s / atoms;
    const double zc = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(per_atom);
    const double rr = std::sqrt(std::max(0.0, 1.0 - zc * zc));
    const Vec3 dir(rr * std::cos(golden * k), rr * std::sin(golden * k), zc);

    if (phi(a.center) < c) {
      ++out.skipped;
      continue;
    }
    // March to the first point below c, then bisect.
    const double step = std::min(0.25 * a.radius, 0.25 / std::sqrt(field.decay));
    double lo = 0.0, hi = -1.0;
    for (double t = step; t <= reach + step; t += step)
      if (phi(a.center + t * dir) < c) {
        hi = t;
        break;
      }
      else lo = t;
    if (hi < 0.0) {
      ++out.skipped;
      continue;
    }
    Vec3 x = a.center + hi * dir;
    double r = phi(x) - c;
    for (int it = 0; it < 200 && std::abs(r) > 1e-10; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      x = a.center + mid * dir;
      r = phi(x) - c;
      (r >= 0.0 ? lo : hi) = mid;
    }
    if (std::abs(r) <= 1e-10) out.points.push_back(x);
    else ++out.skipped;
  }
  return out;
}

namespace {

// Closest point on triangle abc to p.
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

double distance_to_mesh(const TriangleMesh& m, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : m.triangles)
    best = std::min(best, (closest_on_triangle(p, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) - p).squaredNorm());
  return std::sqrt(best);
}

}  // namespace gmsurf
