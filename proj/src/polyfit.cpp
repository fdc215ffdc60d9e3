#include "gmsurf/polyfit.hpp"

#include <cmath>
#include <numbers>

namespace gmsurf {

const GaussRule& gauss16() {
  static const GaussRule rule = [] {
    GaussRule r;
    constexpr int n = 16;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.x[i] = x;
      r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

AxisCoeffs project_function_raw(const std::function<double(double)>& f, double a, double b) {
  if (!(b - a >= 1e-12)) throw Error("degenerate projection interval");
  const GaussRule& g = gauss16();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  AxisCoeffs out;
  for (int q = 0; q < 16; ++q) {
    const double fv = f(mid + half * g.x[q]) * g.w[q];
    const auto L = legendre(g.x[q]);
    for (int j = 0; j < kTerms; ++j) out.c[j] += fv * L[j];
  }
  for (int j = 0; j < kTerms; ++j) out.c[j] *= 0.5 * (2 * j + 1);
  return out;
}

AxisCoeffs project_function(const std::function<double(double)>& f, double a, double b) {
  AxisCoeffs c = project_function_raw(f, a, b);
  // L_j(1) = 1 and L_j(-1) = (-1)^j, so eps0 on L_2 and eps1 on L_3 fix both ends.
  const double rp = f(b) - (c.c[0] + c.c[1] + c.c[2] + c.c[3]);
  const double rm = f(a) - (c.c[0] - c.c[1] + c.c[2] - c.c[3]);
  c.c[2] += 0.5 * (rp + rm);
  c.c[3] += 0.5 * (rp - rm);
  return c;
}

AxisCoeffs project_axis(double x0, double decay, double a, double b) {
  if (!(b - a >= 1e-12)) throw Error("degenerate projection interval");
  const GaussRule& g = gauss16();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  AxisCoeffs c;
  for (int q = 0; q < 16; ++q) {
    const double t = g.x[q];
    const double d = mid + half * t - x0;
    const double fv = std::exp(-decay * d * d) * g.w[q];
    const double l2 = 0.5 * (3.0 * t * t - 1.0);
    const double l3 = 0.5 * t * (5.0 * t * t - 3.0);
    c.c[0] += fv;
    c.c[1] += fv * t;
    c.c[2] += fv * l2;
    c.c[3] += fv * l3;
  }
  c.c[0] *= 0.5;
  c.c[1] *= 1.5;
  c.c[2] *= 2.5;
  c.c[3] *= 3.5;
  const double fa = std::exp(-decay * (a - x0) * (a - x0));
  const double fb = std::exp(-decay * (b - x0) * (b - x0));
  const double rp = fb - (c.c[0] + c.c[1] + c.c[2] + c.c[3]);
  const double rm = fa - (c.c[0] - c.c[1] + c.c[2] - c.c[3]);
  c.c[2] += 0.5 * (rp + rm);
  c.c[3] += 0.5 * (rp - rm);
  return c;
}

CoeffTensor assemble_tensor(const GaussianField& field, std::span<const std::uint32_t> atoms,
                            const Box& cube) {
  CoeffTensor t;
  t.bounds = cube;
  const double D = field.decay;
  for (std::uint32_t idx : atoms) {
    const Atom& at = field.atoms[idx];
    const AxisCoeffs bx = project_axis(at.center.x(), D, cube.lo.x(), cube.hi.x());
    const AxisCoeffs by = project_axis(at.center.y(), D, cube.lo.y(), cube.hi.y());
    const AxisCoeffs bz = project_axis(at.center.z(), D, cube.lo.z(), cube.hi.z());
    const double w = std::exp(D * at.radius * at.radius);
    for (int k = 0; k < kTerms; ++k) {
      const double wk = w * bz.c[k];
      for (int j = 0; j < kTerms; ++j) {
        const double wjk = wk * by.c[j];
        for (int i = 0; i < kTerms; ++i) t(i, j, k) += wjk * bx.c[i];
      }
    }
  }
  return t;
}

CoeffTensor assemble_tensor(const GaussianField& field, const NeighborGrid& grid, const Box& cube) {
  const auto atoms = grid.atoms_touching(cube);
  return assemble_tensor(field, atoms, cube);
}

double eval_tensor(const CoeffTensor& t, const Vec3& q) {
  const auto Lx = legendre(q.x()), Ly = legendre(q.y()), Lz = legendre(q.z());
  double sum = 0.0;
  for (int k = 0; k < kTerms; ++k) {
    double sk = 0.0;
    for (int j = 0; j < kTerms; ++j) {
      double sj = 0.0;
      for (int i = 0; i < kTerms; ++i) sj += t(i, j, k) * Lx[i];
      sk += sj * Ly[j];
    }
    sum += sk * Lz[k];
  }
  return sum;
}

double high_order_norm(const CoeffTensor& t) {
  double s = 0.0;
  for (int k = 0; k < kTerms; ++k)
    for (int j = 0; j < kTerms; ++j)
      for (int i = 0; i < kTerms; ++i)
        if (i >= 2 || j >= 2 || k >= 2) s += std::abs(t(i, j, k));
  return s;
}

double collapse_error_bound(const CoeffTensor& t) {
  // P - g = H - I(H), with H the high-order part and I the corner interpolant.
  // On L_0, L_1 the trilinear monomial and Legendre coefficients coincide.
  CoeffTensor h = t;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) h(i, j, k) = 0.0;
  const TrilinearCell ih = collapse_trilinear(h);
  double s = high_order_norm(t);
  for (double m : ih.mono) s += std::abs(m);
  return s;
}

TrilinearCell TrilinearCell::from_corners(const std::array<double, 8>& v, const Box& bounds) {
  TrilinearCell cell;
  cell.corner = v;
  cell.bounds = bounds;
  // Project onto the product basis {1,x,y,z,xy,xz,yz,xyz}, orthogonal on the corner set.
  for (int c = 0; c < 8; ++c) {
    const double sx = (c & 1) ? 1.0 : -1.0;
    const double sy = (c & 2) ? 1.0 : -1.0;
    const double sz = (c & 4) ? 1.0 : -1.0;
    const double b[8] = {1.0, sx, sy, sz, sx * sy, sx * sz, sy * sz, sx * sy * sz};
    for (int m = 0; m < 8; ++m) cell.mono[m] += 0.125 * b[m] * v[c];
  }
  return cell;
}

double TrilinearCell::eval(const Vec3& q) const {
  // Nested (1-t)a + t b form: reproduces the corner values bit-for-bit.
  const double tx = 0.5 * (q.x() + 1.0), ty = 0.5 * (q.y() + 1.0), tz = 0.5 * (q.z() + 1.0);
  auto lerp = [](double a, double b, double t) { return (1.0 - t) * a + t * b; };
  const auto& v = corner;
  const double x00 = lerp(v[0], v[1], tx), x10 = lerp(v[2], v[3], tx);
  const double x01 = lerp(v[4], v[5], tx), x11 = lerp(v[6], v[7], tx);
  return lerp(lerp(x00, x10, ty), lerp(x01, x11, ty), tz);
}

Vec3 TrilinearCell::gradient(const Vec3& q) const {
  const double x = q.x(), y = q.y(), z = q.z();
  const auto& a = mono;
  return Vec3(a[1] + a[4] * y + a[5] * z + a[7] * y * z, a[2] + a[4] * x + a[6] * z + a[7] * x * z,
              a[3] + a[5] * x + a[6] * y + a[7] * x * y);
}

TrilinearCell collapse_trilinear(const CoeffTensor& t) {
  std::array<double, 8> v{};
  for (int c = 0; c < 8; ++c) v[c] = eval_tensor(t, TrilinearCell::corner_position(c));
  return TrilinearCell::from_corners(v, t.bounds);
}

}  // namespace gmsurf
