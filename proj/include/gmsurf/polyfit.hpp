#pragma once

#include "gmsurf/common.hpp"
#include "gmsurf/molmodel.hpp"

#include <array>
#include <functional>
#include <span>

namespace gmsurf {

/// Degree of the per-axis Legendre expansion; fixed.
inline constexpr int kDegree = 3;
inline constexpr int kTerms = kDegree + 1;

/// L_0..L_3 at t.
inline std::array<double, kTerms> legendre(double t) {
  return {1.0, t, 0.5 * (3.0 * t * t - 1.0), 0.5 * t * (5.0 * t * t - 3.0)};
}

/// d/dt of L_0..L_3 at t.
inline std::array<double, kTerms> legendre_derivative(double t) {
  return {0.0, 1.0, 3.0 * t, 0.5 * (15.0 * t * t - 3.0)};
}

/// Legendre coefficients of one atom's 1-D kernel factor on one interval,
/// after the endpoint correction (both endpoint values reproduced exactly).
struct AxisCoeffs {
  std::array<double, kTerms> c{};

  double eval(double t) const {
    const auto L = legendre(t);
    return c[0] * L[0] + c[1] * L[1] + c[2] * L[2] + c[3] * L[3];
  }
};

/// Least-squares Legendre projection of f (given on [a,b]) with the C0
/// endpoint correction applied to the L_2 and L_3 coefficients.
AxisCoeffs project_function(const std::function<double(double)>& f, double a, double b);

/// Projection without the endpoint correction.
AxisCoeffs project_function_raw(const std::function<double(double)>& f, double a, double b);

/// Corrected projection of t -> exp(-D (t - atom_coord)^2) on [a,b].
AxisCoeffs project_axis(double atom_coord, double decay, double a, double b);

/// 4x4x4 coefficient tensor A of the corrected cubic on one cube;
/// value(x) = sum_ijk A_ijk L_i(x^) L_j(y^) L_k(z^) in local coordinates.
struct CoeffTensor {
  std::array<double, kTerms * kTerms * kTerms> a{};
  Box bounds;

  static constexpr int index(int i, int j, int k) { return i + kTerms * (j + kTerms * k); }
  double& operator()(int i, int j, int k) { return a[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return a[index(i, j, k)]; }
};

/// A = sum_i exp(D r_i^2) b_i^(1) (x) b_i^(2) (x) b_i^(3) over the given atoms.
CoeffTensor assemble_tensor(const GaussianField& field, std::span<const std::uint32_t> atoms,
                            const Box& cube);

/// Same, with the neighbour set taken from the grid.
CoeffTensor assemble_tensor(const GaussianField& field, const NeighborGrid& grid, const Box& cube);

/// Evaluate at a local point in [-1,1]^3 by successive mode products.
double eval_tensor(const CoeffTensor& t, const Vec3& local);

/// l1 norm of the coefficients with max(i,j,k) >= 2: everything a
/// trilinear collapse throws away (|L_j| <= 1 bounds its sup norm).
double high_order_norm(const CoeffTensor& t);

/// Certified sup-norm bound on |P - g| over the cube, where g is the
/// trilinear collapse of P: l1 norm of the Legendre coefficients of P - g.
/// Never smaller than high_order_norm.
double collapse_error_bound(const CoeffTensor& t);

/// g = a0 + a1 x + a2 y + a3 z + a4 xy + a5 xz + a6 yz + a7 xyz on [-1,1]^3.
/// Corner index is i + 2j + 4k with i,j,k selecting the -1/+1 side of x,y,z.
struct TrilinearCell {
  std::array<double, 8> corner{};
  std::array<double, 8> mono{};
  Box bounds;

  static TrilinearCell from_corners(const std::array<double, 8>& corners, const Box& bounds = {});

  double eval(const Vec3& q) const;
  Vec3 gradient(const Vec3& q) const;  // in local coordinates

  static Vec3 corner_position(int idx) {
    return Vec3((idx & 1) ? 1.0 : -1.0, (idx & 2) ? 1.0 : -1.0, (idx & 4) ? 1.0 : -1.0);
  }
};

/// Trilinear interpolant of the tensor's corner values.
TrilinearCell collapse_trilinear(const CoeffTensor& t);

/// Gauss-Legendre rule on [-1,1] with 16 nodes.
struct GaussRule {
  std::array<double, 16> x{};
  std::array<double, 16> w{};
};
const GaussRule& gauss16();

}  // namespace gmsurf
