#pragma once

#include "gmsurf/polyfit.hpp"

#include <array>
#include <vector>

namespace gmsurf {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

/// Range of a product of two intervals.
Interval product(const Interval& a, const Interval& b);

/// Fractions of singular-value mass kept at the two SVD levels.
struct SvdThresholds {
  double first = 0.99;
  double second = 0.99;
};

/// Two-level split A = main + R.
///
/// The first level factors the mode-3 unfolding A1[k][4i + j] = A_ijk
/// (rows follow the last index, columns run over (i, j) with i major), so
/// `u` is a vector along the third index. Each retained right singular
/// vector is reshaped back to a 4x4 matrix V[i][j] and factored again, giving
/// `w` along the first index and `z` along the second:
///   main_ijk = sum_t sigma_t u_t[k] sum_s d_s w_s[i] z_s[j].
struct SvdSplit {
  struct SubTerm {
    double d = 0.0;
    std::array<double, kTerms> w{};
    std::array<double, kTerms> z{};
  };
  struct Term {
    double sigma = 0.0;
    std::array<double, kTerms> u{};
    std::vector<SubTerm> sub;
  };
  std::vector<Term> terms;
  CoeffTensor residue;

  /// main part + residue, elementwise.
  CoeffTensor reconstruct() const;
};

SvdSplit svd_split(const CoeffTensor& A, const SvdThresholds& thr = {});

/// Exact range on [-1,1] of the cubic with the given Legendre coefficients.
Interval bound_poly1d(const std::array<double, kTerms>& coeffs);

/// Certified range [L, U] of the tensor polynomial on its cube:
/// interval propagation through the main part, plus -/+ sum |R_ijk|.
Interval bound_tensor(const SvdSplit& s);

/// L <= c <= U.
bool cube_may_intersect(const SvdSplit& s, double isovalue);

}  // namespace gmsurf
