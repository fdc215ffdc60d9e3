#include "gmsurf/bounds.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gmsurf {

namespace {

// Smallest count whose leading singular values carry `frac` of the total.
int truncation_rank(const Eigen::VectorXd& s, double frac) {
  const int n = static_cast<int>(s.size());
  const double total = s.sum();
  if (!(total > 0.0)) return 0;
  if (frac >= 1.0) {
    int r = 0;
    for (int i = 0; i < n; ++i)
      if (s[i] > 0.0) r = i + 1;
    return r;
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += s[i];
    if (acc >= frac * total) return i + 1;
  }
  return n;
}

}  // namespace

Interval product(const Interval& a, const Interval& b) {
  const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

CoeffTensor SvdSplit::reconstruct() const {
  CoeffTensor out = residue;
  for (const Term& t : terms)
    for (const SubTerm& s : t.sub)
      for (int k = 0; k < kTerms; ++k)
        for (int j = 0; j < kTerms; ++j)
          for (int i = 0; i < kTerms; ++i) out(i, j, k) += t.sigma * t.u[k] * s.d * s.w[i] * s.z[j];
  return out;
}

SvdSplit svd_split(const CoeffTensor& A, const SvdThresholds& thr) {
  // Dynamic shape with fixed maxima: thin factors are allowed, no heap use.
  using Mat4x16 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 16>;
  using Mat4 = Eigen::Matrix4d;
  Mat4x16 A1(4, 16);
  for (int k = 0; k < kTerms; ++k)
    for (int i = 0; i < kTerms; ++i)
      for (int j = 0; j < kTerms; ++j) A1(k, 4 * i + j) = A(i, j, k);

  SvdSplit out;
  Eigen::JacobiSVD<Mat4x16> svd1(A1, Eigen::ComputeFullU | Eigen::ComputeThinV);
  const Eigen::VectorXd sigma = svd1.singularValues();
  const int r1 = truncation_rank(sigma, thr.first);
  CoeffTensor main;
  for (int t = 0; t < r1; ++t) {
    SvdSplit::Term term;
    term.sigma = sigma[t];
    for (int k = 0; k < kTerms; ++k) term.u[k] = svd1.matrixU()(k, t);
    Mat4 V;
    for (int i = 0; i < kTerms; ++i)
      for (int j = 0; j < kTerms; ++j) V(i, j) = svd1.matrixV()(4 * i + j, t);
    Eigen::JacobiSVD<Mat4> svd2(V, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd d = svd2.singularValues();
    const int r2 = truncation_rank(d, thr.second);
    for (int s = 0; s < r2; ++s) {
      SvdSplit::SubTerm sub;
      sub.d = d[s];
      for (int i = 0; i < kTerms; ++i) sub.w[i] = svd2.matrixU()(i, s);
      for (int j = 0; j < kTerms; ++j) sub.z[j] = svd2.matrixV()(j, s);
      for (int k = 0; k < kTerms; ++k)
        for (int j = 0; j < kTerms; ++j)
          for (int i = 0; i < kTerms; ++i)
            main(i, j, k) += term.sigma * term.u[k] * sub.d * sub.w[i] * sub.z[j];
      term.sub.push_back(sub);
    }
    out.terms.push_back(std::move(term));
  }
  out.residue.bounds = A.bounds;
  for (std::size_t n = 0; n < A.a.size(); ++n) out.residue.a[n] = A.a[n] - main.a[n];
  return out;
}

Interval bound_poly1d(const std::array<double, kTerms>& c) {
  // Monomial form p(t) = m0 + m1 t + m2 t^2 + m3 t^3.
  const double m0 = c[0] - 0.5 * c[2];
  const double m1 = c[1] - 1.5 * c[3];
  const double m2 = 1.5 * c[2];
  const double m3 = 2.5 * c[3];
  auto p = [&](double t) { return m0 + t * (m1 + t * (m2 + t * m3)); };
  double lo = std::min(p(-1.0), p(1.0));
  double hi = std::max(p(-1.0), p(1.0));
  auto visit = [&](double t) {
    if (t > -1.0 && t < 1.0) {
      const double v = p(t);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  // p'(t) = m1 + 2 m2 t + 3 m3 t^2
  const double qa = 3.0 * m3, qb = 2.0 * m2, qc = m1;
  const double scale = std::abs(qa) + std::abs(qb) + std::abs(qc);
  if (scale > 0.0) {
    if (std::abs(qa) <= 1e-14 * scale) {
      if (std::abs(qb) > 0.0) visit(-qc / qb);
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (qb + std::copysign(sq, qb));
        if (q != 0.0) {
          visit(q / qa);
          visit(qc / q);
        } else {
          visit(0.0);
        }
      }
    }
  }
  // Pad by a few ulps of the coefficient scale to absorb evaluation rounding.
  const double pad = 8.0 * std::numeric_limits<double>::epsilon() *
                     (std::abs(m0) + std::abs(m1) + std::abs(m2) + std::abs(m3));
  return {lo - pad, hi + pad};
}

Interval bound_tensor(const SvdSplit& s) {
  double M = 0.0, m = 0.0;
  for (const auto& term : s.terms) {
    double Myz = 0.0, myz = 0.0;
    for (const auto& sub : term.sub) {
      const Interval yz = product(bound_poly1d(sub.w), bound_poly1d(sub.z));
      Myz += sub.d * yz.hi;
      myz += sub.d * yz.lo;
    }
    const Interval t = product(bound_poly1d(term.u), Interval{myz, Myz});
    M += term.sigma * t.hi;
    m += term.sigma * t.lo;
  }
  double r = 0.0;
  for (double v : s.residue.a) r += std::abs(v);
  // Relative slack for the floating-point accumulation above.
  const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(M) + std::abs(m) + r);
  return {m - r - slack, M + r + slack};
}

bool cube_may_intersect(const SvdSplit& s, double isovalue) {
  return bound_tensor(s).contains(isovalue);
}

}  // namespace gmsurf
