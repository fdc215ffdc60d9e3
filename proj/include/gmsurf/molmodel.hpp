#pragma once

#include "gmsurf/common.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gmsurf {

struct Atom {
  Vec3 center = Vec3::Zero();  // Angstrom
  double radius = 1.0;         // Angstrom
  double charge = 0.0;         // parsed, not used for meshing
};

/// Whitespace-tokenized PQR reader. The last two numeric fields of an
/// ATOM/HETATM record are charge and radius, the three before them x y z,
/// so the optional chain-ID column does not matter.
std::vector<Atom> parse_pqr(std::istream& in);
std::vector<Atom> parse_pqr_file(const std::string& path);

/// phi(x) = sum_i exp(-D (|x - x_i|^2 - r_i^2)); the surface is phi = c.
struct GaussianField {
  std::vector<Atom> atoms;
  double decay = 1.0;
  double isovalue = 1.0;
  double cutoff_eps = 1e-9;  // kernel truncation, relative to isovalue

  GaussianField() = default;
  GaussianField(std::vector<Atom> atoms, double decay, double isovalue, double cutoff_eps = 1e-9);

  /// Radius beyond which atom i contributes less than cutoff_eps * isovalue.
  double influence_radius(std::size_t i) const;
  double max_influence_radius() const;

  /// Equivalent field with decay 1: coordinates and radii scaled by sqrt(D).
  GaussianField unit_decay() const;
};

/// Uniform hash lattice; every atom is listed in every lattice cell its
/// influence ball touches.
class NeighborGrid {
 public:
  explicit NeighborGrid(const GaussianField& field);

  /// Atoms whose influence ball contains p.
  template <class Fn>
  void for_each_near(const Vec3& p, Fn&& fn) const {
    auto it = cells_.find(key(cell_of(p)));
    if (it == cells_.end()) return;
    for (std::uint32_t i : it->second) {
      if ((p - centers_[i]).squaredNorm() <= rho2_[i]) fn(i);
    }
  }

  /// Atoms whose influence ball intersects the box, sorted by index.
  std::vector<std::uint32_t> atoms_touching(const Box& box) const;

  double cell_size() const { return cell_; }
  double influence_radius(std::size_t i) const;

 private:
  using CellIndex = std::array<std::int64_t, 3>;
  CellIndex cell_of(const Vec3& p) const;
  static std::uint64_t key(const CellIndex& c);

  double cell_ = 1.0;
  std::vector<Vec3> centers_;
  std::vector<double> rho2_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

struct FieldSample {
  double phi = 0.0;
  Vec3 grad = Vec3::Zero();
};

/// Truncated field value and analytic gradient at p.
FieldSample eval_field(const GaussianField& field, const NeighborGrid& grid, const Vec3& p);

/// Squared distance from p to the box (0 inside).
double box_distance2(const Box& box, const Vec3& p);

}  // namespace gmsurf
