#include "gmsurf/molmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace gmsurf {

namespace {

double parse_number(const std::string& tok, std::size_t line, const char* what) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(line, std::string("malformed ") + what + " field '" + tok + "'");
  }
  return v;
}

bool is_atom_record(const std::string& tok) {
  return tok.rfind("ATOM", 0) == 0 || tok.rfind("HETATM", 0) == 0;
}

}  // namespace

std::vector<Atom> parse_pqr(std::istream& in) {
  std::vector<Atom> atoms;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> tok;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    tok.clear();
    for (std::string t; ss >> t;) tok.push_back(std::move(t));
    if (tok.empty() || !is_atom_record(tok.front())) continue;
    if (tok.size() < 6) throw ParseError(lineno, "ATOM record has fewer than five numeric fields");
    const std::size_t n = tok.size();
    Atom a;
    a.center = Vec3(parse_number(tok[n - 5], lineno, "x"), parse_number(tok[n - 4], lineno, "y"),
                    parse_number(tok[n - 3], lineno, "z"));
    a.charge = parse_number(tok[n - 2], lineno, "charge");
    a.radius = parse_number(tok[n - 1], lineno, "radius");
    if (!(a.radius > 0.0)) throw ParseError(lineno, "rejected record: radius must be positive");
    atoms.push_back(a);
  }
  if (atoms.empty()) throw Error("PQR input contains no ATOM/HETATM records");
  return atoms;
}

std::vector<Atom> parse_pqr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open PQR file '" + path + "'");
  return parse_pqr(in);
}

GaussianField::GaussianField(std::vector<Atom> atoms_, double decay_, double isovalue_,
                             double cutoff_eps_)
    : atoms(std::move(atoms_)), decay(decay_), isovalue(isovalue_), cutoff_eps(cutoff_eps_) {
  if (!(decay > 0.0)) throw Error("decay must be positive");
  if (!(isovalue > 0.0)) throw Error("isovalue must be positive");
  if (!(cutoff_eps > 0.0 && cutoff_eps <= 1e-4)) throw Error("cutoff eps must lie in (0, 1e-4]");
  for (const Atom& a : atoms) {
    if (!(a.radius > 0.0) || !a.center.allFinite()) throw Error("atom with invalid center or radius");
  }
}

double GaussianField::influence_radius(std::size_t i) const {
  const double r = atoms[i].radius;
  const double extra = std::log(1.0 / (cutoff_eps * isovalue)) / decay;
  return std::sqrt(std::max(r * r + extra, r * r));
}

double GaussianField::max_influence_radius() const {
  double m = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) m = std::max(m, influence_radius(i));
  return m;
}

GaussianField GaussianField::unit_decay() const {
  const double s = std::sqrt(decay);
  std::vector<Atom> scaled = atoms;
  for (Atom& a : scaled) {
    a.center *= s;
    a.radius *= s;
  }
  return GaussianField(std::move(scaled), 1.0, isovalue, cutoff_eps);
}

NeighborGrid::NeighborGrid(const GaussianField& field) {
  const std::size_t n = field.atoms.size();
  centers_.resize(n);
  rho2_.resize(n);
  double rmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centers_[i] = field.atoms[i].center;
    const double rho = field.influence_radius(i);
    rho2_[i] = rho * rho;
    rmax = std::max(rmax, rho);
  }
  cell_ = std::max(rmax, 1e-6);
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = std::sqrt(rho2_[i]);
    const CellIndex lo = cell_of(centers_[i] - Vec3::Constant(rho));
    const CellIndex hi = cell_of(centers_[i] + Vec3::Constant(rho));
    for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
          Box b{Vec3(x, y, z) * cell_, Vec3(x + 1, y + 1, z + 1) * cell_};
          if (box_distance2(b, centers_[i]) <= rho2_[i]) {
            cells_[key({x, y, z})].push_back(static_cast<std::uint32_t>(i));
          }
        }
  }
}

double NeighborGrid::influence_radius(std::size_t i) const { return std::sqrt(rho2_[i]); }

NeighborGrid::CellIndex NeighborGrid::cell_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

std::uint64_t NeighborGrid::key(const CellIndex& c) {
  constexpr std::int64_t off = 1 << 20;
  constexpr std::uint64_t mask = (1u << 21) - 1;
  return (static_cast<std::uint64_t>(c[0] + off) & mask) |
         ((static_cast<std::uint64_t>(c[1] + off) & mask) << 21) |
         ((static_cast<std::uint64_t>(c[2] + off) & mask) << 42);
}

std::vector<std::uint32_t> NeighborGrid::atoms_touching(const Box& box) const {
  std::vector<std::uint32_t> out;
  const CellIndex lo = cell_of(box.lo);
  const CellIndex hi = cell_of(box.hi);
  for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
        auto it = cells_.find(key({x, y, z}));
        if (it == cells_.end()) continue;
        for (std::uint32_t i : it->second) {
          if (box_distance2(box, centers_[i]) <= rho2_[i]) out.push_back(i);
        }
      }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double box_distance2(const Box& box, const Vec3& p) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max({box.lo[a] - p[a], 0.0, p[a] - box.hi[a]});
    d2 += d * d;
  }
  return d2;
}

FieldSample eval_field(const GaussianField& field, const NeighborGrid& grid, const Vec3& p) {
  FieldSample s;
  const double D = field.decay;
  grid.for_each_near(p, [&](std::uint32_t i) {
    const Atom& a = field.atoms[i];
    const Vec3 d = p - a.center;
    const double e = std::exp(-D * (d.squaredNorm() - a.radius * a.radius));
    s.phi += e;
    s.grad -= (2.0 * D * e) * d;
  });
  return s;
}

}  // namespace gmsurf
