// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
//
// Usage: acceptance [DATA_DIR] [--only N[,N...]]

#include "gmsurf/bounds.hpp"
#include "gmsurf/oracle.hpp"
#include "gmsurf/pipeline.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace gmsurf;

namespace {

// Tolerances.
constexpr double kSphereRel = 0.02;
constexpr double kSphereSeconds = 2.0;
constexpr int kRandomTensors = 1000;
constexpr int kDenseSamples = 21;
constexpr double kOracleRel = 0.03;
constexpr double kOracleSpacing = 0.1;  // Angstrom; must be <= 0.2
constexpr double kSlopeLo = 0.8, kSlopeHi = 1.2;
constexpr double kResidualFactor = 2.0;
constexpr double kFaceRel = 1e-9;
constexpr int kFaceSamples = 50;

std::string g_data = GMSURF_TEST_DATA;

std::vector<Atom> load(const std::string& name) { return parse_pqr_file(g_data + "/" + name); }

MeshConfig cfg(double tau, int workers = 1) {
  MeshConfig c;
  c.tau = tau;
  c.workers = workers;
  return c;
}

double rel(double a, double b) { return std::abs(a / b - 1.0); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

MeshReport oracle_report(const std::vector<Atom>& atoms) {
  const GaussianField f(atoms, 1.0, 1.0);
  const NeighborGrid g(f);
  OracleParams p;
  p.spacing = kOracleSpacing;
  return metrics(mc_reference(f, g, p));
}

// 1. Analytic sphere.
void sphere(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const MeshRun r = run_mesh(load("sphere.pqr"), cfg(1e-3));
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double ea = rel(r.report.area, 16 * std::numbers::pi), ev = rel(r.report.volume, 32.0 / 3.0 * std::numbers::pi);
  o.detail << "area " << r.report.area << " (err " << ea << "), volume " << r.report.volume << " (err " << ev
           << "), chi " << r.report.euler_characteristic << ", components " << r.report.components << ", " << sec
           << " s";
  o.require(r.report.closed() && r.report.defects() == 0, "closed manifold");
  o.require(r.report.components == 1, "one component");
  o.require(r.report.euler_characteristic == 2, "Euler characteristic 2");
  o.require(ea <= kSphereRel, "area");
  o.require(ev <= kSphereRel, "volume");
  o.require(sec < kSphereSeconds, "runtime");
}

// 2. Zero defects on every input.
void zero_defects(Outcome& o) {
  const std::vector<std::pair<std::string, std::vector<double>>> cases = {
      {"sphere.pqr", {1e-2, 1e-3}},        {"two_atoms.pqr", {1e-2, 1e-3}},
      {"cluster7.pqr", {1e-2, 2.5e-3}},    {"cluster39.pqr", {1e-2, 2.5e-3}},
      {"cluster75.pqr", {1e-2, 2.5e-3}},   {"cluster906.pqr", {4e-2, 1e-2}}};
  std::size_t runs = 0;
  for (const auto& [name, taus] : cases) {
    const auto atoms = load(name);
    for (double tau : taus) {
      const MeshRun r = run_mesh(atoms, cfg(tau));
      ++runs;
      const MeshReport& m = r.report;
      if (m.non_manifold_edges || m.non_manifold_vertices || m.intersecting_pairs || m.orientation_conflicts) {
        std::ostringstream w;
        w << name << " tau " << tau << ": " << m.non_manifold_edges << "/" << m.non_manifold_vertices << "/"
          << m.intersecting_pairs;
        o.require(false, w.str());
      }
    }
  }
  o.detail << runs << " meshes checked for non-manifold edges/vertices and intersecting pairs";
}

// 3. Bound soundness.
void bounds(Outcome& o) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int bad = 0;
  for (int n = 0; n < kRandomTensors; ++n) {
    CoeffTensor t;
    for (double& v : t.a) v = u(rng);
    const Interval b = bound_tensor(svd_split(t));
    for (int i = 0; i < kDenseSamples; ++i)
      for (int j = 0; j < kDenseSamples; ++j)
        for (int k = 0; k < kDenseSamples; ++k) {
          const double s = 2.0 / (kDenseSamples - 1);
          const double v = eval_tensor(t, Vec3(-1 + i * s, -1 + j * s, -1 + k * s));
          if (v < b.lo || v > b.hi) ++bad;
        }
  }
  o.require(bad == 0, std::to_string(bad) + " samples outside [L, U]");

  // Every cube holding a surface sample of a 2-atom system must be kept.
  const GaussianField f(load("two_atoms.pqr"), 1.0, 1.0);
  const NeighborGrid g(f);
  const SurfaceSamples s = surface_samples(f, g, 400);
  int dropped = 0, cubes = 0;
  for (const Vec3& x : s.points)
    for (double edge : {4.0, 2.0, 1.0, 0.5, 0.25}) {
      const Vec3 lo = x - edge * Vec3(0.5 + 0.45 * u(rng), 0.5 + 0.45 * u(rng), 0.5 + 0.45 * u(rng));
      const Box box{lo, lo + Vec3::Constant(edge)};
      ++cubes;
      if (!cube_may_intersect(svd_split(assemble_tensor(f, g, box)), f.isovalue)) ++dropped;
    }
  Octree tree = initial_grid(f, g, 4.0, 8);
  refine(tree, f, g, PartitionParams{});
  int uncovered = 0;
  for (const Vec3& x : s.points) {
    const auto k = tree.leaf_at(x);
    if (!k || *tree.state(*k) != CellState::Surface) ++uncovered;
  }
  o.require(s.skipped == 0, "surface samples skipped");
  o.require(dropped == 0, std::to_string(dropped) + " cubes with a surface point discarded");
  o.require(uncovered == 0, std::to_string(uncovered) + " samples outside surface leaves");
  o.detail << kRandomTensors << " tensors x " << kDenseSamples << "^3 samples, " << bad << " outside; " << cubes
           << " cubes around " << s.points.size() << " surface samples, " << dropped << " discarded, " << uncovered
           << " uncovered";
}

// 4. Oracle equivalence.
void oracle(Outcome& o) {
  for (const char* name : {"sphere.pqr", "two_atoms.pqr", "cluster7.pqr"}) {
    const auto atoms = load(name);
    const MeshRun r = run_mesh(atoms, cfg(1e-3));
    const MeshReport ref = oracle_report(atoms);
    const double ea = rel(r.report.area, ref.area), ev = rel(r.report.volume, ref.volume);
    o.detail << name << " area/volume err " << ea << "/" << ev << "; ";
    o.require(ea <= kOracleRel && ev <= kOracleRel, name);
  }
}

// 5. Convergence over the tau sweep.
void convergence(Outcome& o) {
  const std::vector<double> taus = {4e-2, 1e-2, 2.5e-3, 6e-4};
  for (const char* name : {"cluster7.pqr", "cluster39.pqr"}) {
    const auto atoms = load(name);
    std::vector<double> area, vol;
    for (double tau : taus) {
      const MeshRun r = run_mesh(atoms, cfg(tau));
      area.push_back(r.report.area);
      vol.push_back(r.report.volume);
    }
    bool mono = true;
    for (std::size_t i = 2; i < taus.size(); ++i) {
      mono = mono && std::abs(area[i] - area[i - 1]) < std::abs(area[i - 1] - area[i - 2]);
      mono = mono && std::abs(vol[i] - vol[i - 1]) < std::abs(vol[i - 1] - vol[i - 2]);
    }
    const MeshReport ref = oracle_report(atoms);
    const double ea = rel(area.back(), ref.area), ev = rel(vol.back(), ref.volume);
    o.detail << name << " area";
    for (double a : area) o.detail << " " << a;
    o.detail << " volume";
    for (double v : vol) o.detail << " " << v;
    o.detail << " oracle err " << ea << "/" << ev << "; ";
    o.require(mono, std::string(name) + " monotone");
    o.require(ea <= kOracleRel && ev <= kOracleRel, std::string(name) + " oracle");
  }
}

// 6. Linear scaling over replicated clusters.
void scaling(Outcome& o) {
  const auto base = load("cluster500.pqr");
  Vec3 lo = Vec3::Constant(1e300), hi = -lo;
  for (const Atom& a : base) lo = lo.cwiseMin(a.center), hi = hi.cwiseMax(a.center);
  const Vec3 step = (hi - lo) + Vec3::Constant(8.0);
  std::vector<double> lx, ly;
  for (int k = 1; k <= 64; k *= 2) {
    std::array<int, 3> n{1, 1, 1};
    for (int m = k; m > 1; m /= 2) *std::min_element(n.begin(), n.end()) *= 2;
    std::vector<Atom> atoms;
    for (int x = 0; x < n[0]; ++x)
      for (int y = 0; y < n[1]; ++y)
        for (int z = 0; z < n[2]; ++z)
          for (Atom a : base) {
            a.center += step.cwiseProduct(Vec3(x, y, z));
            atoms.push_back(a);
          }
    const auto t0 = std::chrono::steady_clock::now();
    const MeshRun r = run_mesh(atoms, cfg(4e-2));
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.detail << atoms.size() << ":" << sec << "s ";
    o.require(r.report.defects() == 0, std::to_string(atoms.size()) + " atoms has defects");
    lx.push_back(std::log(static_cast<double>(atoms.size())));
    ly.push_back(std::log(sec));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
  const double slope = sxy / sxx;
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  o.detail << "slope " << slope << ", peak RSS " << ru.ru_maxrss / 1024 << " MiB";
  o.require(slope >= kSlopeLo && slope <= kSlopeHi, "slope");
}

// 7. Vertex residual against the leaf size and tolerance.
void residual(Outcome& o) {
  const auto atoms = load("cluster39.pqr");
  const GaussianField f(atoms, 1.0, 1.0);
  const NeighborGrid g(f);
  double last_median = 1e300;
  for (double tau : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) {
    const MeshRun r = run_mesh(atoms, cfg(tau));
    // The constant is the leaf tolerance relative to c: tolerance_scale * tau.
    const double bound = kResidualFactor * r.max_leaf_diagonal * PartitionParams{}.tolerance_scale * tau;
    std::vector<double> res;
    for (const Vec3& v : r.mesh.vertices) {
      const FieldSample s = eval_field(f, g, v);
      res.push_back(std::abs(s.phi - f.isovalue) / s.grad.norm());
    }
    std::sort(res.begin(), res.end());
    const double median = res[res.size() / 2], worst = res.back();
    o.detail << "tau " << tau << " max " << worst << " (bound " << bound << ") median " << median << "; ";
    o.require(worst <= bound, "max residual at tau " + std::to_string(tau));
    o.require(median < last_median, "median not decreasing at tau " + std::to_string(tau));
    last_median = median;
  }
}

// 8. C0 across equal faces and watertight welding.
//
// Each cube's tensor sums the atoms whose influence ball touches it, so two
// neighbours can differ by atoms truncated at cutoff_eps * c. The polynomial
// construction itself is checked with a cutoff far below the tolerance; at the
// default cutoff the gap must stay within the truncation.
constexpr double kStrictCutoff = 1e-12;

double worst_face_gap(const GaussianField& f, std::size_t& pairs, double& worst_abs) {
  const NeighborGrid g(f);
  Octree tree = initial_grid(f, g, 4.0, 8);
  PartitionParams p;
  p.tau = 1e-2;
  const LeafSet ls = refine(tree, f, g, p);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  pairs = 0;
  worst_abs = 0.0;
  for (std::size_t i = 0; i < ls.leaves.size(); ++i) {
    const Leaf& a = ls.leaves[i];
    for (std::size_t j : ls.face_adjacent(tree, i)) {
      const Leaf& b = ls.leaves[j];
      if (b.key.level != a.key.level || j < i) continue;
      int axis = 0;
      for (int k = 0; k < 3; ++k)
        if (b.key.idx[k] != a.key.idx[k]) axis = k;
      const double side = b.key.idx[axis] > a.key.idx[axis] ? 1.0 : -1.0;
      const CoeffTensor ta = assemble_tensor(f, g, a.box), tb = assemble_tensor(f, g, b.box);
      for (int n = 0; n < kFaceSamples; ++n) {
        Vec3 qa(u(rng), u(rng), u(rng)), qb = qa;
        qa[axis] = side;
        qb[axis] = -side;
        const double va = eval_tensor(ta, qa), vb = eval_tensor(tb, qb);
        worst = std::max(worst, std::abs(va - vb) / std::max({std::abs(va), std::abs(vb), 1e-300}));
        worst_abs = std::max(worst_abs, std::abs(va - vb));
      }
      ++pairs;
    }
  }
  return worst;
}

void continuity(Outcome& o) {
  const auto atoms = load("cluster39.pqr");
  std::size_t pairs = 0;
  double gap_abs = 0.0;
  const double strict = worst_face_gap(GaussianField(atoms, 1.0, 1.0, kStrictCutoff), pairs, gap_abs);
  o.require(pairs > 0, "no equal-size neighbours");
  o.require(strict <= kFaceRel, "face mismatch");
  o.detail << pairs << " face pairs x " << kFaceSamples << " samples at cutoff " << kStrictCutoff
           << ", worst relative gap " << strict << "; ";
  const GaussianField def(atoms, 1.0, 1.0);
  const double loose = worst_face_gap(def, pairs, gap_abs);
  o.require(gap_abs <= 4.0 * def.cutoff_eps * def.isovalue, "default-cutoff gap exceeds the truncation");
  o.detail << "default cutoff " << def.cutoff_eps << ": worst absolute gap " << gap_abs << " (relative " << loose
           << "); ";
  for (const char* name : {"cluster39.pqr", "cluster906.pqr"}) {
    const MeshRun r = run_mesh(load(name), cfg(1e-2));
    o.detail << name << " edges of degree != 2: " << r.report.non_manifold_edges << "; ";
    o.require(r.report.non_manifold_edges == 0 && r.report.boundary_edges == 0, name);
  }
}

// 9. Byte-identical output for any worker count.
void determinism(Outcome& o) {
  const auto atoms = load("cluster906.pqr");
  std::string first;
  for (int w : {1, 4, 8}) {
    std::ostringstream s;
    write_off(run_mesh(atoms, cfg(1e-2, w)).mesh, s);
    if (first.empty()) first = s.str();
    o.require(s.str() == first, "workers " + std::to_string(w) + " differs");
    o.detail << "workers " << w << ": " << s.str().size() << " bytes; ";
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      for (std::string t; std::getline(s, t, ',');) only.insert(std::stoi(t));
    } else {
      g_data = a;
    }
  }
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"analytic sphere fidelity", sphere},   {"zero-defect manifoldness", zero_defects},
      {"bound soundness", bounds},            {"oracle equivalence", oracle},
      {"convergence", convergence},           {"linear scaling", scaling},
      {"surface residual", residual},         {"C0 and watertightness", continuity},
      {"determinism", determinism}};
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    all = all && o.pass;
    std::printf("criterion %d %s: %s | %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
