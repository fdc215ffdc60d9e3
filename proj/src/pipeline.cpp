#include "gmsurf/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace gmsurf {

void MeshConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(name) + " must be positive");
  };
  positive(decay, "decay");
  positive(isovalue, "isovalue");
  positive(tau, "tau");
  positive(cell, "cell");
  positive(sagitta, "sagitta");
  if (!(cutoff_eps > 0.0 && cutoff_eps <= 1e-4)) throw Error("cutoff-eps must lie in (0, 1e-4]");
  if (max_depth < 1 || max_depth > 20) throw Error("max-depth must lie in [1, 20]");
  if (workers < 0) throw Error("workers must be non-negative");
}

MeshRun run_mesh(const std::vector<Atom>& atoms, const MeshConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  MeshRun run;
  run.atoms = atoms.size();
  auto t = clock::now();
  auto lap = [&](const char* stage) {
    const auto now = clock::now();
    run.seconds.emplace_back(stage, std::chrono::duration<double>(now - t).count());
    t = now;
  };

  const double s = std::sqrt(cfg.decay);
  const GaussianField field = GaussianField(atoms, cfg.decay, cfg.isovalue, cfg.cutoff_eps).unit_decay();
  const NeighborGrid grid(field);
  Octree tree = initial_grid(field, grid, cfg.cell * s, cfg.max_depth);
  lap("grid");

  PartitionParams pp;
  pp.tau = cfg.tau;
  pp.max_depth = cfg.max_depth;
  pp.workers = cfg.workers;
  run.leaves = refine(tree, field, grid, pp);
  for (const Leaf& l : run.leaves.leaves)
    run.max_leaf_diagonal = std::max(run.max_leaf_diagonal, (l.box.hi - l.box.lo).norm() / s);
  lap("refine");

  ExtractParams ep;
  ep.sagitta = cfg.sagitta;
  ep.workers = cfg.workers;
  Extraction ex = extract_cells(tree, field, grid, ep);
  run.extract = ex.stats;
  lap("contour");

  run.mesh = weld(ex.cells);
  for (Vec3& v : run.mesh.vertices) v /= s;
  lap("weld");

  run.report = check_manifold(run.mesh);
  if (cfg.check_intersections) run.report.intersecting_pairs = check_intersections(run.mesh, cfg.workers);
  lap("validate");

  // metrics() recomputes the manifold checks; keep those already made.
  if (run.report.closed()) {
    MeshReport m = metrics(run.mesh);
    m.intersecting_pairs = run.report.intersecting_pairs;
    run.report = m;
  }
  lap("metrics");
  return run;
}

std::string report_text(const MeshReport& r) {
  std::ostringstream o;
  o.precision(10);
  o << "vertices=" << r.vertices << "\ntriangles=" << r.triangles << "\nnon_manifold_edges=" << r.non_manifold_edges
    << "\nnon_manifold_vertices=" << r.non_manifold_vertices << "\nboundary_edges=" << r.boundary_edges
    << "\norientation_conflicts=" << r.orientation_conflicts << "\nintersecting_pairs=" << r.intersecting_pairs
    << "\ndegenerate_triangles=" << r.degenerate_triangles << "\ndefects=" << r.defects() << "\nclosed=" << r.closed()
    << "\narea=" << r.area << "\nvolume=" << r.volume << "\nvertex_density=" << r.vertex_density
    << "\neuler_characteristic=" << r.euler_characteristic << "\ncomponents=" << r.components
    << "\nmin_edge=" << r.min_edge << "\nmax_edge=" << r.max_edge << "\nmin_angle_deg=" << r.min_angle_deg << '\n';
  return o.str();
}

std::string report_text(const MeshRun& run) {
  std::ostringstream o;
  o.precision(10);
  o << "atoms=" << run.atoms << "\nleaves=" << run.leaves.leaves.size()
    << "\ncubes_evaluated=" << run.leaves.cubes_evaluated << "\nforced_leaves=" << run.leaves.forced_leaves
    << "\ncontoured_cells=" << run.extract.contoured_cells << "\nhanging_nodes=" << run.extract.hanging_nodes
    << "\nfold_segments=" << run.extract.fold_segments << "\ncritical_points=" << run.extract.critical_points
    << "\nstray_fold_ends=" << run.extract.stray_fold_ends << "\nmax_leaf_diagonal=" << run.max_leaf_diagonal << '\n'
    << report_text(run.report);
  double total = 0.0;
  for (const auto& [stage, sec] : run.seconds) {
    o << "seconds_" << stage << '=' << sec << '\n';
    total += sec;
  }
  o << "seconds_total=" << total << '\n';
  return o.str();
}

}  // namespace gmsurf
