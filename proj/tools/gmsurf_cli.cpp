// gmsurf: Gaussian molecular surface meshing from the command line.
//
// Exit codes: 0 clean, 2 the mesh has defects, 1 anything went wrong.

#include "gmsurf/meshkit.hpp"
#include "gmsurf/oracle.hpp"
#include "gmsurf/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace gmsurf;

namespace {

struct Options {
  std::string in, out;
  MeshConfig mesh;
  double spacing = 0.2;
  double memory_cap_mb = 1024;
  bool no_intersections = false;
};

void add_field_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--in", o.in, "input PQR file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--decay", o.mesh.decay, "Gaussian decay rate D")->capture_default_str();
  cmd->add_option("--isovalue", o.mesh.isovalue, "isovalue c")->capture_default_str();
  cmd->add_option("--cutoff-eps", o.mesh.cutoff_eps, "kernel truncation, relative to c")->capture_default_str();
  cmd->add_option("--workers", o.mesh.workers, "worker threads, 0 for all cores")
      ->envname("GMSURF_WORKERS")
      ->capture_default_str();
}

int summarize(const MeshReport& r) {
  std::fprintf(stderr, "%zu vertices, %zu triangles; defects: %zu non-manifold edges, %zu non-manifold vertices, "
               "%zu intersecting pairs\n",
               r.vertices, r.triangles, r.non_manifold_edges, r.non_manifold_vertices, r.intersecting_pairs);
  if (r.closed())
    std::fprintf(stderr, "area %.6g A^2, volume %.6g A^3, Euler characteristic %ld, %zu component(s)\n", r.area,
                 r.volume, r.euler_characteristic, r.components);
  return r.defects() == 0 ? 0 : 2;
}

int cmd_mesh(const Options& o) {
  o.mesh.validate();
  const MeshRun run = run_mesh(parse_pqr_file(o.in), o.mesh);
  if (!o.out.empty()) write_off(run.mesh, o.out);
  std::cout << report_text(run);
  std::fprintf(stderr, "%zu atoms, %zu leaves\n", run.atoms, run.leaves.leaves.size());
  return summarize(run.report);
}

int cmd_check(const Options& o, bool intersections) {
  const TriangleMesh m = read_off(o.in);
  MeshReport r = intersections ? full_report(m, o.mesh.workers) : check_manifold(m);
  if (!intersections && r.closed()) r = metrics(m);
  std::cout << report_text(r);
  return summarize(r);
}

int cmd_oracle(const Options& o) {
  const GaussianField field(parse_pqr_file(o.in), o.mesh.decay, o.mesh.isovalue, o.mesh.cutoff_eps);
  const NeighborGrid grid(field);
  OracleParams p;
  p.spacing = o.spacing;
  p.memory_cap = static_cast<std::size_t>(o.memory_cap_mb * 1048576.0);
  p.workers = o.mesh.workers;
  const TriangleMesh m = mc_reference(field, grid, p);
  write_off(m, o.out);
  const MeshReport r = full_report(m, o.mesh.workers);
  std::cout << report_text(r);
  return summarize(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian molecular surface meshing"};
  app.require_subcommand(1);
  Options o;

  CLI::App* mesh = app.add_subcommand("mesh", "mesh the surface phi = c of a PQR file");
  add_field_flags(mesh, o);
  mesh->add_option("--out", o.out, "output OFF file");
  mesh->add_option("--tau", o.mesh.tau, "error tolerance")->capture_default_str();
  mesh->add_option("--cell", o.mesh.cell, "initial cube edge in Angstrom")->capture_default_str();
  mesh->add_option("--max-depth", o.mesh.max_depth, "maximum subdivision depth")->capture_default_str();
  mesh->add_flag("--no-intersections", o.no_intersections, "skip the self-intersection check");

  CLI::App* check = app.add_subcommand("check", "validate an OFF mesh: manifoldness, self-intersections, metrics");
  check->add_option("--in", o.in, "input OFF file")->required()->check(CLI::ExistingFile);
  check->add_option("--workers", o.mesh.workers, "worker threads, 0 for all cores")->envname("GMSURF_WORKERS");

  CLI::App* stats = app.add_subcommand("stats", "area, volume, density and topology of an OFF mesh");
  stats->add_option("--in", o.in, "input OFF file")->required()->check(CLI::ExistingFile);

  CLI::App* oracle = app.add_subcommand("oracle", "reference mesh by marching tetrahedra on a uniform grid");
  add_field_flags(oracle, o);
  oracle->add_option("--out", o.out, "output OFF file")->required();
  oracle->add_option("--spacing", o.spacing, "grid spacing in Angstrom")->capture_default_str();
  oracle->add_option("--memory-cap-mb", o.memory_cap_mb, "refuse grids larger than this")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    o.mesh.check_intersections = !o.no_intersections;
    if (*mesh) return cmd_mesh(o);
    if (*check) return cmd_check(o, true);
    if (*stats) return cmd_check(o, false);
    if (*oracle) return cmd_oracle(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
