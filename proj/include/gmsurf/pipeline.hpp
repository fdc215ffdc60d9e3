#pragma once

#include "gmsurf/extract.hpp"
#include "gmsurf/meshkit.hpp"
#include "gmsurf/molmodel.hpp"
#include "gmsurf/partition.hpp"

#include <string>
#include <utility>
#include <vector>

namespace gmsurf {

struct MeshConfig {
  double decay = 1.0;     // D
  double isovalue = 1.0;  // c
  double tau = 1e-2;
  double cell = 4.0;      // initial cube edge, Angstrom
  int max_depth = 8;
  double cutoff_eps = 1e-9;
  int workers = 0;        // 0: all cores
  double sagitta = 0.05;
  bool check_intersections = true;

  /// Throws Error naming the first parameter out of range.
  void validate() const;
};

struct MeshRun {
  TriangleMesh mesh;  // Angstrom
  MeshReport report;
  LeafSet leaves;     // in decay-1 coordinates (Angstrom times sqrt(D))
  ExtractStats extract;
  std::size_t atoms = 0;
  double max_leaf_diagonal = 0.0;  // over contoured leaves, Angstrom
  std::vector<std::pair<std::string, double>> seconds;  // per stage, in order
};

/// grid -> refine -> contour -> weld -> validate -> metrics. The field is
/// rescaled to decay 1 before refinement and the mesh scaled back, so tau has
/// the same meaning for every D.
MeshRun run_mesh(const std::vector<Atom>& atoms, const MeshConfig& config);

/// Flat key=value lines describing a run, stable for scripts.
std::string report_text(const MeshRun& run);
std::string report_text(const MeshReport& report);

}  // namespace gmsurf
