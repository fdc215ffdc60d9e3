#include "gmsurf/meshkit.hpp"
#include "gmsurf/oracle.hpp"
#include "gmsurf/pipeline.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace gmsurf;

namespace {

py::array_t<double> vertices_array(const std::vector<Vec3>& v) {
  py::array_t<double> a({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = v[i][k];
  return a;
}

py::array_t<std::uint32_t> triangles_array(const TriangleMesh& m) {
  py::array_t<std::uint32_t> a({static_cast<py::ssize_t>(m.triangles.size()), py::ssize_t{3}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.triangles.size(); ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = m.triangles[i][k];
  return a;
}

TriangleMesh to_mesh(const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
                     const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& t) {
  if (v.ndim() != 2 || v.shape(1) != 3) throw Error("vertices must have shape (n, 3)");
  if (t.ndim() != 2 || t.shape(1) != 3) throw Error("triangles must have shape (m, 3)");
  TriangleMesh m;
  auto rv = v.unchecked<2>();
  auto rt = t.unchecked<2>();
  for (py::ssize_t i = 0; i < v.shape(0); ++i) m.vertices.emplace_back(rv(i, 0), rv(i, 1), rv(i, 2));
  for (py::ssize_t i = 0; i < t.shape(0); ++i) {
    std::array<std::uint32_t, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      if (rt(i, k) < 0 || rt(i, k) >= v.shape(0)) throw Error("triangle index out of range");
      tri[k] = static_cast<std::uint32_t>(rt(i, k));
    }
    m.triangles.push_back(tri);
  }
  return m;
}

py::dict report_dict(const MeshReport& r) {
  py::dict d;
  d["vertices"] = r.vertices;
  d["triangles"] = r.triangles;
  d["non_manifold_edges"] = r.non_manifold_edges;
  d["non_manifold_vertices"] = r.non_manifold_vertices;
  d["boundary_edges"] = r.boundary_edges;
  d["orientation_conflicts"] = r.orientation_conflicts;
  d["intersecting_pairs"] = r.intersecting_pairs;
  d["degenerate_triangles"] = r.degenerate_triangles;
  d["defects"] = r.defects();
  d["closed"] = r.closed();
  d["area"] = r.area;
  d["volume"] = r.volume;
  d["vertex_density"] = r.vertex_density;
  d["euler_characteristic"] = r.euler_characteristic;
  d["components"] = r.components;
  d["min_angle_deg"] = r.min_angle_deg;
  return d;
}

std::vector<Atom> atoms_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& centers,
                             const py::array_t<double, py::array::c_style | py::array::forcecast>& radii) {
  if (centers.ndim() != 2 || centers.shape(1) != 3) throw Error("centers must have shape (n, 3)");
  if (radii.ndim() != 1 || radii.shape(0) != centers.shape(0)) throw Error("radii must have shape (n,)");
  auto c = centers.unchecked<2>();
  auto r = radii.unchecked<1>();
  std::vector<Atom> atoms;
  for (py::ssize_t i = 0; i < centers.shape(0); ++i) {
    if (!(r(i) > 0.0)) throw Error("radius must be positive");
    atoms.push_back({Vec3(c(i, 0), c(i, 1), c(i, 2)), r(i), 0.0});
  }
  return atoms;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian molecular surface meshing";
  // Later registrations are tried first, so the subclass goes last.
  const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  m.def(
      "read_pqr",
      [](const std::string& path) {
        const auto atoms = parse_pqr_file(path);
        std::vector<Vec3> c;
        py::array_t<double> r(static_cast<py::ssize_t>(atoms.size()));
        auto rr = r.mutable_unchecked<1>();
        for (std::size_t i = 0; i < atoms.size(); ++i) c.push_back(atoms[i].center), rr(i) = atoms[i].radius;
        return py::make_tuple(vertices_array(c), r);
      },
      py::arg("path"), "Atom centers (n, 3) and radii (n,) from a PQR file.");

  m.def(
      "mesh",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& centers,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& radii, double decay, double isovalue,
         double tau, double cell, int max_depth, double cutoff_eps, int workers) {
        MeshConfig c;
        c.decay = decay;
        c.isovalue = isovalue;
        c.tau = tau;
        c.cell = cell;
        c.max_depth = max_depth;
        c.cutoff_eps = cutoff_eps;
        c.workers = workers;
        const std::vector<Atom> atoms = atoms_from(centers, radii);
        MeshRun run;
        {
          py::gil_scoped_release release;
          run = run_mesh(atoms, c);
        }
        py::dict report = report_dict(run.report);
        report["leaves"] = run.leaves.leaves.size();
        report["max_leaf_diagonal"] = run.max_leaf_diagonal;
        for (const auto& [stage, sec] : run.seconds) report[py::str("seconds_" + stage)] = sec;
        return py::make_tuple(vertices_array(run.mesh.vertices), triangles_array(run.mesh), report);
      },
      py::arg("centers"), py::arg("radii"), py::arg("decay") = 1.0, py::arg("isovalue") = 1.0, py::arg("tau") = 1e-2,
      py::arg("cell") = 4.0, py::arg("max_depth") = 8, py::arg("cutoff_eps") = 1e-9, py::arg("workers") = 0,
      "Mesh phi = c. Returns (vertices, triangles, report).");

  m.def(
      "check",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
         const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& t, int workers) {
        const TriangleMesh mesh = to_mesh(v, t);
        MeshReport r;
        {
          py::gil_scoped_release release;
          r = full_report(mesh, workers);
        }
        return report_dict(r);
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("workers") = 1,
      "Manifold, self-intersection and metric report of a triangle mesh.");

  m.def(
      "oracle",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& centers,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& radii, double decay, double isovalue,
         double spacing, int workers) {
        const GaussianField f(atoms_from(centers, radii), decay, isovalue);
        const NeighborGrid g(f);
        OracleParams p;
        p.spacing = spacing;
        p.workers = workers;
        TriangleMesh mesh;
        {
          py::gil_scoped_release release;
          mesh = mc_reference(f, g, p);
        }
        return py::make_tuple(vertices_array(mesh.vertices), triangles_array(mesh));
      },
      py::arg("centers"), py::arg("radii"), py::arg("decay") = 1.0, py::arg("isovalue") = 1.0,
      py::arg("spacing") = 0.2, py::arg("workers") = 1, "Reference mesh by marching tetrahedra.");

  m.def(
      "write_off",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
         const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& t) {
        std::ostringstream s;
        write_off(to_mesh(v, t), s);
        return s.str();
      },
      py::arg("vertices"), py::arg("triangles"), "OFF text of a mesh.");

  m.def(
      "read_off",
      [](const std::string& text) {
        std::istringstream s(text);
        const TriangleMesh mesh = read_off(s);
        return py::make_tuple(vertices_array(mesh.vertices), triangles_array(mesh));
      },
      py::arg("text"), "Parse OFF text into (vertices, triangles).");
}
