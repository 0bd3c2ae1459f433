#pragma once

#include <map>
#include <set>
#include <vector>

#include "topogen/core/error.hpp"
#include "topogen/core/grid.hpp"

namespace topogen::simp {

// Per-element material densities; rows follow the image convention
// (top row first), columns run left to right.
using DensityField = Grid;

// Rectangular mesh of unit-square bilinear elements. Node (ix, iy) has
// ix in [0, nelx], iy in [0, nely] with iy = 0 the top row; its id is
// iy * (nelx + 1) + ix and its two DOFs are (2*id, 2*id + 1) for the
// horizontal and vertical displacement (positive y points up).
struct Mesh {
  int nelx = 0;
  int nely = 0;

  Mesh() = default;
  Mesh(int nx, int ny) : nelx(nx), nely(ny) {
    if (nx < 1 || ny < 1) throw ParameterError("Mesh: nelx and nely must be >= 1");
  }

  int node_count() const { return (nelx + 1) * (nely + 1); }
  int dof_count() const { return 2 * node_count(); }
  int element_count() const { return nelx * nely; }

  int node_id(int ix, int iy) const { return iy * (nelx + 1) + ix; }
};

// Constrained DOFs plus a sparse load vector.
struct BoundaryCondition {
  std::set<int> fixed_dofs;
  std::map<int, double> loads;  // dof -> magnitude

  void validate(const Mesh& mesh) const {
    if (static_cast<int>(fixed_dofs.size()) < 3)
      throw ParameterError("BoundaryCondition: need at least 3 fixed DOFs");
    for (int d : fixed_dofs) {
      if (d < 0 || d >= mesh.dof_count())
        throw ParameterError("BoundaryCondition: fixed DOF out of range");
    }
    for (const auto& [d, f] : loads) {
      if (d < 0 || d >= mesh.dof_count())
        throw ParameterError("BoundaryCondition: load DOF out of range");
      if (!std::isfinite(f)) throw DataError("BoundaryCondition: non-finite load");
    }
  }
};

// Default case of the study: left edge fully clamped, unit downward point
// load at the midpoint of the free right edge.
inline BoundaryCondition cantilever_mid_load(const Mesh& mesh) {
  BoundaryCondition bc;
  for (int iy = 0; iy <= mesh.nely; ++iy) {
    int n = mesh.node_id(0, iy);
    bc.fixed_dofs.insert(2 * n);
    bc.fixed_dofs.insert(2 * n + 1);
  }
  int mid = mesh.node_id(mesh.nelx, mesh.nely / 2);
  bc.loads[2 * mid + 1] = -1.0;  // downward
  return bc;
}

struct SimpSettings {
  double vol_frac = 0.5;
  double penal = 3.0;
  double r_min = 1.5;
  double x_min = 0.001;
  int max_iters = 200;
  double change_tol = 0.01;

  void validate() const {
    if (!(vol_frac > 0.0 && vol_frac <= 1.0))
      throw ParameterError("SimpSettings: vol_frac must be in (0, 1]");
    if (!(penal >= 1.0)) throw ParameterError("SimpSettings: penal must be >= 1");
    if (!(r_min > 0.0)) throw ParameterError("SimpSettings: r_min must be > 0");
    if (!(x_min > 0.0 && x_min < 1.0))
      throw ParameterError("SimpSettings: x_min must be in (0, 1)");
    if (max_iters < 1) throw ParameterError("SimpSettings: max_iters must be >= 1");
    if (!(change_tol > 0.0)) throw ParameterError("SimpSettings: change_tol must be > 0");
  }
};

struct OptimizationResult {
  DensityField density;
  std::vector<double> compliance_history;  // c(x_k) per iteration, k = 0 is the start field
  int iterations = 0;
  bool converged = false;
};

}  // namespace topogen::simp
