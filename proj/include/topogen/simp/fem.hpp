#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cmath>
#include <vector>

#include "topogen/core/error.hpp"
#include "topogen/simp/element.hpp"
#include "topogen/simp/types.hpp"

namespace topogen::simp {

// DOF indices of element (ex, ey) in local node order BL, BR, TR, TL,
// matching the ordering element_stiffness() is written for.
inline std::array<int, 8> element_dofs(const Mesh& mesh, int ex, int ey) {
  const int n_bl = mesh.node_id(ex, ey + 1);
  const int n_br = mesh.node_id(ex + 1, ey + 1);
  const int n_tr = mesh.node_id(ex + 1, ey);
  const int n_tl = mesh.node_id(ex, ey);
  return {2 * n_bl, 2 * n_bl + 1, 2 * n_br, 2 * n_br + 1,
          2 * n_tr, 2 * n_tr + 1, 2 * n_tl, 2 * n_tl + 1};
}

// Sparse FE solver for one (mesh, bc) pair. The reduced-system sparsity and
// the symbolic factorization are computed once; per-density solves only
// refill numeric values and refactorize.
class FemSolver {
 public:
  FemSolver(const Mesh& mesh, const BoundaryCondition& bc, double E = 1.0, double nu = 0.3)
      : mesh_(mesh), bc_(bc), ke_(element_stiffness(E, nu)) {
    bc_.validate(mesh_);
    build_structure();
  }

  const Mesh& mesh() const { return mesh_; }
  const BoundaryCondition& bc() const { return bc_; }
  const ElementMatrix& ke() const { return ke_; }
  double last_residual() const { return last_residual_; }

  // Assembles K with per-element factors (x_e)^p and solves K U = F on the
  // free DOFs. Returns the full displacement vector; fixed DOFs are zero.
  Eigen::VectorXd solve(const DensityField& density, double penal) {
    check_density(density);
    if (!(penal >= 1.0)) throw ParameterError("FemSolver: penal must be >= 1");

    // refill numeric values
    double* vals = k_red_.valuePtr();
    std::fill(vals, vals + k_red_.nonZeros(), 0.0);
    for (int ey = 0; ey < mesh_.nely; ++ey) {
      for (int ex = 0; ex < mesh_.nelx; ++ex) {
        const double factor = std::pow(density.at(ey, ex), penal);
        const auto& slots = element_slots_[static_cast<std::size_t>(ey) * mesh_.nelx + ex];
        for (const auto& s : slots) vals[s.value_index] += factor * ke_(s.local_row, s.local_col);
      }
    }

    ldlt_.factorize(k_red_);
    if (ldlt_.info() != Eigen::Success)
      throw SolverError("FemSolver: factorization failed (singular reduced system?)");
    Eigen::VectorXd u_red = ldlt_.solve(f_red_);

    // iterative refinement until the residual contract holds
    const double f_norm = f_red_.norm();
    const double tol = 1e-8 * f_norm;
    double res = (k_red_.selfadjointView<Eigen::Lower>() * u_red - f_red_).norm();
    for (int pass = 0; pass < 3 && res > 0.5 * tol; ++pass) {
      Eigen::VectorXd r = f_red_ - k_red_.selfadjointView<Eigen::Lower>() * u_red;
      u_red += ldlt_.solve(r);
      res = (k_red_.selfadjointView<Eigen::Lower>() * u_red - f_red_).norm();
    }
    if (!(res <= tol) || !u_red.allFinite())
      throw SolverError("FemSolver: residual contract violated (system too ill-conditioned)");
    last_residual_ = res;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(mesh_.dof_count());
    for (int d = 0; d < mesh_.dof_count(); ++d) {
      if (full_to_red_[d] >= 0) u[d] = u_red[full_to_red_[d]];
    }
    return u;
  }

 private:
  struct Slot {
    int value_index;
    std::uint8_t local_row;
    std::uint8_t local_col;
  };

  void check_density(const DensityField& density) const {
    if (density.rows() != mesh_.nely || density.cols() != mesh_.nelx)
      throw DataError("FemSolver: density shape does not match mesh");
    for (std::size_t i = 0; i < density.size(); ++i) {
      if (!std::isfinite(density[i]) || density[i] <= 0.0)
        throw DataError("FemSolver: densities must be finite and positive");
    }
  }

  void build_structure() {
    const int ndof = mesh_.dof_count();
    full_to_red_.assign(ndof, -1);
    int nred = 0;
    for (int d = 0; d < ndof; ++d) {
      if (!bc_.fixed_dofs.count(d)) full_to_red_[d] = nred++;
    }
    if (nred == 0) throw ParameterError("FemSolver: all DOFs fixed");

    f_red_ = Eigen::VectorXd::Zero(nred);
    for (const auto& [d, f] : bc_.loads) {
      if (full_to_red_[d] >= 0) f_red_[full_to_red_[d]] += f;
    }

    // lower-triangle sparsity over all elements
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh_.element_count()) * 40);
    for (int ey = 0; ey < mesh_.nely; ++ey) {
      for (int ex = 0; ex < mesh_.nelx; ++ex) {
        const auto dofs = element_dofs(mesh_, ex, ey);
        for (int a = 0; a < 8; ++a) {
          const int i = full_to_red_[dofs[a]];
          if (i < 0) continue;
          for (int b = 0; b < 8; ++b) {
            const int j = full_to_red_[dofs[b]];
            if (j < 0 || j > i) continue;
            trip.emplace_back(i, j, 0.0);
          }
        }
      }
    }
    k_red_.resize(nred, nred);
    k_red_.setFromTriplets(trip.begin(), trip.end());
    k_red_.makeCompressed();
    ldlt_.analyzePattern(k_red_);

    // map each element-local (a, b) pair to its slot in the value array
    element_slots_.resize(static_cast<std::size_t>(mesh_.element_count()));
    for (int ey = 0; ey < mesh_.nely; ++ey) {
      for (int ex = 0; ex < mesh_.nelx; ++ex) {
        const auto dofs = element_dofs(mesh_, ex, ey);
        auto& slots = element_slots_[static_cast<std::size_t>(ey) * mesh_.nelx + ex];
        slots.reserve(36);
        for (int a = 0; a < 8; ++a) {
          const int i = full_to_red_[dofs[a]];
          if (i < 0) continue;
          for (int b = 0; b < 8; ++b) {
            const int j = full_to_red_[dofs[b]];
            if (j < 0 || j > i) continue;
            const int idx = value_index(i, j);
            slots.push_back({idx, static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)});
          }
        }
      }
    }
  }

  int value_index(int row, int col) const {
    // column-major CSC: binary search the inner indices of column `col`
    const int* outer = k_red_.outerIndexPtr();
    const int* inner = k_red_.innerIndexPtr();
    int lo = outer[col], hi = outer[col + 1];
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (inner[mid] < row) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo >= outer[col + 1] || inner[lo] != row)
      throw Error("FemSolver: internal sparsity lookup failed");
    return lo;
  }

  Mesh mesh_;
  BoundaryCondition bc_;
  ElementMatrix ke_;
  std::vector<int> full_to_red_;
  std::vector<std::vector<Slot>> element_slots_;
  Eigen::SparseMatrix<double> k_red_;
  Eigen::VectorXd f_red_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  double last_residual_ = 0.0;
};

// One-shot convenience wrapper around FemSolver.
inline Eigen::VectorXd assemble_and_solve(const DensityField& density, double penal,
                                          const Mesh& mesh, const BoundaryCondition& bc) {
  FemSolver solver(mesh, bc);
  return solver.solve(density, penal);
}

// Per-element strain energies u_e^T k0 u_e at unit density.
inline Grid element_strain_energies(const Mesh& mesh, const Eigen::VectorXd& u,
                                    const ElementMatrix& ke) {
  if (u.size() != mesh.dof_count()) throw DataError("element_strain_energies: U size mismatch");
  Grid en(mesh.nely, mesh.nelx);
  Eigen::Matrix<double, 8, 1> ue;
  for (int ey = 0; ey < mesh.nely; ++ey) {
    for (int ex = 0; ex < mesh.nelx; ++ex) {
      const auto dofs = element_dofs(mesh, ex, ey);
      for (int a = 0; a < 8; ++a) ue[a] = u[dofs[a]];
      en.at(ey, ex) = ue.dot(ke * ue);
    }
  }
  return en;
}

// Objective c(x) = sum_e (x_e)^p u_e^T k0 u_e.
inline double compliance(const Mesh& mesh, const DensityField& density, const Eigen::VectorXd& u,
                         double penal, const ElementMatrix& ke) {
  if (density.rows() != mesh.nely || density.cols() != mesh.nelx)
    throw DataError("compliance: density shape mismatch");
  const Grid en = element_strain_energies(mesh, u, ke);
  double c = 0.0;
  for (std::size_t i = 0; i < en.size(); ++i) c += std::pow(density[i], penal) * en[i];
  return c;
}

inline double compliance(const Mesh& mesh, const DensityField& density, const Eigen::VectorXd& u,
                         double penal) {
  return compliance(mesh, density, u, penal, element_stiffness(1.0, 0.3));
}

// dc/dx_e = -p x_e^(p-1) u_e^T k0 u_e; every entry <= 0.
inline Grid sensitivities(const Mesh& mesh, const DensityField& density, const Eigen::VectorXd& u,
                          double penal, const ElementMatrix& ke) {
  if (density.rows() != mesh.nely || density.cols() != mesh.nelx)
    throw DataError("sensitivities: density shape mismatch");
  const Grid en = element_strain_energies(mesh, u, ke);
  Grid dc(mesh.nely, mesh.nelx);
  for (std::size_t i = 0; i < dc.size(); ++i)
    dc[i] = -penal * std::pow(density[i], penal - 1.0) * en[i];
  return dc;
}

inline Grid sensitivities(const Mesh& mesh, const DensityField& density, const Eigen::VectorXd& u,
                          double penal) {
  return sensitivities(mesh, density, u, penal, element_stiffness(1.0, 0.3));
}

}  // namespace topogen::simp
