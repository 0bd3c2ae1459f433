#pragma once

#include "topogen/simp/fem.hpp"
#include "topogen/simp/filter.hpp"
#include "topogen/simp/oc.hpp"
#include "topogen/simp/types.hpp"

namespace topogen::simp {

// Full SIMP loop: solve -> sensitivities -> filter -> OC update, from a
// uniform start at the target volume fraction, until the max density change
// drops below change_tol or the iteration cap is hit. The compliance history
// holds c(x_k) for k = 0..iterations (entry 0 is the uniform start field).
inline OptimizationResult optimize(const SimpSettings& settings, const Mesh& mesh,
                                   const BoundaryCondition& bc) {
  settings.validate();
  bc.validate(mesh);

  FemSolver solver(mesh, bc);
  const ElementMatrix& ke = solver.ke();

  OptimizationResult result;
  result.density = DensityField(mesh.nely, mesh.nelx, settings.vol_frac);

  for (int it = 1; it <= settings.max_iters; ++it) {
    const Eigen::VectorXd u = solver.solve(result.density, settings.penal);
    const Grid energies = element_strain_energies(mesh, u, ke);

    double c = 0.0;
    Grid sens(mesh.nely, mesh.nelx);
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const double xp = std::pow(result.density[i], settings.penal - 1.0);
      c += result.density[i] * xp * energies[i];
      sens[i] = -settings.penal * xp * energies[i];
    }
    result.compliance_history.push_back(c);

    const Grid filtered = filter_sensitivities(sens, result.density, settings.r_min);
    DensityField next = oc_update(result.density, filtered, settings);

    const double change = max_abs_diff(next, result.density);
    result.density = std::move(next);
    result.iterations = it;
    if (change < settings.change_tol) {
      result.converged = true;
      break;
    }
  }

  // compliance of the final field
  const Eigen::VectorXd u = solver.solve(result.density, settings.penal);
  result.compliance_history.push_back(compliance(mesh, result.density, u, settings.penal, ke));
  return result;
}

}  // namespace topogen::simp
