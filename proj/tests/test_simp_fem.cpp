#include <catch2/catch_amalgamated.hpp>

#include "simp_oracles.hpp"
#include "topogen/simp/fem.hpp"

using namespace topogen;
using namespace topogen::simp;

namespace {

double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / want.norm();
}

}  // namespace

TEST_CASE("single element matches dense oracle", "[simp][fem]") {
  Mesh mesh(1, 1);
  BoundaryCondition bc = cantilever_mid_load(mesh);  // clamps left nodes, loads right
  DensityField x(1, 1, 1.0);

  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(x, 3.0);
  const Eigen::VectorXd ref = oracle::dense_solve(mesh, bc, x, 3.0);
  CHECK(rel_err(u, ref) <= 1e-9);
  for (int d : bc.fixed_dofs) CHECK(u[d] == 0.0);
}

TEST_CASE("4x4 mesh with graded density matches dense oracle", "[simp][fem]") {
  Mesh mesh(4, 4);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  DensityField x(4, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.2 + 0.05 * static_cast<double>(i);

  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(x, 3.0);
  const Eigen::VectorXd ref = oracle::dense_solve(mesh, bc, x, 3.0);
  CHECK(rel_err(u, ref) <= 1e-9);
}

TEST_CASE("residual contract holds on the reduced system", "[simp][fem]") {
  Mesh mesh(8, 6);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  DensityField x(6, 8, 0.4);
  FemSolver solver(mesh, bc);
  solver.solve(x, 3.0);
  CHECK(solver.last_residual() <= 1e-8);  // ||F|| = 1 here
}

TEST_CASE("uniform density scaling scales displacements by 1/s^p", "[simp][fem]") {
  Mesh mesh(3, 2);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  const double p = 3.0, s = 1.7;
  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u1 = solver.solve(DensityField(2, 3, 0.5), p);
  const Eigen::VectorXd u2 = solver.solve(DensityField(2, 3, 0.5 * s), p);
  CHECK(rel_err(u2, Eigen::VectorXd(u1 / std::pow(s, p))) <= 1e-12);
}

TEST_CASE("mid-edge load produces mirror displacement pattern", "[simp][fem]") {
  Mesh mesh(4, 4);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  DensityField x(4, 4, 0.8);
  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(x, 3.0);

  // reflection about the horizontal midline: ux antisymmetric, uy symmetric
  const double scale = u.cwiseAbs().maxCoeff();
  for (int iy = 0; iy <= mesh.nely; ++iy) {
    for (int ix = 0; ix <= mesh.nelx; ++ix) {
      const int a = mesh.node_id(ix, iy);
      const int b = mesh.node_id(ix, mesh.nely - iy);
      CHECK(std::abs(u[2 * a] + u[2 * b]) <= 1e-12 * scale);
      CHECK(std::abs(u[2 * a + 1] - u[2 * b + 1]) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("solver rejects bad inputs", "[simp][fem]") {
  Mesh mesh(2, 2);
  BoundaryCondition bc = cantilever_mid_load(mesh);

  DensityField nan_field(2, 2, 0.5);
  nan_field.at(0, 0) = std::nan("");
  FemSolver solver(mesh, bc);
  CHECK_THROWS_AS(solver.solve(nan_field, 3.0), DataError);

  DensityField wrong_shape(3, 2, 0.5);
  CHECK_THROWS_AS(solver.solve(wrong_shape, 3.0), DataError);

  BoundaryCondition two_dofs;
  two_dofs.fixed_dofs = {0, 1};
  two_dofs.loads[5] = 1.0;
  CHECK_THROWS_AS(FemSolver(mesh, two_dofs), ParameterError);

  // three fixed DOFs that leave vertical translation free -> singular
  BoundaryCondition singular;
  singular.fixed_dofs = {2 * mesh.node_id(0, 0), 2 * mesh.node_id(0, 1), 2 * mesh.node_id(0, 2)};
  singular.loads[2 * mesh.node_id(2, 1) + 1] = -1.0;
  FemSolver bad(mesh, singular);
  CHECK_THROWS_AS(bad.solve(DensityField(2, 2, 0.5), 3.0), SolverError);
}

TEST_CASE("compliance equals external work at equilibrium", "[simp][fem]") {
  Mesh mesh(6, 4);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  DensityField x(4, 6);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.3 + 0.1 * ((i * 7) % 5);

  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(x, 3.0);
  const double c = compliance(mesh, x, u, 3.0);

  double work = 0.0;
  for (const auto& [d, f] : bc.loads) work += f * u[d];
  CHECK(std::abs(c - work) <= 1e-9 * c);
  CHECK(c >= 0.0);
}

TEST_CASE("zero load gives zero compliance", "[simp][fem]") {
  Mesh mesh(2, 2);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  bc.loads.clear();
  bc.loads[2 * mesh.node_id(2, 1) + 1] = 0.0;
  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(DensityField(2, 2, 0.5), 3.0);
  CHECK(compliance(mesh, DensityField(2, 2, 0.5), u, 3.0) == 0.0);
}

TEST_CASE("single-element compliance matches dense quadratic form", "[simp][fem]") {
  Mesh mesh(1, 1);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  DensityField x(1, 1, 0.73);
  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(x, 3.0);

  const auto ke = oracle::ke_by_quadrature(1.0, 0.3);
  Eigen::Matrix<double, 8, 1> ue;
  const auto dofs = element_dofs(mesh, 0, 0);
  for (int a = 0; a < 8; ++a) ue[a] = u[dofs[a]];
  const double want = std::pow(0.73, 3.0) * ue.dot(ke * ue);
  const double got = compliance(mesh, x, u, 3.0);
  CHECK(std::abs(got - want) <= 1e-12 * std::abs(want));
}

TEST_CASE("sensitivities are non-positive and match finite differences", "[simp][fem]") {
  Mesh mesh(2, 2);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  DensityField x(2, 2);
  x.at(0, 0) = 0.4;
  x.at(0, 1) = 0.7;
  x.at(1, 0) = 0.55;
  x.at(1, 1) = 0.9;
  const double p = 3.0;

  FemSolver solver(mesh, bc);
  const Eigen::VectorXd u = solver.solve(x, p);
  const Grid sens = sensitivities(mesh, x, u, p);
  for (std::size_t i = 0; i < sens.size(); ++i) CHECK(sens[i] <= 0.0);

  // central differences with the displacement re-solved per perturbation
  const double h = 1e-5;
  for (int ey = 0; ey < 2; ++ey) {
    for (int ex = 0; ex < 2; ++ex) {
      DensityField xp = x, xm = x;
      xp.at(ey, ex) += h;
      xm.at(ey, ex) -= h;
      const double cp = compliance(mesh, xp, solver.solve(xp, p), p);
      const double cm = compliance(mesh, xm, solver.solve(xm, p), p);
      const double fd = (cp - cm) / (2.0 * h);
      CHECK(std::abs(sens.at(ey, ex) - fd) <= 1e-4 * std::abs(fd));
    }
  }
}

TEST_CASE("elements with zero displacement have zero sensitivity", "[simp][fem]") {
  Mesh mesh(2, 2);
  BoundaryCondition bc = cantilever_mid_load(mesh);
  bc.loads.clear();
  bc.loads[2 * mesh.node_id(2, 1) + 1] = 0.0;
  FemSolver solver(mesh, bc);
  DensityField x(2, 2, 0.5);
  const Eigen::VectorXd u = solver.solve(x, 3.0);
  const Grid sens = sensitivities(mesh, x, u, 3.0);
  for (std::size_t i = 0; i < sens.size(); ++i) CHECK(sens[i] == 0.0);
}
