#pragma once

#include <Eigen/Dense>

#include "metacurv/gridfield.hpp"

namespace metacurv {

// Linear total PDE system  dB/dx_a = Gamma_a(x) B + Y_a(x)  over the active
// axes, with the remaining axes as parameters. Coefficients are evaluated at
// full chart points; the initial vector is taken on the slice where every
// active axis sits at its base node.
struct FrobeniusSystem {
  int size = 0;                 // unknown vector length m
  std::vector<int> axes;        // active axes, in integration order
  std::vector<std::function<Eigen::MatrixXd(const Point&)>> gamma;  // per axis
  std::vector<std::function<Eigen::VectorXd(const Point&)>> rhs;    // per axis
  std::function<Eigen::VectorXd(const Point&)> initial;
  double step = 1e-2;           // integrator step bound
  double tol_int = 1e-6;        // integrability gate for solve()
};

// Max-norm of the Frobenius integrability conditions
//   Gamma_a Gamma_b + d_b Gamma_a - Gamma_b Gamma_a - d_a Gamma_b  and
//   Gamma_a Y_b + d_b Y_a - Gamma_b Y_a - d_a Y_b
// over all grid nodes and active axis pairs; derivatives by centered
// differences.
double integrability_residual(const FrobeniusSystem& sys, const GridSpec& grid);

// Classical fourth-order single-step integration, sweeping axis by axis
// from the base slice. Requires integrability_residual < tol_int. Returns
// one GridField per unknown component.
std::vector<GridField> solve(const FrobeniusSystem& sys, GridPtr grid);

// solve() with the active axes in reversed order (path-independence audit).
std::vector<GridField> solve_reversed(const FrobeniusSystem& sys, GridPtr grid);

// Max pointwise discrepancy between the two axis orders.
double path_independence_discrepancy(const FrobeniusSystem& sys, GridPtr grid);

}  // namespace metacurv
