#pragma once

#include "metacurv/hawkins.hpp"

namespace metacurv {

// The linear system equivalent to [T, X_j] = 0 for the leaf components of
// T, with T_i = X_i on the transversal as initial value. Self-contained.
FrobeniusSystem commuting_system(const FlatFrame& frame, int i,
                                 double step = 1e-2, double tol_int = 1e-6);

// Commuting leafwise fields T_i with [T_i, X_j] = 0 and T_i = X_i on the
// transversal, solved leaf by leaf by the Frobenius integrator. Returns one
// vector of leaf-component fields per T_i. Throws PreconditionError when the
// system fails its integrability gate (which happens exactly when the chart
// data violate the tensor-T = 0 hypothesis).
std::vector<std::vector<GridField>> build_commuting_fields(
    const FlatFrame& frame, GridPtr grid, double step = 1e-2,
    double tol_int = 1e-6);

struct ReconstructionResiduals {
  double frame_residual = 0.0;
  double splitting_cross_check = 0.0;
  double commute_tx = 0.0;        // max |[T_i, X_j]|
  double commute_zx = 0.0;        // max |[Z_i, X_j]|
  double commute_zy = 0.0;        // max |[Z_i, Y_u]|
  double gamma_casimir = 0.0;     // leafwise constancy of gamma
  double gamma_integrability = 0.0;
  double a_constancy = 0.0;
  double c_constancy = 0.0;
  double c_jacobi = 0.0;
  double pi_reconstruction = 0.0;
  double d_reconstruction = 0.0;
  std::optional<double> killing;
  double max() const;
};

struct ReconstructionResult {
  std::shared_ptr<const FlatFrame> frame;
  GridPtr grid;
  // Failure marker: empty when the pipeline ran to completion.
  std::string failed_stage;
  std::string failure_detail;

  std::vector<std::vector<GridField>> t_fields;  // t_fields[i][leaf comp]
  std::vector<std::vector<GridField>> z_fields;
  std::vector<std::vector<double>> a;                 // 2r x 2r, antisymmetric
  double a_det = 0.0;
  std::vector<std::vector<std::vector<double>>> c;    // c[i][j][k]
  ReconstructionResiduals residuals;

  bool completed() const { return failed_stage.empty(); }
  bool ok(double tol) const {
    return completed() && residuals.max() < tol && std::abs(a_det) > tol;
  }
};

// The constructive pipeline: flat splitting, dual frame, commuting fields,
// gamma extraction with its integrability identity, the xi system on the
// transversal, Z_i = sum_j xi_ji T_j, and the full residual table
// (pi and D reconstruction, constancy of a and c, Killing when a metric is
// given). Requires a flat, torsion-free F-connection on a split flat chart
// with tensor T = 0; violations are reported in failed_stage.
ReconstructionResult reconstruct(const ContravariantConnection& d, GridPtr grid,
                                 const Metric* g = nullptr, double step = 1e-2,
                                 double tol = 1e-6);

}  // namespace metacurv
