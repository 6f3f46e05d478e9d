#pragma once

#include <optional>

#include "metacurv/poisson.hpp"

namespace metacurv {

using SymMatrix = std::vector<std::vector<ScalarExpr>>;

// Determinant and inverse of small symbolic matrices (Laplace expansion;
// chart dimensions here are tiny).
ScalarExpr sym_det(const SymMatrix& m);
SymMatrix sym_inverse(const SymMatrix& m);

// (pseudo-)Riemannian metric on tangent vectors with the induced cotangent
// pairing <dx_i, dx_j> = g^{ij} computed on demand.
class Metric {
 public:
  Metric(ChartPtr chart, SymMatrix g, bool pseudo = false);

  const ChartPtr& chart() const { return chart_; }
  const SymMatrix& g() const { return g_; }
  const SymMatrix& cometric() const;
  bool pseudo() const { return pseudo_; }

  // <alpha, beta> for 1-forms (cometric pairing).
  ScalarExpr pair(const DiffForm& alpha, const DiffForm& beta) const;

  ScalarExpr det() const { return sym_det(g_); }

 private:
  ChartPtr chart_;
  SymMatrix g_;
  bool pseudo_;
  mutable std::optional<SymMatrix> cometric_;
};

struct TorsionTensor {
  ChartPtr chart;
  std::vector<std::vector<std::vector<ScalarExpr>>> t;  // t[i][j][k]
  bool is_zero() const;
};

struct CurvatureTensor {
  ChartPtr chart;
  std::vector<std::vector<std::vector<std::vector<ScalarExpr>>>> r;  // r[i][j][k][l]
  bool is_zero() const;
};

// Contravariant connection given by its Christoffel table
// D_{dx_i} dx_j = sum_k Gamma_ij^k dx_k over a Poisson structure.
class ContravariantConnection {
 public:
  ContravariantConnection(PoissonStructure pi,
                          std::vector<std::vector<std::vector<ScalarExpr>>> gamma);

  const ChartPtr& chart() const { return pi_.chart; }
  const PoissonStructure& poisson() const { return pi_; }
  const ScalarExpr& gamma(int i, int j, int k) const { return gamma_[i][j][k]; }

  bool is_torsion_free() const;
  bool is_flat() const;

 private:
  PoissonStructure pi_;
  std::vector<std::vector<std::vector<ScalarExpr>>> gamma_;
  mutable std::optional<bool> torsion_free_, flat_;
};

// D_alpha beta for 1-forms:
//   (D_alpha beta)_k = sum_{i,j} alpha_i beta_j Gamma_ij^k + (pi# alpha)(beta_k).
DiffForm apply(const ContravariantConnection& d, const DiffForm& alpha,
               const DiffForm& beta);

// Extension of D_alpha to forms of any degree as a degree-0 derivation of
// the wedge with D_alpha f = (pi# alpha)(f).
DiffForm apply_extended(const ContravariantConnection& d, const DiffForm& alpha,
                        const DiffForm& sigma);

// T_ij^k = Gamma_ij^k - Gamma_ji^k - d pi_ij / d x_k.
TorsionTensor torsion(const ContravariantConnection& d);

// R_ijk^l = sum_m Gamma_im^l Gamma_jk^m - Gamma_jm^l Gamma_ik^m
//           + pi_im d_m Gamma_jk^l - pi_jm d_m Gamma_ik^l
//           - (d pi_ij / d x_m) Gamma_mk^l.
CurvatureTensor curvature(const ContravariantConnection& d);

// The unique torsion-free metric-compatible contravariant connection, from
// the contravariant Koszul formula. Requires g positive-definite at the
// chart base point (or invertible, in pseudo mode).
ContravariantConnection levi_civita_contravariant(const PoissonStructure& pi,
                                                  const Metric& g);

// D^r_alpha beta = sum_ij a_ij alpha(zeta_i) L_{zeta_j} beta, converted to a
// Christoffel table. Requires pi = pi^r(action); the result is checked to be
// flat and torsion-free.
ContravariantConnection build_Dr(const LieAlgebraAction& action,
                                 const PoissonStructure& pi);

struct FConnectionReport {
  bool ok = true;
  double max_residual = 0.0;
  Point worst_point;
};

// Checks D_a = 0 for numerically computed kernel covectors a of pi# at each
// point of the region. Points must be regular.
FConnectionReport is_f_connection(const ContravariantConnection& d,
                                  const std::vector<Point>& region, double tol);

struct KernelStabilityReport {
  bool ok = true;
  double max_anchor_residual = 0.0;  // |pi#(D_alpha beta)|
  double max_lie_residual = 0.0;     // |D_alpha beta - L_{pi# alpha} beta|
};

// For numerically continued kernel covector fields beta: checks
// pi#(D_alpha beta) = 0 and D_alpha beta = L_{pi# alpha} beta on the region.
// alpha ranges over the coordinate coframe plus any supplied extras.
KernelStabilityReport kernel_stability_check(
    const ContravariantConnection& d, const std::vector<Point>& region,
    double tol, const std::vector<DiffForm>& extra_alphas = {});

// nabla_{pi# alpha} pi# beta = pi#(D_alpha beta).
VectorField induced_partial_connection(const ContravariantConnection& d,
                                       const DiffForm& alpha,
                                       const DiffForm& beta);

}  // namespace metacurv
