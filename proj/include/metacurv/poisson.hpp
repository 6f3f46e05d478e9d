#pragma once

#include <array>
#include <map>
#include <optional>

#include "metacurv/forms.hpp"

namespace metacurv {

// Poisson tensor on a chart, stored as the full antisymmetric matrix of
// pi_ij = pi(dx_i, dx_j).
struct PoissonStructure {
  ChartPtr chart;
  std::vector<std::vector<ScalarExpr>> pi;

  // Builds from a list of (i, j, expr) entries; the transpose entries are
  // filled by antisymmetry, and conflicting entries are rejected.
  static PoissonStructure from_entries(
      ChartPtr chart,
      const std::vector<std::tuple<int, int, ScalarExpr>>& entries);

  const ScalarExpr& component(int i, int j) const { return pi[i][j]; }
  MultiVector as_bivector() const;

  // pi(alpha, beta) for 1-forms.
  ScalarExpr pair(const DiffForm& alpha, const DiffForm& beta) const;

  bool antisymmetric() const;  // exact normal-form check
};

// Anchor map: beta(anchor(alpha)) = pi(alpha, beta); in components
// (pi# alpha)^j = sum_i alpha_i pi_ij.
VectorField anchor(const PoissonStructure& p, const DiffForm& alpha);

// Hamiltonian vector field H_f = pi#(df).
VectorField hamiltonian(const PoissonStructure& p, const ScalarExpr& f);

// Trivector with components sum_l (pi_il d_l pi_jk + pi_jl d_l pi_ki +
// pi_kl d_l pi_ij); identically zero iff pi is Poisson.
MultiVector jacobi_residual(const PoissonStructure& p);

struct RankProfile {
  Point point;
  int rank = 0;
  bool regular = false;
};

// Numeric rank of (pi_ij(p)) via singular values > tol * sigma_max; the
// regular flag probes 8 points within radius 1e-3 of p.
RankProfile rank_at(const PoissonStructure& p, const Point& at, double tol);

// Koszul-Schouten bracket of two 1-forms:
//   [a, b] = L_{pi# a} b - L_{pi# b} a - d(pi(a, b)).
DiffForm koszul_bracket(const PoissonStructure& p, const DiffForm& alpha,
                        const DiffForm& beta);

// Extension of [alpha, .] (alpha a 1-form) to forms of any degree as a
// degree-0 derivation of the wedge, with [alpha, f] = (pi# alpha)(f).
DiffForm koszul_bracket_extended(const PoissonStructure& p,
                                 const DiffForm& alpha, const DiffForm& tau);

// ---------------------------------------------------------------------------

// Action of a finite-dimensional Lie algebra by vector fields together with
// an r-matrix. Structure constants are exact rationals; the sign convention
// flag records whether zeta is a homomorphism ([z_i, z_j] = sum c_ij^k z_k)
// or an anti-homomorphism (opposite sign).
struct LieAlgebraAction {
  ChartPtr chart;
  int n = 0;
  std::vector<std::vector<std::vector<Rational>>> c;  // c[i][j][k]
  std::vector<VectorField> zeta;
  std::vector<std::vector<Rational>> r;  // antisymmetric n x n
  bool anti_homomorphism = false;

  // Checks the declared invariants exactly: antisymmetries, the Jacobi
  // identity on c, the bracket relations of the fundamental fields, and the
  // algebraic CYBE residual of r. Throws PreconditionError on violation.
  void validate() const;
};

// Algebraic Schouten square [r, r] in wedge^3 g, computed from the structure
// constants; empty map means the classical Yang-Baxter equation holds.
std::map<std::array<int, 3>, Rational> cybe_residual(const LieAlgebraAction& a);

// pi^r = zeta(r) = 1/2 sum a_ij zeta_i ^ zeta_j. Rejects actions whose r
// fails the CYBE; the result is verified to satisfy the Jacobi identity.
PoissonStructure build_pi_r(const LieAlgebraAction& a);

}  // namespace metacurv
