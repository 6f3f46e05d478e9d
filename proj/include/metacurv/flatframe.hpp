#pragma once

#include "metacurv/connection.hpp"
#include "metacurv/frobenius.hpp"

namespace metacurv {

struct FrameResiduals {
  bool symbolic = false;
  double duality = 0.0;
  double parallel_phi = 0.0;
  double parallel_dy = 0.0;
  double bracket_xx = 0.0;
  double bracket_xy = 0.0;
  double bracket_yy = 0.0;
  double max() const {
    double m = duality;
    for (double v : {parallel_phi, parallel_dy, bracket_xx, bracket_xy, bracket_yy})
      m = std::max(m, v);
    return m;
  }
};

// Flat coframe F* = { phi_i = sum_j pi^{ij} (dx_j + sum_u A_j^u dy_u) ; dy_u }
// with dual frame X_i = -H_{x_i}, Y_u = d/dy_u - sum_i A_i^u d/dx_i, over a
// split chart whose leaf block carries the Poisson structure. A is either a
// symbolic table or a numeric solution on a grid.
class FlatFrame {
 public:
  FlatFrame(ContravariantConnection conn, int leaf_dim,
            std::vector<std::vector<ScalarExpr>> a_symbolic);
  FlatFrame(ContravariantConnection conn, int leaf_dim,
            std::vector<std::vector<GridField>> a_numeric, GridPtr grid);

  const ContravariantConnection& conn() const { return conn_; }
  const PoissonStructure& poisson() const { return conn_.poisson(); }
  const ChartPtr& chart() const { return conn_.chart(); }
  int leaf_dim() const { return r2_; }
  int transverse_dim() const { return chart()->dim() - r2_; }
  bool symbolic() const { return a_sym_.has_value(); }
  const GridPtr& grid() const { return grid_; }

  // Symbolic leafwise inverse pi^{ij} of the leaf block (pi_ij).
  const SymMatrix& pi_inv() const { return pi_inv_; }

  const ScalarExpr& a_sym(int i, int u) const;
  double a_at(int i, int u, const Point& p) const;
  double a_deriv_at_node(int i, int u, int axis, const std::vector<int>& node,
                         int order = 1) const;

  // Coframe and frame elements (symbolic A only for phi / y_field).
  DiffForm phi(int i) const;
  DiffForm dy(int u) const;
  VectorField x_field(int i) const;  // symbolic always
  VectorField y_field(int u) const;

  const FrameResiduals& residuals() const { return res_; }
  bool verified(double tol) const { return res_.max() < tol; }

 private:
  void verify_symbolic();
  void verify_numeric();

  ContravariantConnection conn_;
  int r2_;
  std::optional<std::vector<std::vector<ScalarExpr>>> a_sym_;
  std::optional<std::vector<std::vector<GridField>>> a_num_;
  GridPtr grid_;
  SymMatrix pi_inv_;
  FrameResiduals res_;
};

// Checks that the chart is in split form: the first leaf_dim coordinates
// carry pi, all components touching a transverse index vanish, and the leaf
// block is invertible at the base point. Throws PreconditionError otherwise.
void require_split_form(const PoissonStructure& pi, int leaf_dim);

// Symbolic A from a Riemannian metric: -A_i^u = sum_v <dx_i, dy_v> g^{uv},
// where <.,.> is the cometric pairing and (g^{uv}) inverts the transverse
// pairing block. The induced horizontal space is the cometric orthogonal of
// Ker pi#.
std::vector<std::vector<ScalarExpr>> riemannian_A(const Metric& g, int leaf_dim);

struct SplittingResult {
  std::shared_ptr<FlatFrame> frame;
  std::vector<std::vector<GridField>> a;  // a[i][u], empty when no transverse
  double integrability = 0.0;
  double cross_check = 0.0;  // max |numeric - symbolic| when an oracle was given
};

// Solves the horizontal-splitting system
//   dB_j^u/dx_i = sum_k (sum_l pi^{il} Gamma_lj^k) B_k^u - sum_l pi^{il} Gamma_lj^u
// with initial value h0_tilt at the base point, by the Frobenius integrator.
// Preconditions: split chart with constant invertible leaf block (when a
// transverse direction exists), D flat and torsion-free. When `oracle` is
// supplied the numeric solution is compared against it on the grid.
// The splitting system for one transverse direction u: unknowns B_j^u over
// the leaf axes, with the H0 tilt column as initial value. Self-contained
// (owns its coefficient data), so it can be audited independently.
FrobeniusSystem splitting_system(const ContravariantConnection& d, int u,
                                 std::vector<double> h0_column,
                                 double step = 1e-2);

SplittingResult flat_splitting(
    const ContravariantConnection& d, GridPtr grid,
    const std::vector<std::vector<double>>& h0_tilt = {},
    const std::optional<std::vector<std::vector<ScalarExpr>>>& oracle = {},
    double step = 1e-2);

// Symbolic frame for charts that are already flat: A from the metric when
// one is given (Riemannian route), identically zero otherwise (and empty for
// symplectic charts). Throws if the resulting frame is not parallel.
FlatFrame make_symbolic_frame(const ContravariantConnection& d,
                              const Metric* g = nullptr);

}  // namespace metacurv
