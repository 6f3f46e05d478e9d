#pragma once

#include <array>
#include <random>

#include "metacurv/flatframe.hpp"

namespace metacurv {

// 2-form expressed in a flat coframe basis {phi_0..phi_{2r-1}, dy_0..}.
struct FrameForm2 {
  int dim = 0;
  std::map<std::pair<int, int>, ScalarExpr> c;  // keys a < b

  void add(int a, int b, const ScalarExpr& v);
  ScalarExpr component(int a, int b) const;  // signed
  bool is_zero() const;
  FrameForm2 operator-(const FrameForm2& o) const;
};

// Metacurvature in the flat coframe; components for every slot triple, the
// dy slots being zero. The S3 symmetry of the three slots is checked, not
// imposed.
struct MetacurvatureTensor {
  std::shared_ptr<const FlatFrame> frame;
  std::map<std::array<int, 3>, FrameForm2> comp;
  bool s3_symmetric = true;
  bool is_zero() const;
};

struct TensorT {
  std::shared_ptr<const FlatFrame> frame;
  std::map<std::array<int, 2>, FrameForm2> comp;
  bool symmetric = true;
  bool is_zero() const;
};

// The unique bracket on forms extending {f,g} = pi(df,dg) and
// {f,sigma} = D_df sigma, with d a derivation and the graded product rule.
// Requires a torsion-free connection.
DiffForm bracket(const ContravariantConnection& d, const DiffForm& sigma,
                 const DiffForm& tau);

// M(df, alpha, beta) = {f,{alpha,beta}} - {{f,alpha},beta} - {alpha,{f,beta}}.
// Requires a flat (and torsion-free) connection.
DiffForm metacurvature_def(const ContravariantConnection& d, const ScalarExpr& f,
                           const DiffForm& alpha, const DiffForm& beta);

// Tensorial extension of the first slot to arbitrary 1-forms.
DiffForm metacurvature_def_cov(const ContravariantConnection& d,
                               const DiffForm& gamma, const DiffForm& alpha,
                               const DiffForm& beta);

// Closed coordinate formula for M in a verified symbolic flat coframe.
MetacurvatureTensor metacurvature_coords(std::shared_ptr<const FlatFrame> frame,
                                         double frame_tol = 1e-9);

// Closed coordinate formula for T, same frame requirements.
TensorT tensor_T(std::shared_ptr<const FlatFrame> frame, double frame_tol = 1e-9);

// T by its definition: -D_alpha d beta for parallel alpha, beta (checked).
DiffForm tensor_T_def(const ContravariantConnection& d, const DiffForm& alpha,
                      const DiffForm& beta);

// Graded Jacobi combination
//   {s,{t,r}} - {{s,t},r} - (-1)^{deg s deg t} {t,{s,r}}
// for homogeneous s and t.
DiffForm jacobi_defect(const ContravariantConnection& d, const DiffForm& s,
                       const DiffForm& t, const DiffForm& r);

DiffForm frame_form_to_coords(const FlatFrame& frame, const FrameForm2& f);
FrameForm2 coords_to_frame_form(const FlatFrame& frame, const DiffForm& sigma);

struct DTReport {
  double max_residual = 0.0;
  bool ok = false;
};

// Residual of D T = M over all frame slot triples.
DTReport check_DT_equals_M(std::shared_ptr<const FlatFrame> frame, double tol);

struct H3Result {
  bool zero = false;
  bool sampled = false;
  DiffForm residual;
  H3Result() : residual(nullptr) {}
};

// d(i_pi mu) for mu = sqrt(det g) dx_1 ^ ... ^ dx_d.
H3Result h3_check(const PoissonStructure& pi, const Metric& g,
                  std::uint64_t seed = kDefaultSeed);

struct HawkinsReport {
  bool h1_flat = false;
  std::optional<bool> h2_metacurvature_zero;
  std::string h2_method;  // "coords" or "sampled"
  std::optional<bool> h3_volume_compatible;
  bool h3_sampled = false;
  std::optional<bool> tensor_t_zero;
  std::optional<int> symplectic_degree;  // degree of pi in flat leaf coords
  bool degree_polynomial = true;
  bool metacurvature_s3_symmetric = true;
  double dt_residual = 0.0;
  std::map<std::string, double> residuals;

  bool conditions_hold() const {
    if (!h1_flat) return false;
    if (h2_metacurvature_zero && !*h2_metacurvature_zero) return false;
    if (h3_volume_compatible && !*h3_volume_compatible) return false;
    return true;
  }
};

struct HawkinsOptions {
  double tol = 1e-9;
  std::uint64_t seed = kDefaultSeed;
  int random_slots = 20;
};

// Runs flatness, metacurvature (coordinate formula through the frame when
// one is available, else the sampled definition route), the volume
// compatibility check (when a metric is given), the T classification, and
// the polynomial degree of pi for declared-flat symplectic charts.
HawkinsReport hawkins_conditions(const ContravariantConnection& d,
                                 const Metric* g,
                                 std::shared_ptr<const FlatFrame> frame,
                                 const HawkinsOptions& opts = {});

// Seeded random polynomial in the chart coordinates (total degree <= 2,
// small integer coefficients); used by property tests and the sampled
// fallback.
ScalarExpr random_polynomial(const ChartPtr& chart, std::mt19937_64& rng,
                             int max_degree = 2);
DiffForm random_one_form(const ChartPtr& chart, std::mt19937_64& rng,
                         int max_degree = 2);

}  // namespace metacurv
