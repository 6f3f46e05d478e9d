#include "metacurv/hawkins.hpp"

namespace metacurv {

void FrameForm2::add(int a, int b, const ScalarExpr& v) {
  if (v.is_zero() || a == b) return;
  int sa = a, sb = b;
  bool flip = false;
  if (sa > sb) {
    std::swap(sa, sb);
    flip = true;
  }
  auto key = std::make_pair(sa, sb);
  auto it = c.find(key);
  ScalarExpr val = flip ? -v : v;
  if (it == c.end())
    c.emplace(key, val);
  else {
    it->second += val;
    if (it->second.is_zero()) c.erase(it);
  }
}

ScalarExpr FrameForm2::component(int a, int b) const {
  if (a == b) return ScalarExpr();
  bool flip = a > b;
  auto it = c.find(flip ? std::make_pair(b, a) : std::make_pair(a, b));
  if (it == c.end()) return ScalarExpr();
  return flip ? -it->second : it->second;
}

bool FrameForm2::is_zero() const {
  for (const auto& [k, v] : c)
    if (!v.is_zero()) return false;
  return true;
}

FrameForm2 FrameForm2::operator-(const FrameForm2& o) const {
  FrameForm2 r;
  r.dim = dim;
  r.c = c;
  for (const auto& [k, v] : o.c) {
    auto it = r.c.find(k);
    if (it == r.c.end())
      r.c.emplace(k, -v);
    else {
      it->second -= v;
      if (it->second.is_zero()) r.c.erase(it);
    }
  }
  return r;
}

bool MetacurvatureTensor::is_zero() const {
  for (const auto& [k, v] : comp)
    if (!v.is_zero()) return false;
  return true;
}

bool TensorT::is_zero() const {
  for (const auto& [k, v] : comp)
    if (!v.is_zero()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Hawkins bracket
// ---------------------------------------------------------------------------

namespace {

DiffForm monomial_form(const ChartPtr& chart, const ScalarExpr& c,
                       const IdxSet& idx) {
  DiffForm f(chart);
  f.set_component(idx, c);
  return f;
}

DiffForm d_scalar(const ChartPtr& chart, const ScalarExpr& f) {
  DiffForm df(chart);
  for (int i = 0; i < chart->dim(); ++i) df.set_component({i}, differentiate(f, i));
  return df;
}

// Bracket of two 1-forms:
//   {a,b} = -D_a db - D_b da + d(D_b a) + [a, db]_pi.
DiffForm bracket_one_forms(const ContravariantConnection& d, const DiffForm& a,
                           const DiffForm& b) {
  DiffForm db = exterior_d(b), da = exterior_d(a);
  return -apply_extended(d, a, db) - apply_extended(d, b, da) +
         exterior_d(apply(d, b, a)) +
         koszul_bracket_extended(d.poisson(), a, db);
}

DiffForm term_bracket(const ContravariantConnection& d, const ScalarExpr& c,
                      const IdxSet& i, const ScalarExpr& e, const IdxSet& j) {
  const ChartPtr& chart = d.chart();
  const int p = static_cast<int>(i.size());
  const int q = static_cast<int>(j.size());
  if (p == 0 && q == 0)
    return DiffForm::scalar(chart,
                            d.poisson().pair(d_scalar(chart, c), d_scalar(chart, e)));
  if (p == 0) return apply_extended(d, d_scalar(chart, c), monomial_form(chart, e, j));
  if (q == 0) return -apply_extended(d, d_scalar(chart, e), monomial_form(chart, c, i));
  if (p == 1 && q == 1)
    return bracket_one_forms(d, monomial_form(chart, c, i),
                             monomial_form(chart, e, j));
  if (p == 1) {
    // {s, (e dx_j1) ^ dx_J'} = {s, e dx_j1} ^ dx_J' - (e dx_j1) ^ {s, dx_J'}
    IdxSet j1{j[0]};
    IdxSet jrest(j.begin() + 1, j.end());
    DiffForm first = bracket_one_forms(d, monomial_form(chart, c, i),
                                       monomial_form(chart, e, j1))
                         .wedge(monomial_form(chart, ScalarExpr::constant(1), jrest));
    DiffForm second = monomial_form(chart, e, j1)
                          .wedge(term_bracket(d, c, i, ScalarExpr::constant(1), jrest));
    return first - second;
  }
  // p >= 2: {A ^ B, t} = (-1)^{q (p-1)} {A,t} ^ B + A ^ {B,t},
  // A = c dx_i1 (degree 1), B = dx_I'.
  IdxSet i1{i[0]};
  IdxSet irest(i.begin() + 1, i.end());
  DiffForm first = term_bracket(d, c, i1, e, j)
                       .wedge(monomial_form(chart, ScalarExpr::constant(1), irest));
  DiffForm second = monomial_form(chart, c, i1)
                        .wedge(term_bracket(d, ScalarExpr::constant(1), irest, e, j));
  if ((q * (p - 1)) % 2 == 1) first = -first;
  return first + second;
}

}  // namespace

DiffForm bracket(const ContravariantConnection& d, const DiffForm& sigma,
                 const DiffForm& tau) {
  require_same_chart(d.chart(), sigma.chart());
  require_same_chart(d.chart(), tau.chart());
  if (!d.is_torsion_free())
    throw PreconditionError("the Hawkins bracket needs a torsion-free connection");
  DiffForm out(d.chart());
  for (const auto& [i, c] : sigma.terms())
    for (const auto& [j, e] : tau.terms()) out = out + term_bracket(d, c, i, e, j);
  return out;
}

DiffForm metacurvature_def(const ContravariantConnection& d, const ScalarExpr& f,
                           const DiffForm& alpha, const DiffForm& beta) {
  if (!d.is_flat())
    throw PreconditionError("metacurvature needs a flat connection");
  DiffForm fs = DiffForm::scalar(d.chart(), f);
  return bracket(d, fs, bracket(d, alpha, beta)) -
         bracket(d, bracket(d, fs, alpha), beta) -
         bracket(d, alpha, bracket(d, fs, beta));
}

DiffForm metacurvature_def_cov(const ContravariantConnection& d,
                               const DiffForm& gamma, const DiffForm& alpha,
                               const DiffForm& beta) {
  DiffForm out(d.chart());
  for (const auto& [i, ci] : gamma.terms()) {
    if (i.size() != 1)
      throw PreconditionError("metacurvature slots expect 1-forms");
    ScalarExpr xi = ScalarExpr::coordinate(i[0]);
    out = out + metacurvature_def(d, xi, alpha, beta).scaled(ci);
  }
  return out;
}

DiffForm jacobi_defect(const ContravariantConnection& d, const DiffForm& s,
                       const DiffForm& t, const DiffForm& r) {
  int ds = s.max_degree(), dt = t.max_degree();
  if (!s.is_homogeneous(ds) || !t.is_homogeneous(dt))
    throw PreconditionError("jacobi_defect expects homogeneous first slots");
  DiffForm out = bracket(d, s, bracket(d, t, r)) -
                 bracket(d, bracket(d, s, t), r);
  DiffForm third = bracket(d, t, bracket(d, s, r));
  return (ds * dt) % 2 == 1 ? out + third : out - third;
}

// ---------------------------------------------------------------------------
// Closed formulas in the flat coframe
// ---------------------------------------------------------------------------

namespace {

// W_l^{uv} = dA_l^u/dy_v - dA_l^v/dy_u + sum_m (A_m^u dA_l^v/dx_m -
//            A_m^v dA_l^u/dx_m), the [Y_u, Y_v] coefficient seed.
ScalarExpr w_coeff(const FlatFrame& fr, int l, int u, int v) {
  const int r2 = fr.leaf_dim();
  ScalarExpr s = differentiate(fr.a_sym(l, u), r2 + v) -
                 differentiate(fr.a_sym(l, v), r2 + u);
  for (int m = 0; m < r2; ++m)
    s += fr.a_sym(m, u) * differentiate(fr.a_sym(l, v), m) -
         fr.a_sym(m, v) * differentiate(fr.a_sym(l, u), m);
  return s;
}

void require_usable_frame(const FlatFrame& fr, double tol) {
  if (!fr.symbolic())
    throw PreconditionError("coordinate formulas need a symbolic flat frame");
  if (!fr.verified(tol))
    throw PreconditionError("flat frame failed verification (residual " +
                            std::to_string(fr.residuals().max()) + ")");
}

bool frame_forms_equal(const FrameForm2& a, const FrameForm2& b) {
  return (a - b).is_zero();
}

}  // namespace

MetacurvatureTensor metacurvature_coords(std::shared_ptr<const FlatFrame> frame,
                                         double frame_tol) {
  const FlatFrame& fr = *frame;
  require_usable_frame(fr, frame_tol);
  const int r2 = fr.leaf_dim();
  const int t = fr.transverse_dim();
  const int d = fr.chart()->dim();
  const PoissonStructure& pi = fr.poisson();

  MetacurvatureTensor m;
  m.frame = frame;
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q)
      for (int s = 0; s < d; ++s) {
        FrameForm2 f;
        f.dim = d;
        if (p < r2 && q < r2 && s < r2) {
          for (int l = 0; l < r2; ++l)
            for (int mm = l + 1; mm < r2; ++mm) {
              ScalarExpr v = differentiate(
                  differentiate(differentiate(pi.pi[l][mm], p), q), s);
              f.add(l, mm, -v);
            }
          for (int l = 0; l < r2; ++l)
            for (int u = 0; u < t; ++u) {
              ScalarExpr v = differentiate(
                  differentiate(differentiate(fr.a_sym(l, u), p), q), s);
              f.add(l, r2 + u, v);
            }
          for (int u = 0; u < t; ++u)
            for (int v = u + 1; v < t; ++v) {
              ScalarExpr sum;
              for (int l = 0; l < r2; ++l)
                sum += fr.pi_inv()[s][l] * w_coeff(fr, l, u, v);
              f.add(r2 + u, r2 + v, differentiate(differentiate(sum, p), q));
            }
        }
        m.comp[{p, q, s}] = std::move(f);
      }

  // S3 symmetry of the three contravariant slots is asserted, not imposed.
  for (const auto& [key, val] : m.comp) {
    std::array<int, 3> perm = {key[1], key[0], key[2]};
    if (!frame_forms_equal(val, m.comp[perm])) m.s3_symmetric = false;
    perm = {key[0], key[2], key[1]};
    if (!frame_forms_equal(val, m.comp[perm])) m.s3_symmetric = false;
  }
  return m;
}

TensorT tensor_T(std::shared_ptr<const FlatFrame> frame, double frame_tol) {
  const FlatFrame& fr = *frame;
  require_usable_frame(fr, frame_tol);
  const int r2 = fr.leaf_dim();
  const int t = fr.transverse_dim();
  const int d = fr.chart()->dim();
  const PoissonStructure& pi = fr.poisson();

  TensorT out;
  out.frame = frame;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      FrameForm2 f;
      f.dim = d;
      if (i < r2 && j < r2) {
        for (int k = 0; k < r2; ++k)
          for (int l = k + 1; l < r2; ++l)
            f.add(k, l, -differentiate(differentiate(pi.pi[k][l], i), j));
        for (int k = 0; k < r2; ++k)
          for (int u = 0; u < t; ++u)
            f.add(k, r2 + u,
                  differentiate(differentiate(fr.a_sym(k, u), i), j));
        for (int u = 0; u < t; ++u)
          for (int v = u + 1; v < t; ++v) {
            ScalarExpr sum;
            for (int k = 0; k < r2; ++k)
              sum += fr.pi_inv()[j][k] * w_coeff(fr, k, u, v);
            f.add(r2 + u, r2 + v, differentiate(sum, i));
          }
      }
      out.comp[{i, j}] = std::move(f);
    }
  for (const auto& [key, val] : out.comp)
    if (!frame_forms_equal(val, out.comp[{key[1], key[0]}])) out.symmetric = false;
  return out;
}

DiffForm tensor_T_def(const ContravariantConnection& d, const DiffForm& alpha,
                      const DiffForm& beta) {
  for (int p = 0; p < d.chart()->dim(); ++p) {
    DiffForm dxp = DiffForm::basis(d.chart(), p);
    if (!apply(d, dxp, alpha).is_zero() || !apply(d, dxp, beta).is_zero())
      throw PreconditionError("tensor_T_def expects parallel 1-forms");
  }
  return -apply_extended(d, alpha, exterior_d(beta));
}

DiffForm frame_form_to_coords(const FlatFrame& frame, const FrameForm2& f) {
  const int r2 = frame.leaf_dim();
  std::vector<DiffForm> cof;
  for (int i = 0; i < r2; ++i) cof.push_back(frame.phi(i));
  for (int u = 0; u < frame.transverse_dim(); ++u) cof.push_back(frame.dy(u));
  DiffForm out(frame.chart());
  for (const auto& [key, v] : f.c)
    out = out + cof[key.first].wedge(cof[key.second]).scaled(v);
  return out;
}

FrameForm2 coords_to_frame_form(const FlatFrame& frame, const DiffForm& sigma) {
  const int r2 = frame.leaf_dim();
  const int d = frame.chart()->dim();
  std::vector<VectorField> fr;
  for (int i = 0; i < r2; ++i) fr.push_back(frame.x_field(i));
  for (int u = 0; u < frame.transverse_dim(); ++u) fr.push_back(frame.y_field(u));
  FrameForm2 out;
  out.dim = d;
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      out.add(a, b, pairing(interior_product(fr[a], sigma), fr[b]));
  return out;
}

DTReport check_DT_equals_M(std::shared_ptr<const FlatFrame> frame, double tol) {
  const FlatFrame& fr = *frame;
  MetacurvatureTensor m = metacurvature_coords(frame, tol);
  TensorT t = tensor_T(frame, tol);
  const int r2 = fr.leaf_dim();
  const int d = fr.chart()->dim();
  DTReport rep;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) {
        // (D_{e_a} T)(e_b, e_c): frame elements are parallel, pi# phi_a = d_a,
        // pi# dy = 0 -- so the coefficients differentiate along x_a.
        FrameForm2 lhs;
        lhs.dim = d;
        if (a < r2)
          for (const auto& [key, v] : t.comp[{b, c}].c)
            lhs.add(key.first, key.second, differentiate(v, a));
        FrameForm2 diff = lhs - m.comp[{a, b, c}];
        for (const auto& [key, v] : diff.c) {
          if (v.is_zero()) continue;
          Box box = fr.chart()->box;
          ZeroTest z = equals_zero(v, tol, box);
          rep.max_residual = std::max(rep.max_residual, z.is_zero ? 0.0 : z.max_abs);
          if (!z.is_zero && !z.sampled) rep.max_residual = std::max(rep.max_residual, 1.0);
        }
      }
  rep.ok = rep.max_residual < tol;
  return rep;
}

H3Result h3_check(const PoissonStructure& pi, const Metric& g,
                  std::uint64_t seed) {
  require_same_chart(pi.chart, g.chart());
  const int d = pi.chart->dim();
  ScalarExpr vol = ScalarExpr::apply(Func::Sqrt, g.det());
  IdxSet all(d);
  for (int i = 0; i < d; ++i) all[i] = i;
  DiffForm mu(pi.chart);
  mu.set_component(all, vol);
  DiffForm res = exterior_d(interior_product(pi.as_bivector(), mu));
  H3Result out;
  out.residual = res;
  out.zero = true;
  for (const auto& [idx, c] : res.terms()) {
    ZeroTest z = equals_zero(c, 1e-9, pi.chart->box, seed);
    if (z.sampled) out.sampled = true;
    if (!z.is_zero) out.zero = false;
  }
  return out;
}

// ---------------------------------------------------------------------------

ScalarExpr random_polynomial(const ChartPtr& chart, std::mt19937_64& rng,
                             int max_degree) {
  std::uniform_int_distribution<int> coeff(-2, 2);
  const int d = chart->dim();
  ScalarExpr p = ScalarExpr::constant(coeff(rng));
  if (max_degree >= 1)
    for (int i = 0; i < d; ++i)
      p += ScalarExpr::constant(coeff(rng)) * ScalarExpr::coordinate(i);
  if (max_degree >= 2)
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j)
        p += ScalarExpr::constant(coeff(rng)) *
             (ScalarExpr::coordinate(i) * ScalarExpr::coordinate(j));
  return p;
}

DiffForm random_one_form(const ChartPtr& chart, std::mt19937_64& rng,
                         int max_degree) {
  DiffForm f(chart);
  for (int i = 0; i < chart->dim(); ++i)
    f.set_component({i}, random_polynomial(chart, rng, max_degree));
  return f;
}

HawkinsReport hawkins_conditions(const ContravariantConnection& d,
                                 const Metric* g,
                                 std::shared_ptr<const FlatFrame> frame,
                                 const HawkinsOptions& opts) {
  HawkinsReport rep;
  rep.h1_flat = d.is_flat();
  const ChartPtr& chart = d.chart();

  if (rep.h1_flat && frame && frame->symbolic()) {
    MetacurvatureTensor m = metacurvature_coords(frame, 1e-9);
    rep.h2_metacurvature_zero = m.is_zero();
    rep.h2_method = "coords";
    rep.metacurvature_s3_symmetric = m.s3_symmetric;
    TensorT t = tensor_T(frame, 1e-9);
    rep.tensor_t_zero = t.is_zero();
    DTReport dt = check_DT_equals_M(frame, 1e-6);
    rep.dt_residual = dt.max_residual;
    rep.residuals["dt"] = dt.max_residual;
  } else if (rep.h1_flat) {
    // Sampled fallback over the coordinate coframe and random function
    // slots; sound pointwise but reported as sampled, never proved.
    std::mt19937_64 rng(opts.seed);
    bool zero = true;
    double max_abs = 0.0;
    std::vector<ScalarExpr> slots;
    for (int i = 0; i < chart->dim(); ++i)
      slots.push_back(ScalarExpr::coordinate(i));
    for (int k = 0; k < opts.random_slots; ++k)
      slots.push_back(random_polynomial(chart, rng));
    for (const ScalarExpr& f : slots)
      for (int a = 0; a < chart->dim(); ++a)
        for (int b = a; b < chart->dim(); ++b) {
          DiffForm m = metacurvature_def(d, f, DiffForm::basis(chart, a),
                                         DiffForm::basis(chart, b));
          for (const auto& [idx, c] : m.terms()) {
            ZeroTest z = equals_zero(c, opts.tol, chart->box, opts.seed);
            if (!z.is_zero) zero = false;
            max_abs = std::max(max_abs, z.max_abs);
          }
        }
    rep.h2_metacurvature_zero = zero;
    rep.h2_method = "sampled";
    rep.residuals["h2_sampled_max"] = max_abs;
  }

  if (g != nullptr) {
    H3Result h3 = h3_check(d.poisson(), *g, opts.seed);
    rep.h3_volume_compatible = h3.zero;
    rep.h3_sampled = h3.sampled;
  }

  // Polynomial degree of pi in flat leaf coordinates (symplectic
  // classification); reported for declared-flat charts.
  if (chart->declared_flat) {
    int r2 = chart->leaf_dim >= 0 ? chart->leaf_dim : chart->dim();
    std::vector<int> leaf;
    for (int i = 0; i < r2; ++i) leaf.push_back(i);
    int deg = 0;
    bool poly = true;
    for (int i = 0; i < r2 && poly; ++i)
      for (int j = i + 1; j < r2 && poly; ++j) {
        auto dg = d.poisson().pi[i][j].polynomial_degree(leaf);
        if (!dg)
          poly = false;
        else
          deg = std::max(deg, *dg);
      }
    rep.degree_polynomial = poly;
    if (poly) rep.symplectic_degree = deg;
  }
  return rep;
}

}  // namespace metacurv
