#include "metacurv/flatframe.hpp"

#include <Eigen/Dense>
#include <random>

namespace metacurv {

namespace {

// Magnitude of a symbolic residual: exact zero short-circuits; otherwise the
// max over the base point and a few seeded points of the chart box.
double sup_probe(const ScalarExpr& e, const ChartPtr& chart) {
  if (e.is_zero()) return 0.0;
  std::mt19937_64 rng(kDefaultSeed ^ 0xabcdef12u);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double m = 0.0;
  int used = 0;
  for (int k = 0; k < 9 && used < 8; ++k) {
    Point p(chart->dim());
    if (k == 0) {
      p = chart->base;
    } else {
      for (int a = 0; a < chart->dim(); ++a) {
        auto [lo, hi] = chart->box.axes[a];
        p[a] = lo + (hi - lo) * uni(rng);
      }
    }
    try {
      m = std::max(m, std::abs(e.eval(p)));
      ++used;
    } catch (const PoleError&) {
    }
  }
  return used > 0 ? m : 1.0;
}

double sup_probe_field(const VectorField& v) {
  double m = 0.0;
  for (const auto& [idx, c] : v.terms())
    m = std::max(m, sup_probe(c, v.chart()));
  return m;
}

double sup_probe_form(const DiffForm& v) {
  double m = 0.0;
  for (const auto& [idx, c] : v.terms())
    m = std::max(m, sup_probe(c, v.chart()));
  return m;
}

}  // namespace

void require_split_form(const PoissonStructure& pi, int leaf_dim) {
  const int d = pi.chart->dim();
  if (leaf_dim <= 0 || leaf_dim > d || leaf_dim % 2 != 0)
    throw PreconditionError("split chart needs an even positive leaf dimension");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if ((i >= leaf_dim || j >= leaf_dim) && !pi.pi[i][j].is_zero())
        throw PreconditionError(
            "Poisson tensor is not supported on the leaf block");
  Eigen::MatrixXd m(leaf_dim, leaf_dim);
  for (int i = 0; i < leaf_dim; ++i)
    for (int j = 0; j < leaf_dim; ++j)
      m(i, j) = pi.pi[i][j].eval(pi.chart->base);
  if (std::abs(m.determinant()) < 1e-12)
    throw PreconditionError("leaf block of pi is singular at the base point");
}

FlatFrame::FlatFrame(ContravariantConnection conn, int leaf_dim,
                     std::vector<std::vector<ScalarExpr>> a_symbolic)
    : conn_(std::move(conn)), r2_(leaf_dim), a_sym_(std::move(a_symbolic)) {
  require_split_form(conn_.poisson(), r2_);
  SymMatrix block(r2_, std::vector<ScalarExpr>(r2_));
  for (int i = 0; i < r2_; ++i)
    for (int j = 0; j < r2_; ++j) block[i][j] = conn_.poisson().pi[i][j];
  pi_inv_ = sym_inverse(block);
  const int t = transverse_dim();
  if (static_cast<int>(a_sym_->size()) != r2_)
    throw Error("A table leaf rank mismatch");
  for (auto& row : *a_sym_)
    if (static_cast<int>(row.size()) != t) throw Error("A table transverse rank mismatch");
  verify_symbolic();
}

FlatFrame::FlatFrame(ContravariantConnection conn, int leaf_dim,
                     std::vector<std::vector<GridField>> a_numeric, GridPtr grid)
    : conn_(std::move(conn)),
      r2_(leaf_dim),
      a_num_(std::move(a_numeric)),
      grid_(std::move(grid)) {
  require_split_form(conn_.poisson(), r2_);
  SymMatrix block(r2_, std::vector<ScalarExpr>(r2_));
  for (int i = 0; i < r2_; ++i)
    for (int j = 0; j < r2_; ++j) block[i][j] = conn_.poisson().pi[i][j];
  pi_inv_ = sym_inverse(block);
  verify_numeric();
}

const ScalarExpr& FlatFrame::a_sym(int i, int u) const {
  if (!a_sym_) throw PreconditionError("frame carries numeric A only");
  return (*a_sym_)[i][u];
}

double FlatFrame::a_at(int i, int u, const Point& p) const {
  if (a_sym_) return (*a_sym_)[i][u].eval(p);
  return (*a_num_)[i][u].value(p);
}

double FlatFrame::a_deriv_at_node(int i, int u, int axis,
                                  const std::vector<int>& node, int order) const {
  if (a_num_) return (*a_num_)[i][u].derivative_at_node(node, axis, order);
  ScalarExpr e = (*a_sym_)[i][u];
  for (int k = 0; k < order; ++k) e = differentiate(e, axis);
  return e.eval(grid_ ? grid_->point(node) : chart()->base);
}

DiffForm FlatFrame::phi(int i) const {
  if (!a_sym_ && transverse_dim() > 0)
    throw PreconditionError("phi needs a symbolic frame");
  DiffForm f(chart());
  const int t = transverse_dim();
  for (int j = 0; j < r2_; ++j) {
    if (pi_inv_[i][j].is_zero()) continue;
    f.set_component({j}, f.component({j}) + pi_inv_[i][j]);
    for (int u = 0; u < t; ++u) {
      ScalarExpr c = pi_inv_[i][j] * (*a_sym_)[j][u];
      f.set_component({r2_ + u}, f.component({r2_ + u}) + c);
    }
  }
  return f;
}

DiffForm FlatFrame::dy(int u) const { return DiffForm::basis(chart(), r2_ + u); }

VectorField FlatFrame::x_field(int i) const {
  return -anchor(poisson(), DiffForm::basis(chart(), i));
}

VectorField FlatFrame::y_field(int u) const {
  if (!a_sym_) throw PreconditionError("y_field needs a symbolic frame");
  VectorField v = VectorField::basis(chart(), r2_ + u);
  for (int i = 0; i < r2_; ++i)
    v = v - VectorField::basis(chart(), i).scaled((*a_sym_)[i][u]);
  return v;
}

void FlatFrame::verify_symbolic() {
  res_.symbolic = true;
  const int t = transverse_dim();
  const int d = chart()->dim();
  std::vector<DiffForm> cof;
  std::vector<VectorField> fr;
  for (int i = 0; i < r2_; ++i) cof.push_back(phi(i));
  for (int u = 0; u < t; ++u) cof.push_back(dy(u));
  for (int i = 0; i < r2_; ++i) fr.push_back(x_field(i));
  for (int u = 0; u < t; ++u) fr.push_back(y_field(u));

  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      ScalarExpr pr = pairing(cof[a], fr[b]);
      if (a == b) pr = pr - ScalarExpr::constant(1);
      res_.duality = std::max(res_.duality, sup_probe(pr, chart()));
    }

  for (int p = 0; p < d; ++p) {
    DiffForm dxp = DiffForm::basis(chart(), p);
    for (int i = 0; i < r2_; ++i)
      res_.parallel_phi = std::max(
          res_.parallel_phi, sup_probe_form(apply(conn_, dxp, cof[i])));
    for (int u = 0; u < t; ++u)
      res_.parallel_dy = std::max(
          res_.parallel_dy, sup_probe_form(apply(conn_, dxp, dy(u))));
  }

  const PoissonStructure& pi = poisson();
  for (int i = 0; i < r2_; ++i)
    for (int j = 0; j < r2_; ++j) {
      VectorField resid = lie_bracket(fr[i], fr[j]);
      for (int k = 0; k < r2_; ++k)
        resid = resid + fr[k].scaled(differentiate(pi.pi[i][j], k));
      res_.bracket_xx = std::max(res_.bracket_xx, sup_probe_field(resid));
    }
  for (int i = 0; i < r2_; ++i)
    for (int u = 0; u < t; ++u) {
      VectorField resid = lie_bracket(fr[i], fr[r2_ + u]);
      for (int j = 0; j < r2_; ++j)
        resid = resid - fr[j].scaled(differentiate((*a_sym_)[i][u], j));
      res_.bracket_xy = std::max(res_.bracket_xy, sup_probe_field(resid));
    }
  for (int u = 0; u < t; ++u)
    for (int v = 0; v < t; ++v) {
      VectorField resid = lie_bracket(fr[r2_ + u], fr[r2_ + v]);
      for (int i = 0; i < r2_; ++i) {
        ScalarExpr w;
        for (int j = 0; j < r2_; ++j) {
          ScalarExpr inner = differentiate((*a_sym_)[j][u], r2_ + v) -
                             differentiate((*a_sym_)[j][v], r2_ + u);
          for (int k = 0; k < r2_; ++k)
            inner += (*a_sym_)[k][u] * differentiate((*a_sym_)[j][v], k) -
                     (*a_sym_)[k][v] * differentiate((*a_sym_)[j][u], k);
          w += pi_inv_[i][j] * inner;
        }
        resid = resid - fr[i].scaled(w);
      }
      res_.bracket_yy = std::max(res_.bracket_yy, sup_probe_field(resid));
    }
}

void FlatFrame::verify_numeric() {
  res_.symbolic = false;
  const int t = transverse_dim();
  const int d = chart()->dim();
  const PoissonStructure& pi = poisson();
  if (t == 0) return;

  // phi components: leaf m -> pi^{im}; transverse u -> sum_j pi^{ij} A_j^u.
  auto phi_comp = [&](int i, int k, const std::vector<int>& node,
                      const Point& p) -> double {
    if (k < r2_) return pi_inv_[i][k].eval(p);
    double s = 0.0;
    for (int j = 0; j < r2_; ++j)
      s += pi_inv_[i][j].eval(p) * (*a_num_)[j][k - r2_].at(node);
    return s;
  };
  auto dphi_comp = [&](int i, int k, int m, const std::vector<int>& node,
                       const Point& p) -> double {
    if (k < r2_) return differentiate(pi_inv_[i][k], m).eval(p);
    double s = 0.0;
    for (int j = 0; j < r2_; ++j) {
      s += differentiate(pi_inv_[i][j], m).eval(p) * (*a_num_)[j][k - r2_].at(node);
      s += pi_inv_[i][j].eval(p) *
           (*a_num_)[j][k - r2_].derivative_at_node(node, m, 1);
    }
    return s;
  };

  grid_->for_each_node([&](const std::vector<int>& node) {
    Point p = grid_->point(node);
    // D_{dx_q} phi_i residual.
    for (int q = 0; q < d; ++q) {
      for (int i = 0; i < r2_; ++i) {
        for (int k = 0; k < d; ++k) {
          double v = 0.0;
          for (int j = 0; j < d; ++j)
            v += phi_comp(i, j, node, p) * conn_.gamma(q, j, k).eval(p);
          for (int m = 0; m < d; ++m) {
            double pim = pi.pi[q][m].eval(p);
            if (pim != 0.0) v += pim * dphi_comp(i, k, m, node, p);
          }
          res_.parallel_phi = std::max(res_.parallel_phi, std::abs(v));
        }
      }
      for (int u = 0; u < t; ++u)
        for (int k = 0; k < d; ++k)
          res_.parallel_dy = std::max(
              res_.parallel_dy, std::abs(conn_.gamma(q, r2_ + u, k).eval(p)));
    }
    // [X_i, Y_u] - sum_j dA_i^u/dx_j X_j on the grid. Y_u components:
    // -A_m^u on the leaf block, kronecker on the transverse block.
    for (int i = 0; i < r2_; ++i) {
      VectorField xi = x_field(i);
      for (int u = 0; u < t; ++u) {
        for (int k = 0; k < d; ++k) {
          double v = 0.0;
          // X^l d_l Y^k
          for (int l = 0; l < d; ++l) {
            double xl = xi.component({l}).eval(p);
            if (xl == 0.0) continue;
            double dyk = k < r2_ ? -(*a_num_)[k][u].derivative_at_node(node, l, 1)
                                 : 0.0;
            v += xl * dyk;
          }
          // - Y^l d_l X^k
          for (int l = 0; l < d; ++l) {
            double yl = l < r2_ ? -(*a_num_)[l][u].at(node)
                                : (l == r2_ + u ? 1.0 : 0.0);
            if (yl == 0.0) continue;
            v -= yl * differentiate(xi.component({k}), l).eval(p);
          }
          for (int j = 0; j < r2_; ++j)
            v -= (*a_num_)[i][u].derivative_at_node(node, j, 1) *
                 x_field(j).component({k}).eval(p);
          res_.bracket_xy = std::max(res_.bracket_xy, std::abs(v));
        }
      }
    }
  });

  // Leafwise bracket table is symbolic (independent of A).
  for (int i = 0; i < r2_; ++i)
    for (int j = 0; j < r2_; ++j) {
      VectorField resid = lie_bracket(x_field(i), x_field(j));
      for (int k = 0; k < r2_; ++k)
        resid = resid + x_field(k).scaled(differentiate(pi.pi[i][j], k));
      res_.bracket_xx = std::max(res_.bracket_xx, sup_probe_field(resid));
    }
}

std::vector<std::vector<ScalarExpr>> riemannian_A(const Metric& g, int leaf_dim) {
  const int d = g.chart()->dim();
  const int t = d - leaf_dim;
  const SymMatrix& G = g.cometric();
  SymMatrix trans(t, std::vector<ScalarExpr>(t));
  for (int u = 0; u < t; ++u)
    for (int v = 0; v < t; ++v) trans[u][v] = G[leaf_dim + u][leaf_dim + v];
  SymMatrix trans_inv = sym_inverse(trans);
  std::vector<std::vector<ScalarExpr>> a(leaf_dim, std::vector<ScalarExpr>(t));
  for (int i = 0; i < leaf_dim; ++i)
    for (int u = 0; u < t; ++u) {
      ScalarExpr s;
      for (int v = 0; v < t; ++v) s += G[i][leaf_dim + v] * trans_inv[v][u];
      a[i][u] = -s;
    }
  return a;
}

FrobeniusSystem splitting_system(const ContravariantConnection& d, int u,
                                 std::vector<double> h0_column, double step) {
  const ChartPtr& chart = d.chart();
  const int dim = chart->dim();
  const int r2 = chart->leaf_dim >= 0 ? chart->leaf_dim : dim;
  struct Ctx {
    ContravariantConnection d;
    SymMatrix pi_inv;
    int r2;
    int u;
    std::vector<double> h0;
  };
  SymMatrix block(r2, std::vector<ScalarExpr>(r2));
  for (int i = 0; i < r2; ++i)
    for (int j = 0; j < r2; ++j) block[i][j] = d.poisson().pi[i][j];
  auto ctx = std::make_shared<Ctx>(
      Ctx{d, sym_inverse(block), r2, u, std::move(h0_column)});

  FrobeniusSystem sys;
  sys.size = r2;
  for (int i = 0; i < r2; ++i) sys.axes.push_back(i);
  sys.step = step;
  for (int i = 0; i < r2; ++i) {
    sys.gamma.push_back([ctx, i](const Point& p) {
      const int n = ctx->r2;
      Eigen::MatrixXd m(n, n);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int l = 0; l < n; ++l)
            s += ctx->pi_inv[i][l].eval(p) * ctx->d.gamma(l, j, k).eval(p);
          m(j, k) = s;
        }
      return m;
    });
    sys.rhs.push_back([ctx, i](const Point& p) {
      const int n = ctx->r2;
      Eigen::VectorXd y(n);
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += ctx->pi_inv[i][l].eval(p) * ctx->d.gamma(l, j, n + ctx->u).eval(p);
        y(j) = -s;
      }
      return y;
    });
  }
  sys.initial = [ctx](const Point&) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(ctx->r2);
    if (!ctx->h0.empty())
      for (int i = 0; i < ctx->r2; ++i) b(i) = ctx->h0[i];
    return b;
  };
  return sys;
}

SplittingResult flat_splitting(
    const ContravariantConnection& d, GridPtr grid,
    const std::vector<std::vector<double>>& h0_tilt,
    const std::optional<std::vector<std::vector<ScalarExpr>>>& oracle,
    double step) {
  const ChartPtr& chart = d.chart();
  const int dim = chart->dim();
  int r2 = chart->leaf_dim >= 0 ? chart->leaf_dim : dim;
  require_split_form(d.poisson(), r2);
  if (!d.is_flat())
    throw PreconditionError("flat_splitting requires a flat connection");
  if (!d.is_torsion_free())
    throw PreconditionError("flat_splitting requires a torsion-free connection");
  const int t = dim - r2;

  SplittingResult out;
  if (t == 0) {
    out.frame = std::make_shared<FlatFrame>(
        d, r2, std::vector<std::vector<ScalarExpr>>(r2));
    return out;
  }

  // The splitting system is derived for a constant invertible leaf block.
  for (int i = 0; i < r2; ++i)
    for (int j = 0; j < r2; ++j)
      for (int m = 0; m < dim; ++m)
        if (!differentiate(d.poisson().pi[i][j], m).is_zero())
          throw PreconditionError(
              "flat_splitting requires a constant leaf block of pi");

  if (!h0_tilt.empty() &&
      (static_cast<int>(h0_tilt.size()) != r2 ||
       static_cast<int>(h0_tilt[0].size()) != t))
    throw PreconditionError("H0 tilt table has the wrong shape");

  std::vector<std::vector<GridField>> a(r2, std::vector<GridField>(t, GridField(grid)));
  double max_int = 0.0;
  for (int u = 0; u < t; ++u) {
    std::vector<double> h0(r2, 0.0);
    if (!h0_tilt.empty())
      for (int i = 0; i < r2; ++i) h0[i] = h0_tilt[i][u];
    FrobeniusSystem sys = splitting_system(d, u, std::move(h0), step);
    max_int = std::max(max_int, integrability_residual(sys, *grid));
    auto fields = solve(sys, grid);
    for (int i = 0; i < r2; ++i) a[i][u] = std::move(fields[i]);
  }
  out.integrability = max_int;

  if (oracle) {
    double m = 0.0;
    grid->for_each_node([&](const std::vector<int>& node) {
      Point p = grid->point(node);
      for (int i = 0; i < r2; ++i)
        for (int u = 0; u < t; ++u)
          m = std::max(m, std::abs(a[i][u].at(node) - (*oracle)[i][u].eval(p)));
    });
    out.cross_check = m;
    out.frame = std::make_shared<FlatFrame>(d, r2, *oracle);
  } else {
    out.frame = std::make_shared<FlatFrame>(d, r2, a, grid);
  }
  out.a = std::move(a);
  return out;
}

FlatFrame make_symbolic_frame(const ContravariantConnection& d, const Metric* g) {
  const ChartPtr& chart = d.chart();
  const int dim = chart->dim();
  int r2 = chart->leaf_dim >= 0 ? chart->leaf_dim : dim;
  const int t = dim - r2;
  std::vector<std::vector<ScalarExpr>> a(r2, std::vector<ScalarExpr>(t));
  if (t > 0 && g != nullptr) a = riemannian_A(*g, r2);
  FlatFrame frame(d, r2, std::move(a));
  if (!frame.verified(1e-9))
    throw PreconditionError("coordinate frame is not parallel for D");
  return frame;
}

}  // namespace metacurv
