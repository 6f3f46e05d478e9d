#include "metacurv/connection.hpp"

#include <Eigen/Dense>

namespace metacurv {

ScalarExpr sym_det(const SymMatrix& m) {
  const int n = static_cast<int>(m.size());
  if (n == 0) return ScalarExpr::constant(1);
  if (n == 1) return m[0][0];
  ScalarExpr det;
  for (int j = 0; j < n; ++j) {
    if (m[0][j].is_zero()) continue;
    SymMatrix minor(n - 1, std::vector<ScalarExpr>(n - 1));
    for (int r = 1; r < n; ++r) {
      int cc = 0;
      for (int c = 0; c < n; ++c) {
        if (c == j) continue;
        minor[r - 1][cc++] = m[r][c];
      }
    }
    ScalarExpr term = m[0][j] * sym_det(minor);
    det = j % 2 == 0 ? det + term : det - term;
  }
  return det;
}

SymMatrix sym_inverse(const SymMatrix& m) {
  const int n = static_cast<int>(m.size());
  ScalarExpr det = sym_det(m);
  if (det.is_zero()) throw Error("symbolic matrix is singular");
  SymMatrix inv(n, std::vector<ScalarExpr>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      SymMatrix minor(n - 1, std::vector<ScalarExpr>(n - 1));
      int rr = 0;
      for (int r = 0; r < n; ++r) {
        if (r == i) continue;
        int cc = 0;
        for (int c = 0; c < n; ++c) {
          if (c == j) continue;
          minor[rr][cc++] = m[r][c];
        }
        ++rr;
      }
      ScalarExpr cof = sym_det(minor);
      if ((i + j) % 2 == 1) cof = -cof;
      inv[j][i] = cof / det;  // adjugate transpose
    }
  }
  return inv;
}

Metric::Metric(ChartPtr chart, SymMatrix g, bool pseudo)
    : chart_(std::move(chart)), g_(std::move(g)), pseudo_(pseudo) {
  const int d = chart_->dim();
  if (static_cast<int>(g_.size()) != d)
    throw Error("metric rank does not match chart dimension");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (!(g_[i][j] - g_[j][i]).is_zero())
        throw PreconditionError("metric is not symmetric");
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = g_[i][j].eval(chart_->base);
  if (pseudo_) {
    if (std::abs(m.determinant()) <= 1e-9)
      throw PreconditionError("pseudo metric is degenerate at the base point");
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.eigenvalues().minCoeff() <= 1e-9)
      throw PreconditionError(
          "metric is not positive-definite at the base point");
  }
}

const SymMatrix& Metric::cometric() const {
  if (!cometric_) cometric_ = sym_inverse(g_);
  return *cometric_;
}

ScalarExpr Metric::pair(const DiffForm& alpha, const DiffForm& beta) const {
  require_same_chart(chart_, alpha.chart());
  require_same_chart(chart_, beta.chart());
  const SymMatrix& G = cometric();
  ScalarExpr s;
  for (const auto& [i, ci] : alpha.terms()) {
    if (i.size() != 1) throw PreconditionError("metric pairing expects 1-forms");
    for (const auto& [j, cj] : beta.terms()) {
      if (j.size() != 1)
        throw PreconditionError("metric pairing expects 1-forms");
      s += ci * cj * G[i[0]][j[0]];
    }
  }
  return s;
}

bool TorsionTensor::is_zero() const {
  for (const auto& a : t)
    for (const auto& b : a)
      for (const auto& c : b)
        if (!c.is_zero()) return false;
  return true;
}

bool CurvatureTensor::is_zero() const {
  for (const auto& a : r)
    for (const auto& b : a)
      for (const auto& c : b)
        for (const auto& e : c)
          if (!e.is_zero()) return false;
  return true;
}

ContravariantConnection::ContravariantConnection(
    PoissonStructure pi, std::vector<std::vector<std::vector<ScalarExpr>>> gamma)
    : pi_(std::move(pi)), gamma_(std::move(gamma)) {
  const int d = pi_.chart->dim();
  if (static_cast<int>(gamma_.size()) != d)
    throw Error("Christoffel table rank mismatch");
  for (auto& a : gamma_) {
    if (static_cast<int>(a.size()) != d) throw Error("Christoffel table rank mismatch");
    for (auto& b : a)
      if (static_cast<int>(b.size()) != d)
        throw Error("Christoffel table rank mismatch");
  }
}

bool ContravariantConnection::is_torsion_free() const {
  if (!torsion_free_) torsion_free_ = torsion(*this).is_zero();
  return *torsion_free_;
}

bool ContravariantConnection::is_flat() const {
  if (!flat_) flat_ = curvature(*this).is_zero();
  return *flat_;
}

DiffForm apply(const ContravariantConnection& d, const DiffForm& alpha,
               const DiffForm& beta) {
  require_same_chart(d.chart(), alpha.chart());
  require_same_chart(d.chart(), beta.chart());
  const int n = d.chart()->dim();
  VectorField xa = anchor(d.poisson(), alpha);
  DiffForm out(d.chart());
  for (int k = 0; k < n; ++k) {
    ScalarExpr comp;
    for (const auto& [i, ci] : alpha.terms()) {
      if (i.size() != 1) throw PreconditionError("apply expects 1-forms");
      for (const auto& [j, cj] : beta.terms()) {
        if (j.size() != 1) throw PreconditionError("apply expects 1-forms");
        comp += ci * cj * d.gamma(i[0], j[0], k);
      }
    }
    comp += apply_vector(xa, beta.component({k}));
    out.set_component({k}, comp);
  }
  return out;
}

DiffForm apply_extended(const ContravariantConnection& d, const DiffForm& alpha,
                        const DiffForm& sigma) {
  require_same_chart(d.chart(), alpha.chart());
  require_same_chart(d.chart(), sigma.chart());
  const int n = d.chart()->dim();
  VectorField xa = anchor(d.poisson(), alpha);
  // D_alpha dx_j, once per coordinate.
  std::vector<DiffForm> ddx;
  ddx.reserve(n);
  for (int j = 0; j < n; ++j) {
    DiffForm v(d.chart());
    for (int k = 0; k < n; ++k) {
      ScalarExpr comp;
      for (const auto& [i, ci] : alpha.terms()) {
        if (i.size() != 1) throw PreconditionError("apply expects a 1-form");
        comp += ci * d.gamma(i[0], j, k);
      }
      v.set_component({k}, comp);
    }
    ddx.push_back(std::move(v));
  }
  DiffForm out(d.chart());
  for (const auto& [idx, c] : sigma.terms()) {
    DiffForm base(d.chart());
    base.set_component(idx, ScalarExpr::constant(1));
    out = out + base.scaled(apply_vector(xa, c));
    for (std::size_t t = 0; t < idx.size(); ++t) {
      DiffForm piece = DiffForm::scalar(d.chart(), c);
      for (std::size_t s = 0; s < idx.size(); ++s) {
        if (s == t)
          piece = piece.wedge(ddx[idx[s]]);
        else
          piece = piece.wedge(DiffForm::basis(d.chart(), idx[s]));
      }
      out = out + piece;
    }
  }
  return out;
}

TorsionTensor torsion(const ContravariantConnection& d) {
  const int n = d.chart()->dim();
  TorsionTensor t;
  t.chart = d.chart();
  t.t.assign(n, std::vector<std::vector<ScalarExpr>>(n, std::vector<ScalarExpr>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        t.t[i][j][k] = d.gamma(i, j, k) - d.gamma(j, i, k) -
                       differentiate(d.poisson().component(i, j), k);
  return t;
}

CurvatureTensor curvature(const ContravariantConnection& d) {
  const int n = d.chart()->dim();
  const PoissonStructure& p = d.poisson();
  CurvatureTensor cur;
  cur.chart = d.chart();
  cur.r.assign(n, std::vector<std::vector<std::vector<ScalarExpr>>>(
                      n, std::vector<std::vector<ScalarExpr>>(
                             n, std::vector<ScalarExpr>(n))));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          ScalarExpr s;
          for (int m = 0; m < n; ++m) {
            s += d.gamma(i, m, l) * d.gamma(j, k, m);
            s -= d.gamma(j, m, l) * d.gamma(i, k, m);
            s += p.component(i, m) * differentiate(d.gamma(j, k, l), m);
            s -= p.component(j, m) * differentiate(d.gamma(i, k, l), m);
            s -= differentiate(p.component(i, j), m) * d.gamma(m, k, l);
          }
          cur.r[i][j][k][l] = s;
        }
  return cur;
}

ContravariantConnection levi_civita_contravariant(const PoissonStructure& pi,
                                                  const Metric& g) {
  require_same_chart(pi.chart, g.chart());
  const int n = pi.chart->dim();
  const SymMatrix& G = g.cometric();
  ChartPtr chart = pi.chart;

  std::vector<DiffForm> dx;
  std::vector<VectorField> x;
  for (int i = 0; i < n; ++i) {
    dx.push_back(DiffForm::basis(chart, i));
    x.push_back(anchor(pi, dx.back()));
  }
  std::vector<std::vector<DiffForm>> ks;
  ks.assign(n, std::vector<DiffForm>(n, DiffForm(chart)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ks[i][j] = koszul_bracket(pi, dx[i], dx[j]);

  auto pair_form = [&](const DiffForm& w, int k) {
    ScalarExpr s;
    for (const auto& [ii, c] : w.terms()) s += c * G[ii[0]][k];
    return s;
  };

  ScalarExpr half = ScalarExpr::constant(Rational(1, 2));
  std::vector<std::vector<std::vector<ScalarExpr>>> gamma(
      n, std::vector<std::vector<ScalarExpr>>(n, std::vector<ScalarExpr>(n)));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::vector<ScalarExpr> k_row(n);
      for (int k = 0; k < n; ++k) {
        ScalarExpr s = apply_vector(x[i], G[j][k]) +
                       apply_vector(x[j], G[i][k]) -
                       apply_vector(x[k], G[i][j]);
        s += pair_form(ks[i][j], k) - pair_form(ks[j][k], i) +
             pair_form(ks[k][i], j);
        k_row[k] = half * s;
      }
      // <D_{dx_i} dx_j, dx_k> = sum_l Gamma_ij^l G_lk  =>  Gamma = g . K
      for (int l = 0; l < n; ++l) {
        ScalarExpr s;
        for (int k = 0; k < n; ++k) s += k_row[k] * g.g()[k][l];
        gamma[i][j][l] = s;
      }
    }
  }
  return ContravariantConnection(pi, std::move(gamma));
}

ContravariantConnection build_Dr(const LieAlgebraAction& action,
                                 const PoissonStructure& pi) {
  PoissonStructure pr = build_pi_r(action);
  require_same_chart(pr.chart, pi.chart);
  const int n = pi.chart->dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(pr.pi[i][j] - pi.pi[i][j]).is_zero())
        throw PreconditionError("pi does not equal pi^r of the action");
  // Gamma_pq^k = sum_{i,j} a_ij zeta_i^p d_k zeta_j^q.
  std::vector<std::vector<std::vector<ScalarExpr>>> gamma(
      n, std::vector<std::vector<ScalarExpr>>(n, std::vector<ScalarExpr>(n)));
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int k = 0; k < n; ++k) {
        ScalarExpr s;
        for (int i = 0; i < action.n; ++i)
          for (int j = 0; j < action.n; ++j) {
            if (action.r[i][j] == 0) continue;
            s += ScalarExpr::constant(action.r[i][j]) *
                 action.zeta[i].component({p}) *
                 differentiate(action.zeta[j].component({q}), k);
          }
        gamma[p][q][k] = s;
      }
  ContravariantConnection d(pi, std::move(gamma));
  if (!d.is_torsion_free())
    throw PreconditionError("D^r is not torsion-free for this action");
  if (!d.is_flat()) throw PreconditionError("D^r is not flat for this action");
  return d;
}

namespace {

Eigen::MatrixXd pi_matrix(const PoissonStructure& p, const Point& at) {
  const int d = p.chart->dim();
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = p.pi[i][j].eval(at);
  return m;
}

// Orthonormal basis of { a : pi# a = 0 } at a point (left null space of pi;
// by antisymmetry the null space of the matrix itself).
Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (smax > 0 && sv(i) > tol * smax) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

}  // namespace

FConnectionReport is_f_connection(const ContravariantConnection& d,
                                  const std::vector<Point>& region, double tol) {
  const int n = d.chart()->dim();
  FConnectionReport rep;
  for (const Point& p : region) {
    RankProfile rk = rank_at(d.poisson(), p, 1e-9);
    if (!rk.regular)
      throw PreconditionError("non-regular point in is_f_connection region");
    Eigen::MatrixXd ker = kernel_basis(pi_matrix(d.poisson(), p), 1e-9);
    for (int c = 0; c < ker.cols(); ++c) {
      // Residual of D_a over the coordinate coframe; for constant covectors
      // the anchor term vanishes.
      for (int q = 0; q < n; ++q)
        for (int k = 0; k < n; ++k) {
          double v = 0.0;
          for (int i = 0; i < n; ++i) v += ker(i, c) * d.gamma(i, q, k).eval(p);
          if (std::abs(v) > rep.max_residual) {
            rep.max_residual = std::abs(v);
            rep.worst_point = p;
          }
        }
    }
  }
  rep.ok = rep.max_residual < tol;
  return rep;
}

KernelStabilityReport kernel_stability_check(
    const ContravariantConnection& d, const std::vector<Point>& region,
    double tol, const std::vector<DiffForm>& extra_alphas) {
  const int n = d.chart()->dim();
  const PoissonStructure& pi = d.poisson();
  KernelStabilityReport rep;
  if (region.empty()) return rep;

  int rank0 = rank_at(pi, region.front(), 1e-9).rank;
  Eigen::MatrixXd ker0 = kernel_basis(pi_matrix(pi, region.front()), 1e-9);
  const int kdim = static_cast<int>(ker0.cols());
  if (kdim == 0) return rep;  // trivial kernel, vacuously stable

  // beta_b continued over the chart by projecting the base kernel basis
  // onto the pointwise kernel.
  auto beta_at = [&](int b, const Point& p) -> Eigen::VectorXd {
    Eigen::MatrixXd ker = kernel_basis(pi_matrix(pi, p), 1e-9);
    return ker * (ker.transpose() * ker0.col(b));
  };

  std::vector<DiffForm> alphas = extra_alphas;
  for (int q = 0; q < n; ++q) alphas.push_back(DiffForm::basis(d.chart(), q));

  const double h = 1e-4;
  for (const Point& p : region) {
    if (rank_at(pi, p, 1e-9).rank != rank0)
      throw PreconditionError("rank jump inside kernel_stability region");
    Eigen::MatrixXd m = pi_matrix(pi, p);
    for (int b = 0; b < kdim; ++b) {
      Eigen::VectorXd beta = beta_at(b, p);
      // d beta / d x_m by central differences of the continued field.
      Eigen::MatrixXd dbeta(n, n);  // dbeta(k, m) = d_m beta_k
      for (int mth = 0; mth < n; ++mth) {
        Point pp = p, pm = p;
        pp[mth] += h;
        pm[mth] -= h;
        dbeta.col(mth) = (beta_at(b, pp) - beta_at(b, pm)) / (2 * h);
      }
      for (const DiffForm& alpha : alphas) {
        Eigen::VectorXd av = Eigen::VectorXd::Zero(n);
        for (const auto& [ii, c] : alpha.terms()) av(ii[0]) = c.eval(p);
        Eigen::VectorXd xa = Eigen::VectorXd::Zero(n);  // pi# alpha at p
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) xa(j) += av(i) * m(i, j);

        // (D_alpha beta)_k = sum_ij a_i beta_j Gamma_ij^k + (pi#a)(beta_k)
        Eigen::VectorXd dab(n);
        for (int k = 0; k < n; ++k) {
          double v = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              v += av(i) * beta(j) * d.gamma(i, j, k).eval(p);
          for (int mth = 0; mth < n; ++mth) v += xa(mth) * dbeta(k, mth);
          dab(k) = v;
        }
        // pi#(D_alpha beta)
        for (int j = 0; j < n; ++j) {
          double v = 0.0;
          for (int i = 0; i < n; ++i) v += dab(i) * m(i, j);
          rep.max_anchor_residual = std::max(rep.max_anchor_residual, std::abs(v));
        }
        // L_{pi# alpha} beta; X = pi# alpha has exact derivatives.
        VectorField xsym = anchor(pi, alpha);
        for (int k = 0; k < n; ++k) {
          double v = 0.0;
          for (int mth = 0; mth < n; ++mth) {
            v += xa(mth) * dbeta(k, mth);
            v += beta(mth) * differentiate(xsym.component({mth}), k).eval(p);
          }
          rep.max_lie_residual =
              std::max(rep.max_lie_residual, std::abs(dab(k) - v));
        }
      }
    }
  }
  rep.ok = rep.max_anchor_residual < tol && rep.max_lie_residual < tol;
  return rep;
}

VectorField induced_partial_connection(const ContravariantConnection& d,
                                       const DiffForm& alpha,
                                       const DiffForm& beta) {
  return anchor(d.poisson(), apply(d, alpha, beta));
}

}  // namespace metacurv
