#include "metacurv/poisson.hpp"

#include <Eigen/Dense>
#include <random>

namespace metacurv {

PoissonStructure PoissonStructure::from_entries(
    ChartPtr chart,
    const std::vector<std::tuple<int, int, ScalarExpr>>& entries) {
  const int d = chart->dim();
  PoissonStructure p;
  p.chart = std::move(chart);
  p.pi.assign(d, std::vector<ScalarExpr>(d));
  std::vector<std::vector<bool>> given(d, std::vector<bool>(d, false));
  for (const auto& [i, j, e] : entries) {
    if (i < 0 || j < 0 || i >= d || j >= d)
      throw Error("poisson component index out of range");
    if (given[i][j]) throw Error("duplicate poisson component");
    given[i][j] = true;
    p.pi[i][j] = e.normalized();
  }
  // Fill transposes by antisymmetry where only one triangle was given;
  // explicitly given conflicting pairs are kept so that the antisymmetry
  // check can report them.
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (given[i][j] && !given[j][i]) p.pi[j][i] = -p.pi[i][j];
  return p;
}

bool PoissonStructure::antisymmetric() const {
  const int d = chart->dim();
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      if (!(pi[i][j] + pi[j][i]).is_zero()) return false;
  return true;
}

MultiVector PoissonStructure::as_bivector() const {
  MultiVector b(chart);
  const int d = chart->dim();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) b.set_component({i, j}, pi[i][j]);
  return b;
}

ScalarExpr PoissonStructure::pair(const DiffForm& alpha,
                                  const DiffForm& beta) const {
  require_same_chart(chart, alpha.chart());
  require_same_chart(chart, beta.chart());
  ScalarExpr s;
  for (const auto& [i, ci] : alpha.terms()) {
    if (i.size() != 1) throw PreconditionError("pi(. , .) expects 1-forms");
    for (const auto& [j, cj] : beta.terms()) {
      if (j.size() != 1) throw PreconditionError("pi(. , .) expects 1-forms");
      s += ci * cj * pi[i[0]][j[0]];
    }
  }
  return s;
}

VectorField anchor(const PoissonStructure& p, const DiffForm& alpha) {
  require_same_chart(p.chart, alpha.chart());
  const int d = p.chart->dim();
  VectorField x(p.chart);
  for (int j = 0; j < d; ++j) {
    ScalarExpr comp;
    for (const auto& [i, ci] : alpha.terms()) {
      if (i.size() != 1) throw PreconditionError("anchor expects a 1-form");
      comp += ci * p.pi[i[0]][j];
    }
    x.set_component({j}, comp);
  }
  return x;
}

VectorField hamiltonian(const PoissonStructure& p, const ScalarExpr& f) {
  DiffForm df(p.chart);
  for (int i = 0; i < p.chart->dim(); ++i)
    df.set_component({i}, differentiate(f, i));
  return anchor(p, df);
}

MultiVector jacobi_residual(const PoissonStructure& p) {
  const int d = p.chart->dim();
  MultiVector r(p.chart);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      for (int k = j + 1; k < d; ++k) {
        ScalarExpr s;
        for (int l = 0; l < d; ++l) {
          s += p.pi[i][l] * differentiate(p.pi[j][k], l);
          s += p.pi[j][l] * differentiate(p.pi[k][i], l);
          s += p.pi[k][l] * differentiate(p.pi[i][j], l);
        }
        r.set_component({i, j, k}, s);
      }
    }
  }
  return r;
}

namespace {

int numeric_rank(const PoissonStructure& p, const Point& at, double tol) {
  const int d = p.chart->dim();
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = p.pi[i][j].eval(at);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (smax == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * smax) ++rank;
  return rank;
}

}  // namespace

RankProfile rank_at(const PoissonStructure& p, const Point& at, double tol) {
  if (tol <= 0) throw PreconditionError("rank_at requires tol > 0");
  RankProfile r;
  r.point = at;
  r.rank = numeric_rank(p, at, tol);
  // Probe nearby points; the rank is locally constant iff they all agree.
  const double radius = 1e-3;
  const int probes = 8;
  std::mt19937_64 rng(kDefaultSeed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  r.regular = true;
  for (int k = 0; k < probes; ++k) {
    Point q = at;
    double norm = 0.0;
    std::vector<double> dir(q.size());
    for (auto& v : dir) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) norm = 1.0;
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += radius * dir[i] / norm;
    if (numeric_rank(p, q, tol) != r.rank) r.regular = false;
  }
  return r;
}

DiffForm koszul_bracket(const PoissonStructure& p, const DiffForm& alpha,
                        const DiffForm& beta) {
  VectorField xa = anchor(p, alpha);
  VectorField xb = anchor(p, beta);
  DiffForm d_pair(p.chart);
  ScalarExpr pab = p.pair(alpha, beta);
  for (int i = 0; i < p.chart->dim(); ++i)
    d_pair.set_component({i}, differentiate(pab, i));
  return lie_derivative(xa, beta) - lie_derivative(xb, alpha) - d_pair;
}

DiffForm koszul_bracket_extended(const PoissonStructure& p,
                                 const DiffForm& alpha, const DiffForm& tau) {
  require_same_chart(p.chart, alpha.chart());
  require_same_chart(p.chart, tau.chart());
  VectorField xa = anchor(p, alpha);
  DiffForm out(p.chart);
  for (const auto& [idx, c] : tau.terms()) {
    // [alpha, c dx_I] = (pi# alpha)(c) dx_I + c sum_t dx_.. ^ [alpha, dx_t] ^ ..
    DiffForm base(p.chart);
    base.set_component(idx, ScalarExpr::constant(1));
    out = out + base.scaled(apply_vector(xa, c));
    for (std::size_t t = 0; t < idx.size(); ++t) {
      DiffForm dxt(p.chart);
      dxt.set_component({idx[t]}, ScalarExpr::constant(1));
      DiffForm inner = koszul_bracket(p, alpha, dxt);
      DiffForm prefix = DiffForm::scalar(p.chart, c);
      for (std::size_t s = 0; s < idx.size(); ++s) {
        if (s == t)
          prefix = prefix.wedge(inner);
        else
          prefix = prefix.wedge(DiffForm::basis(p.chart, idx[s]));
      }
      out = out + prefix;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void wedge3_add(std::map<std::array<int, 3>, Rational>& acc, int a, int b,
                int c, const Rational& coeff) {
  if (coeff == 0) return;
  int idx[3] = {a, b, c};
  int sign = 1;
  for (int i = 1; i < 3; ++i)
    for (int j = i; j > 0 && idx[j - 1] > idx[j]; --j) {
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
    }
  if (idx[0] == idx[1] || idx[1] == idx[2]) return;
  std::array<int, 3> key{idx[0], idx[1], idx[2]};
  auto& v = acc[key];
  v += sign > 0 ? coeff : -coeff;
  if (v == 0) acc.erase(key);
}

}  // namespace

std::map<std::array<int, 3>, Rational> cybe_residual(const LieAlgebraAction& a) {
  std::map<std::array<int, 3>, Rational> acc;
  const int n = a.n;
  // [u_i ^ u_j, u_k ^ u_l] expanded over the bracket of basis vectors:
  //   [u_i,u_k]^u_j^u_l - [u_i,u_l]^u_j^u_k - [u_j,u_k]^u_i^u_l
  //   + [u_j,u_l]^u_i^u_k.
  auto bracket_term = [&](int p, int q, int x, int y, const Rational& coeff) {
    for (int m = 0; m < n; ++m) {
      const Rational& cpm = a.c[p][q][m];
      if (cpm != 0) wedge3_add(acc, m, x, y, coeff * cpm);
    }
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (a.r[i][j] == 0) continue;
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          if (a.r[k][l] == 0) continue;
          Rational coeff = a.r[i][j] * a.r[k][l];
          bracket_term(i, k, j, l, coeff);
          bracket_term(i, l, j, k, -coeff);
          bracket_term(j, k, i, l, -coeff);
          bracket_term(j, l, i, k, coeff);
        }
    }
  return acc;
}

void LieAlgebraAction::validate() const {
  if (n <= 0) throw PreconditionError("action dimension must be positive");
  if (static_cast<int>(zeta.size()) != n ||
      static_cast<int>(c.size()) != n || static_cast<int>(r.size()) != n)
    throw PreconditionError("action tables do not match the dimension");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (r[i][j] != -r[j][i])
        throw PreconditionError("r-matrix is not antisymmetric");
      for (int k = 0; k < n; ++k)
        if (c[i][j][k] != -c[j][i][k])
          throw PreconditionError(
              "structure constants not antisymmetric in the lower indices");
    }
  }
  // Jacobi identity on the structure constants.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Rational s(0);
          for (int m = 0; m < n; ++m)
            s += c[i][j][m] * c[m][k][l] + c[j][k][m] * c[m][i][l] +
                 c[k][i][m] * c[m][j][l];
          if (s != 0)
            throw PreconditionError(
                "structure constants violate the Jacobi identity");
        }
  // Bracket relations of the fundamental fields.
  Rational sign(anti_homomorphism ? -1 : 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      VectorField lhs = lie_bracket(zeta[i], zeta[j]);
      VectorField rhs(chart);
      for (int k = 0; k < n; ++k)
        rhs = rhs + zeta[k].scaled(ScalarExpr::constant(sign * c[i][j][k]));
      if (!(lhs - rhs).is_zero())
        throw PreconditionError(
            "fundamental fields do not realize the structure constants");
    }
  if (!cybe_residual(*this).empty())
    throw PreconditionError("r-matrix violates the classical Yang-Baxter equation");
}

PoissonStructure build_pi_r(const LieAlgebraAction& a) {
  a.validate();
  MultiVector b(a.chart);
  ScalarExpr half = ScalarExpr::constant(Rational(1, 2));
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) {
      if (a.r[i][j] == 0) continue;
      b = b + a.zeta[i].wedge(a.zeta[j])
                 .scaled(half * ScalarExpr::constant(a.r[i][j]));
    }
  const int d = a.chart->dim();
  PoissonStructure p;
  p.chart = a.chart;
  p.pi.assign(d, std::vector<ScalarExpr>(d));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      ScalarExpr c = b.component({i, j});
      p.pi[i][j] = c;
      p.pi[j][i] = -c;
    }
  if (!jacobi_residual(p).is_zero())
    throw PreconditionError("pi^r fails the Jacobi identity");
  return p;
}

}  // namespace metacurv
