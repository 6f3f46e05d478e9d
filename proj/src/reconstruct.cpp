#include "metacurv/reconstruct.hpp"

#include <Eigen/Dense>

namespace metacurv {

double ReconstructionResiduals::max() const {
  double m = frame_residual;
  for (double v :
       {splitting_cross_check, commute_tx, commute_zx, commute_zy,
        gamma_casimir, gamma_integrability, a_constancy, c_constancy, c_jacobi,
        pi_reconstruction, d_reconstruction})
    m = std::max(m, v);
  if (killing) m = std::max(m, *killing);
  return m;
}

FrobeniusSystem commuting_system(const FlatFrame& frame, int i, double step,
                                 double tol_int) {
  const int r2 = frame.leaf_dim();
  const PoissonStructure& pi = frame.poisson();

  struct Ctx {
    SymMatrix xmat;             // X_j^m = -pi_jm on the leaf block
    std::vector<SymMatrix> gm;  // Gamma_m[k][l]
    int r2;
    int i;
  };
  auto ctx = std::make_shared<Ctx>();
  ctx->r2 = r2;
  ctx->i = i;
  ctx->xmat.assign(r2, std::vector<ScalarExpr>(r2));
  for (int j = 0; j < r2; ++j)
    for (int m = 0; m < r2; ++m) ctx->xmat[j][m] = -pi.pi[j][m];
  SymMatrix xinv = sym_inverse(ctx->xmat);
  // d(T^k)/d(x_m) = sum_l Gamma_m[k][l] T^l with
  // Gamma_m[k][l] = sum_j xinv[m][j] d_l X_j^k.
  ctx->gm.assign(r2, SymMatrix(r2, std::vector<ScalarExpr>(r2)));
  for (int m = 0; m < r2; ++m)
    for (int k = 0; k < r2; ++k)
      for (int l = 0; l < r2; ++l) {
        ScalarExpr s;
        for (int j = 0; j < r2; ++j)
          s += xinv[m][j] * differentiate(ctx->xmat[j][k], l);
        ctx->gm[m][k][l] = s;
      }

  FrobeniusSystem sys;
  sys.size = r2;
  for (int m = 0; m < r2; ++m) sys.axes.push_back(m);
  sys.step = step;
  sys.tol_int = tol_int;
  for (int m = 0; m < r2; ++m) {
    sys.gamma.push_back([ctx, m](const Point& p) {
      const int n = ctx->r2;
      Eigen::MatrixXd g(n, n);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) g(k, l) = ctx->gm[m][k][l].eval(p);
      return g;
    });
    sys.rhs.push_back(
        [r2](const Point&) { return Eigen::VectorXd::Zero(r2).eval(); });
  }
  sys.initial = [ctx](const Point& p) {
    Eigen::VectorXd v(ctx->r2);
    for (int k = 0; k < ctx->r2; ++k) v(k) = ctx->xmat[ctx->i][k].eval(p);
    return v;
  };
  return sys;
}

std::vector<std::vector<GridField>> build_commuting_fields(const FlatFrame& frame,
                                                           GridPtr grid,
                                                           double step,
                                                           double tol_int) {
  const int r2 = frame.leaf_dim();
  const PoissonStructure& pi = frame.poisson();
  SymMatrix xmat(r2, std::vector<ScalarExpr>(r2));
  for (int j = 0; j < r2; ++j)
    for (int m = 0; m < r2; ++m) xmat[j][m] = -pi.pi[j][m];
  ScalarExpr xdet = sym_det(xmat);
  grid->for_each_node([&](const std::vector<int>& node) {
    if (std::abs(xdet.eval(grid->point(node))) < 1e-12)
      throw PreconditionError("X fields do not span the leaf tangent on the grid");
  });
  std::vector<std::vector<GridField>> t;
  for (int i = 0; i < r2; ++i)
    t.push_back(solve(commuting_system(frame, i, step, tol_int), grid));
  return t;
}

namespace {

// Max |[V_i, X_j]| over the grid for numeric leaf fields V against the
// symbolic X fields.
double commutation_residual(const FlatFrame& frame, const GridSpec& grid,
                            const std::vector<std::vector<GridField>>& v) {
  const int r2 = frame.leaf_dim();
  const PoissonStructure& pi = frame.poisson();
  SymMatrix xmat(r2, std::vector<ScalarExpr>(r2));
  for (int j = 0; j < r2; ++j)
    for (int m = 0; m < r2; ++m) xmat[j][m] = -pi.pi[j][m];
  double res = 0.0;
  grid.for_each_node([&](const std::vector<int>& node) {
    Point p = grid.point(node);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (int j = 0; j < r2; ++j)
        for (int k = 0; k < r2; ++k) {
          double s = 0.0;
          for (int m = 0; m < r2; ++m) {
            s += v[i][m].at(node) * differentiate(xmat[j][k], m).eval(p);
            s -= xmat[j][m].eval(p) * v[i][k].derivative_at_node(node, m, 1);
          }
          res = std::max(res, std::abs(s));
        }
  });
  return res;
}

}  // namespace

ReconstructionResult reconstruct(const ContravariantConnection& d, GridPtr grid,
                                 const Metric* g, double step, double tol) {
  ReconstructionResult out;
  out.grid = grid;
  const ChartPtr& chart = d.chart();
  const int dim = chart->dim();
  const int r2 = chart->leaf_dim >= 0 ? chart->leaf_dim : dim;
  const int t = dim - r2;

  auto fail = [&](const std::string& stage, const std::string& detail) {
    out.failed_stage = stage;
    out.failure_detail = detail;
    return out;
  };

  if (!d.is_torsion_free()) return fail("torsion", "connection has torsion");
  if (!d.is_flat()) return fail("flatness", "connection is not flat");
  try {
    require_split_form(d.poisson(), r2);
  } catch (const Error& e) {
    return fail("split_form", e.what());
  }
  // F-connection: for a split chart the kernel is spanned by the dy_u, so
  // D_{dy_u} = 0 is a symbolic Christoffel check.
  for (int u = r2; u < dim; ++u)
    for (int q = 0; q < dim; ++q)
      for (int k = 0; k < dim; ++k)
        if (!d.gamma(u, q, k).is_zero())
          return fail("f_connection", "D_{dy} does not vanish");

  // Flat frame: Riemannian splitting when a metric is given, coordinate
  // splitting otherwise; the numeric splitting system is run and checked
  // against the symbolic table.
  std::shared_ptr<FlatFrame> frame;
  std::optional<std::vector<std::vector<ScalarExpr>>> a_sym;
  try {
    if (t > 0 && g != nullptr)
      a_sym = riemannian_A(*g, r2);
    else
      a_sym = std::vector<std::vector<ScalarExpr>>(r2,
                                                   std::vector<ScalarExpr>(t));
    frame = std::make_shared<FlatFrame>(d, r2, *a_sym);
    if (!frame->verified(1e-9))
      return fail("flat_frame", "coordinate frame is not parallel (residual " +
                                    std::to_string(frame->residuals().max()) + ")");
  } catch (const Error& e) {
    return fail("flat_frame", e.what());
  }
  out.frame = frame;
  out.residuals.frame_residual = frame->residuals().max();

  if (t > 0) {
    try {
      std::vector<std::vector<double>> h0(r2, std::vector<double>(t, 0.0));
      for (int i = 0; i < r2; ++i)
        for (int u = 0; u < t; ++u) h0[i][u] = (*a_sym)[i][u].eval(chart->base);
      SplittingResult split = flat_splitting(d, grid, h0, a_sym, step);
      out.residuals.splitting_cross_check = split.cross_check;
    } catch (const Error& e) {
      return fail("flat_splitting", e.what());
    }
  }

  // Tensor T must vanish.
  TensorT tt = tensor_T(frame, 1e-9);
  if (!tt.is_zero()) {
    std::string detail;
    for (const auto& [key, val] : tt.comp)
      if (!val.is_zero()) {
        const auto& [a, b] = *val.c.begin();
        detail = "T(e_" + std::to_string(key[0]) + ", e_" +
                 std::to_string(key[1]) + ") has component (" +
                 std::to_string(a.first) + "," + std::to_string(a.second) +
                 ") = " + b.str(chart->coords);
        break;
      }
    return fail("tensor_T", detail);
  }

  // Commuting fields.
  try {
    out.t_fields = build_commuting_fields(*frame, grid, step);
  } catch (const Error& e) {
    return fail("t_system", e.what());
  }
  out.residuals.commute_tx = commutation_residual(*frame, *grid, out.t_fields);

  // gamma extraction and the xi system on the transversal.
  std::vector<std::vector<GridField>> xi(
      r2, std::vector<GridField>(r2, GridField(grid)));
  if (t == 0) {
    for (int i = 0; i < r2; ++i)
      grid->for_each_node([&](const std::vector<int>& node) {
        for (int j = 0; j < r2; ++j) xi[j][i].set(node, i == j ? 1.0 : 0.0);
      });
  } else {
    // [T_i, Y_u] = sum_j gamma_iu^j T_j; gamma are Casimir.
    std::vector<std::vector<std::vector<GridField>>> gamma(
        r2, std::vector<std::vector<GridField>>(
                t, std::vector<GridField>(r2, GridField(grid))));
    double worst_solve = 0.0;
    grid->for_each_node([&](const std::vector<int>& node) {
      Point p = grid->point(node);
      Eigen::MatrixXd tmat(r2, r2);  // tmat(k, j) = T_j^k
      for (int k = 0; k < r2; ++k)
        for (int j = 0; j < r2; ++j) tmat(k, j) = out.t_fields[j][k].at(node);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(tmat);
      for (int i = 0; i < r2; ++i)
        for (int u = 0; u < t; ++u) {
          Eigen::VectorXd br(r2);
          for (int k = 0; k < r2; ++k) {
            double s = 0.0;
            // [T_i, Y_u]^k; Y_u = d/dy_u - sum_m A_m^u d/dx_m.
            for (int m = 0; m < r2; ++m) {
              double dyk = -frame->a_deriv_at_node(k, u, m, node);
              s += out.t_fields[i][m].at(node) * dyk;
            }
            s -= out.t_fields[i][k].derivative_at_node(node, r2 + u, 1);
            for (int m = 0; m < r2; ++m)
              s += frame->a_at(m, u, p) *
                   out.t_fields[i][k].derivative_at_node(node, m, 1);
            br(k) = s;
          }
          Eigen::VectorXd sol = lu.solve(br);
          worst_solve = std::max(worst_solve, (tmat * sol - br).cwiseAbs().maxCoeff());
          for (int j = 0; j < r2; ++j) gamma[i][u][j].set(node, sol(j));
        }
    });

    // gamma must be constant along leaves.
    grid->for_each_node([&](const std::vector<int>& node) {
      std::vector<int> tv = node;
      for (int m = 0; m < r2; ++m) tv[m] = grid->base_index[m];
      for (int i = 0; i < r2; ++i)
        for (int u = 0; u < t; ++u)
          for (int j = 0; j < r2; ++j)
            out.residuals.gamma_casimir =
                std::max(out.residuals.gamma_casimir,
                         std::abs(gamma[i][u][j].at(node) - gamma[i][u][j].at(tv)));
    });

    // Integrability identity of gamma on the transversal.
    grid->for_each_node([&](const std::vector<int>& node) {
      bool on_transversal = true;
      for (int m = 0; m < r2; ++m)
        if (node[m] != grid->base_index[m]) on_transversal = false;
      if (!on_transversal) return;
      for (int i = 0; i < r2; ++i)
        for (int j = 0; j < r2; ++j)
          for (int u = 0; u < t; ++u)
            for (int v = u + 1; v < t; ++v) {
              double s = gamma[j][v][i].derivative_at_node(node, r2 + u, 1) -
                         gamma[j][u][i].derivative_at_node(node, r2 + v, 1);
              // identity: d_v gamma_ju^i - d_u gamma_jv^i + sum_k (
              //   gamma_ku^i gamma_jv^k - gamma_kv^i gamma_ju^k ) = 0
              s = -s;
              for (int k = 0; k < r2; ++k)
                s += gamma[k][u][i].at(node) * gamma[j][v][k].at(node) -
                     gamma[k][v][i].at(node) * gamma[j][u][k].at(node);
              out.residuals.gamma_integrability =
                  std::max(out.residuals.gamma_integrability, std::abs(s));
            }
    });

    // xi system d(xi_col_i)/dy_u = G_u xi_col_i, G_u[j][k] = gamma_ku^j,
    // solved on the transversal with xi(x0) = identity.
    FrobeniusSystem sys;
    sys.size = r2;
    for (int u = 0; u < t; ++u) sys.axes.push_back(r2 + u);
    sys.step = step;
    for (int u = 0; u < t; ++u) {
      sys.gamma.push_back([&gamma, u, r2](const Point& p) {
        Eigen::MatrixXd m(r2, r2);
        for (int j = 0; j < r2; ++j)
          for (int k = 0; k < r2; ++k) m(j, k) = gamma[k][u][j].value(p);
        return m;
      });
      sys.rhs.push_back(
          [r2](const Point&) { return Eigen::VectorXd::Zero(r2).eval(); });
    }
    std::vector<std::vector<GridField>> xi_cols;
    try {
      for (int i = 0; i < r2; ++i) {
        sys.initial = [&, i](const Point&) {
          Eigen::VectorXd v = Eigen::VectorXd::Zero(r2);
          v(i) = 1.0;
          return v;
        };
        xi_cols.push_back(solve(sys, grid));
      }
    } catch (const Error& e) {
      return fail("xi_system", e.what());
    }
    // xi is Casimir: extend over leaves by reading the transversal value.
    grid->for_each_node([&](const std::vector<int>& node) {
      std::vector<int> tv = node;
      for (int m = 0; m < r2; ++m) tv[m] = grid->base_index[m];
      for (int i = 0; i < r2; ++i)
        for (int j = 0; j < r2; ++j) xi[j][i].set(node, xi_cols[i][j].at(tv));
    });
  }

  // Z_i = sum_j xi_ji T_j.
  out.z_fields.assign(r2, std::vector<GridField>(r2, GridField(grid)));
  grid->for_each_node([&](const std::vector<int>& node) {
    for (int i = 0; i < r2; ++i)
      for (int k = 0; k < r2; ++k) {
        double s = 0.0;
        for (int j = 0; j < r2; ++j)
          s += xi[j][i].at(node) * out.t_fields[j][k].at(node);
        out.z_fields[i][k].set(node, s);
      }
  });
  out.residuals.commute_zx = commutation_residual(*frame, *grid, out.z_fields);

  // [Z_i, Y_u] residual.
  if (t > 0) {
    grid->for_each_node([&](const std::vector<int>& node) {
      Point p = grid->point(node);
      for (int i = 0; i < r2; ++i)
        for (int u = 0; u < t; ++u)
          for (int k = 0; k < r2; ++k) {
            double s = 0.0;
            for (int m = 0; m < r2; ++m)
              s += out.z_fields[i][m].at(node) *
                   (-frame->a_deriv_at_node(k, u, m, node));
            s -= out.z_fields[i][k].derivative_at_node(node, r2 + u, 1);
            for (int m = 0; m < r2; ++m)
              s += frame->a_at(m, u, p) *
                   out.z_fields[i][k].derivative_at_node(node, m, 1);
            out.residuals.commute_zy =
                std::max(out.residuals.commute_zy, std::abs(s));
          }
    });
  }

  // a_ij via least squares per node from pi = 1/2 sum a_ij Z_i ^ Z_j.
  const int npairs = r2 * (r2 - 1) / 2;
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < r2; ++i)
    for (int j = i + 1; j < r2; ++j) pairs.emplace_back(i, j);
  auto a_system = [&](const std::vector<int>& node, Eigen::MatrixXd& mat,
                      Eigen::VectorXd& rhs) {
    Point p = grid->point(node);
    for (int row = 0; row < npairs; ++row) {
      auto [l, m] = pairs[row];
      rhs(row) = d.poisson().pi[l][m].eval(p);
      for (int col = 0; col < npairs; ++col) {
        auto [i, j] = pairs[col];
        mat(row, col) = out.z_fields[i][l].at(node) * out.z_fields[j][m].at(node) -
                        out.z_fields[i][m].at(node) * out.z_fields[j][l].at(node);
      }
    }
  };
  Eigen::VectorXd a_base(npairs);
  {
    Eigen::MatrixXd mat(npairs, npairs);
    Eigen::VectorXd rhs(npairs);
    a_system(grid->base_index, mat, rhs);
    a_base = mat.colPivHouseholderQr().solve(rhs);
  }
  out.a.assign(r2, std::vector<double>(r2, 0.0));
  for (int c = 0; c < npairs; ++c) {
    auto [i, j] = pairs[c];
    out.a[i][j] = a_base(c);
    out.a[j][i] = -a_base(c);
  }
  {
    Eigen::MatrixXd am(r2, r2);
    for (int i = 0; i < r2; ++i)
      for (int j = 0; j < r2; ++j) am(i, j) = out.a[i][j];
    out.a_det = am.determinant();
  }
  grid->for_each_node([&](const std::vector<int>& node) {
    Eigen::MatrixXd mat(npairs, npairs);
    Eigen::VectorXd rhs(npairs);
    a_system(node, mat, rhs);
    Eigen::VectorXd sol = mat.colPivHouseholderQr().solve(rhs);
    out.residuals.a_constancy = std::max(
        out.residuals.a_constancy, (sol - a_base).cwiseAbs().maxCoeff());
    out.residuals.pi_reconstruction =
        std::max(out.residuals.pi_reconstruction,
                 (mat * a_base - rhs).cwiseAbs().maxCoeff());
  });

  // c_ij^k from [Z_i, Z_j] = sum_k c_ij^k Z_k, extracted at the base node
  // and then checked for constancy everywhere.
  out.c.assign(r2, std::vector<std::vector<double>>(
                       r2, std::vector<double>(r2, 0.0)));
  auto c_solve = [&](const std::vector<int>& node, int i, int j) {
    Eigen::MatrixXd zmat(r2, r2);
    for (int k = 0; k < r2; ++k)
      for (int jj = 0; jj < r2; ++jj) zmat(k, jj) = out.z_fields[jj][k].at(node);
    Eigen::VectorXd br(r2);
    for (int k = 0; k < r2; ++k) {
      double s = 0.0;
      for (int m = 0; m < r2; ++m) {
        s += out.z_fields[i][m].at(node) *
             out.z_fields[j][k].derivative_at_node(node, m, 1);
        s -= out.z_fields[j][m].at(node) *
             out.z_fields[i][k].derivative_at_node(node, m, 1);
      }
      br(k) = s;
    }
    return Eigen::PartialPivLU<Eigen::MatrixXd>(zmat).solve(br).eval();
  };
  for (int i = 0; i < r2; ++i)
    for (int j = i + 1; j < r2; ++j) {
      Eigen::VectorXd sol = c_solve(grid->base_index, i, j);
      for (int k = 0; k < r2; ++k) {
        out.c[i][j][k] = sol(k);
        out.c[j][i][k] = -sol(k);
      }
    }
  grid->for_each_node([&](const std::vector<int>& node) {
    for (int i = 0; i < r2; ++i)
      for (int j = i + 1; j < r2; ++j) {
        Eigen::VectorXd sol = c_solve(node, i, j);
        for (int k = 0; k < r2; ++k)
          out.residuals.c_constancy = std::max(
              out.residuals.c_constancy, std::abs(sol(k) - out.c[i][j][k]));
      }
  });
  // Jacobi identity of the extracted structure constants.
  for (int i = 0; i < r2; ++i)
    for (int j = 0; j < r2; ++j)
      for (int k = 0; k < r2; ++k)
        for (int l = 0; l < r2; ++l) {
          double s = 0.0;
          for (int m = 0; m < r2; ++m)
            s += out.c[i][j][m] * out.c[m][k][l] +
                 out.c[j][k][m] * out.c[m][i][l] +
                 out.c[k][i][m] * out.c[m][j][l];
          out.residuals.c_jacobi = std::max(out.residuals.c_jacobi, std::abs(s));
        }

  // D vs D^r on the coordinate coframe:
  // (D^r_{dx_p} dx_q)_k = sum_ij a_ij Z_i^p d_k Z_j^q.
  grid->for_each_node([&](const std::vector<int>& node) {
    Point p = grid->point(node);
    for (int pp = 0; pp < dim; ++pp)
      for (int q = 0; q < dim; ++q)
        for (int k = 0; k < dim; ++k) {
          double s = 0.0;
          for (int i = 0; i < r2; ++i)
            for (int j = 0; j < r2; ++j) {
              if (out.a[i][j] == 0.0) continue;
              double zp = pp < r2 ? out.z_fields[i][pp].at(node) : 0.0;
              if (zp == 0.0) continue;
              double dz = q < r2 ? out.z_fields[j][q].derivative_at_node(node, k, 1)
                                 : 0.0;
              s += out.a[i][j] * zp * dz;
            }
          s -= d.gamma(pp, q, k).eval(p);
          out.residuals.d_reconstruction =
              std::max(out.residuals.d_reconstruction, std::abs(s));
        }
  });

  // Killing residual when a metric is present.
  if (g != nullptr) {
    double kres = 0.0;
    grid->for_each_node([&](const std::vector<int>& node) {
      Point p = grid->point(node);
      for (int i = 0; i < r2; ++i)
        for (int m = 0; m < dim; ++m)
          for (int nn = 0; nn < dim; ++nn) {
            double s = 0.0;
            for (int l = 0; l < r2; ++l) {
              s += out.z_fields[i][l].at(node) *
                   differentiate(g->g()[m][nn], l).eval(p);
              s += g->g()[l][nn].eval(p) *
                   out.z_fields[i][l].derivative_at_node(node, m, 1);
              s += g->g()[m][l].eval(p) *
                   out.z_fields[i][l].derivative_at_node(node, nn, 1);
            }
            kres = std::max(kres, std::abs(s));
          }
    });
    out.residuals.killing = kres;
  }
  (void)tol;
  return out;
}

}  // namespace metacurv
