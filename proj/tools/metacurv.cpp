#include <iostream>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "metacurv/chartfile.hpp"
#include "metacurv/reconstruct.hpp"
#include "metacurv/report.hpp"

namespace mc = metacurv;
using mc::Json;

namespace {

struct Options {
  std::string chart_path;
  std::string output = "text";
  double tol = 1e-9;
  double rec_tol = 1e-6;
  int grid_nodes = 33;
  double step = 1e-2;
  std::uint64_t seed = mc::kDefaultSeed;
};

int emit(const Json& rep, const Options& o, int code) {
  if (o.output == "json")
    std::cout << rep.dump(2) << "\n";
  else
    std::cout << mc::render_text(rep);
  return code;
}

std::string frame_label(const mc::FlatFrame& fr, int a) {
  if (a < fr.leaf_dim()) return "phi_" + std::to_string(a);
  return "dy_" + std::to_string(a - fr.leaf_dim());
}

Json frame_form_json(const mc::FlatFrame& fr, const mc::FrameForm2& f) {
  Json arr = Json::array();
  for (const auto& [key, v] : f.c) {
    if (v.is_zero()) continue;
    arr.push_back(Json::array({frame_label(fr, key.first),
                               frame_label(fr, key.second),
                               v.str(fr.chart()->coords)}));
  }
  return arr;
}

int cmd_validate(const mc::ChartData& data, const Options& o) {
  Json rep = mc::make_report("validate", data.chart->name, o.seed);
  Json checks;
  bool ok = true;

  bool antisym = data.pi.antisymmetric();
  checks["antisymmetry"] = antisym ? "pass" : "fail";
  ok = ok && antisym;

  mc::MultiVector jac = mc::jacobi_residual(data.pi);
  bool jacobi = jac.is_zero();
  checks["jacobi"] = jacobi ? "pass" : "fail";
  if (!jacobi) {
    Json comps = Json::array();
    for (const auto& [idx, c] : jac.terms())
      comps.push_back(Json::array(
          {idx[0], idx[1], idx[2], c.str(data.chart->coords)}));
    checks["jacobi_residual"] = comps;
  }
  ok = ok && jacobi;

  if (data.metric_raw) {
    const mc::SymMatrix& g = *data.metric_raw;
    const int d = data.chart->dim();
    bool sym = true;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (!(g[i][j] - g[j][i]).is_zero()) sym = false;
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = g[i][j].eval(data.chart->base);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    double mineig = es.eigenvalues().minCoeff();
    bool posdef = mineig > 1e-9;
    checks["metric_symmetric"] = sym ? "pass" : "fail";
    checks["metric_positive_definite"] = posdef ? "pass" : "fail";
    checks["metric_min_eigenvalue"] = mineig;
    ok = ok && sym && posdef;
  }

  if (data.chart->leaf_dim >= 0) {
    try {
      mc::require_split_form(data.pi, data.chart->leaf_dim);
      checks["split_form"] = "pass";
      bool constant = true;
      for (int i = 0; i < data.chart->leaf_dim; ++i)
        for (int j = 0; j < data.chart->leaf_dim; ++j)
          for (int m = 0; m < data.chart->dim(); ++m)
            if (!mc::differentiate(data.pi.pi[i][j], m).is_zero())
              constant = false;
      checks["darboux_constant_block"] = constant;
    } catch (const mc::Error& e) {
      checks["split_form"] = "fail";
      checks["split_form_detail"] = e.what();
      ok = false;
    }
  }

  if (data.action) {
    try {
      data.action->validate();
      checks["action"] = "pass";
      mc::PoissonStructure pr = mc::build_pi_r(*data.action);
      bool match = true;
      for (int i = 0; i < data.chart->dim(); ++i)
        for (int j = 0; j < data.chart->dim(); ++j)
          if (!(pr.pi[i][j] - data.pi.pi[i][j]).is_zero()) match = false;
      checks["action_pi_r_matches"] = match ? "pass" : "fail";
      ok = ok && match;
    } catch (const mc::Error& e) {
      checks["action"] = "fail";
      checks["action_detail"] = e.what();
      ok = false;
    }
  }

  checks["declared_flat"] = data.chart->declared_flat;
  rep["checks"] = checks;
  rep["verdict"] = ok ? "pass" : "fail";
  return emit(rep, o, ok ? 0 : 2);
}

int cmd_connection(const mc::ChartData& data, const Options& o) {
  Json rep = mc::make_report("connection", data.chart->name, o.seed);
  std::string source = data.christoffel_raw ? "christoffel"
                       : data.metric_raw    ? "metric"
                                            : "action";
  rep["source"] = source;
  mc::ContravariantConnection d = data.make_connection();
  const int n = data.chart->dim();
  Json gamma = Json::array();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (!d.gamma(i, j, k).is_zero())
          gamma.push_back(Json::array(
              {i, j, k, d.gamma(i, j, k).str(data.chart->coords)}));
  rep["christoffel"] = gamma;
  rep["torsion_free"] = d.is_torsion_free();
  rep["flat"] = d.is_flat();

  mc::RankProfile rk = mc::rank_at(data.pi, data.chart->base, 1e-9);
  rep["rank_at_base"] = rk.rank;
  if (rk.rank == n) {
    rep["f_connection"] = "vacuous";
  } else if (data.chart->leaf_dim >= 0) {
    bool f = true;
    for (int u = data.chart->leaf_dim; u < n; ++u)
      for (int q = 0; q < n; ++q)
        for (int k = 0; k < n; ++k)
          if (!d.gamma(u, q, k).is_zero()) f = false;
    rep["f_connection"] = f;
  } else {
    rep["f_connection"] = "unknown (chart not split)";
  }
  return emit(rep, o, 0);
}

std::shared_ptr<const mc::FlatFrame> try_frame(
    const mc::ContravariantConnection& d, const std::optional<mc::Metric>& g) {
  try {
    return std::make_shared<mc::FlatFrame>(
        mc::make_symbolic_frame(d, g ? &*g : nullptr));
  } catch (const mc::Error&) {
    return nullptr;
  }
}

int cmd_hawkins(const mc::ChartData& data, const Options& o) {
  Json rep = mc::make_report("hawkins", data.chart->name, o.seed);
  mc::ContravariantConnection d = data.make_connection();
  std::optional<mc::Metric> g;
  if (data.metric_raw) g = data.make_metric();
  auto frame = try_frame(d, g);
  mc::HawkinsOptions opts;
  opts.tol = o.tol;
  opts.seed = o.seed;
  mc::HawkinsReport h = mc::hawkins_conditions(d, g ? &*g : nullptr, frame, opts);

  rep["h1_flat"] = h.h1_flat;
  if (h.h2_metacurvature_zero) {
    rep["h2_metacurvature_zero"] = *h.h2_metacurvature_zero;
    rep["h2_method"] = h.h2_method;
  } else {
    rep["h2_metacurvature_zero"] = nullptr;
  }
  if (h.h3_volume_compatible) {
    rep["h3_volume_compatible"] = *h.h3_volume_compatible;
    rep["h3_method"] = h.h3_sampled ? "sampled" : "symbolic";
  } else {
    rep["h3_volume_compatible"] = nullptr;
  }
  if (h.tensor_t_zero)
    rep["tensor_T_zero"] = *h.tensor_t_zero;
  else
    rep["tensor_T_zero"] = nullptr;
  if (h.symplectic_degree)
    rep["symplectic_degree"] = *h.symplectic_degree;
  else
    rep["symplectic_degree"] = h.degree_polynomial ? Json() : Json("not polynomial");
  rep["metacurvature_s3_symmetric"] = h.metacurvature_s3_symmetric;
  Json res;
  for (const auto& [k, v] : h.residuals) res[k] = v;
  rep["residuals"] = res;
  bool pass = h.conditions_hold();
  rep["verdict"] = pass ? "pass" : "fail";
  return emit(rep, o, pass ? 0 : 2);
}

int cmd_metacurvature(const mc::ChartData& data, const Options& o) {
  Json rep = mc::make_report("metacurvature", data.chart->name, o.seed);
  mc::ContravariantConnection d = data.make_connection();
  if (!d.is_flat()) {
    rep["h1_flat"] = false;
    rep["verdict"] = "fail";
    return emit(rep, o, 2);
  }
  std::optional<mc::Metric> g;
  if (data.metric_raw) g = data.make_metric();
  auto frame = try_frame(d, g);
  if (!frame)
    throw mc::PreconditionError("no symbolic flat frame for this chart");
  mc::MetacurvatureTensor m = mc::metacurvature_coords(frame);
  Json comps = Json::array();
  for (const auto& [key, val] : m.comp) {
    if (val.is_zero()) continue;
    Json entry;
    entry["slots"] = Json::array({frame_label(*frame, key[0]),
                                  frame_label(*frame, key[1]),
                                  frame_label(*frame, key[2])});
    entry["value"] = frame_form_json(*frame, val);
    comps.push_back(entry);
  }
  rep["frame"] = "flat coframe";
  rep["method"] = "symbolic";
  rep["nonzero_components"] = comps;
  rep["zero"] = m.is_zero();
  rep["s3_symmetric"] = m.s3_symmetric;
  return emit(rep, o, 0);
}

int cmd_tensor_t(const mc::ChartData& data, const Options& o) {
  Json rep = mc::make_report("tensor-t", data.chart->name, o.seed);
  mc::ContravariantConnection d = data.make_connection();
  if (!d.is_flat() || !d.is_torsion_free()) {
    rep["h1_flat"] = d.is_flat();
    rep["verdict"] = "fail";
    return emit(rep, o, 2);
  }
  std::optional<mc::Metric> g;
  if (data.metric_raw) g = data.make_metric();
  auto frame = try_frame(d, g);
  if (!frame)
    throw mc::PreconditionError("no symbolic flat frame for this chart");
  mc::TensorT t = mc::tensor_T(frame);
  Json comps = Json::array();
  for (const auto& [key, val] : t.comp) {
    if (val.is_zero()) continue;
    Json entry;
    entry["slots"] = Json::array(
        {frame_label(*frame, key[0]), frame_label(*frame, key[1])});
    entry["value"] = frame_form_json(*frame, val);
    comps.push_back(entry);
  }
  rep["frame"] = "flat coframe";
  rep["method"] = "symbolic";
  rep["nonzero_components"] = comps;
  rep["zero"] = t.is_zero();
  rep["symmetric"] = t.symmetric;
  mc::DTReport dt = mc::check_DT_equals_M(frame, 1e-6);
  rep["dt_equals_m_residual"] = dt.max_residual;
  return emit(rep, o, 0);
}

int cmd_reconstruct(const mc::ChartData& data, const Options& o) {
  Json rep = mc::make_report("reconstruct", data.chart->name, o.seed);
  rep["grid_nodes"] = o.grid_nodes;
  rep["step"] = o.step;
  rep["tol"] = o.rec_tol;
  mc::ContravariantConnection d = data.make_connection();
  std::optional<mc::Metric> g;
  if (data.metric_raw) g = data.make_metric();
  mc::GridPtr grid = mc::make_centered_grid(data.chart->base, o.grid_nodes, 0.5);
  mc::ReconstructionResult res =
      mc::reconstruct(d, grid, g ? &*g : nullptr, o.step, o.rec_tol);
  if (!res.completed()) {
    rep["failed_stage"] = res.failed_stage;
    rep["detail"] = res.failure_detail;
    rep["verdict"] = "fail";
    return emit(rep, o, 2);
  }
  Json residuals;
  residuals["frame"] = res.residuals.frame_residual;
  residuals["splitting_cross_check"] = res.residuals.splitting_cross_check;
  residuals["commute_tx"] = res.residuals.commute_tx;
  residuals["commute_zx"] = res.residuals.commute_zx;
  residuals["commute_zy"] = res.residuals.commute_zy;
  residuals["gamma_casimir"] = res.residuals.gamma_casimir;
  residuals["gamma_integrability"] = res.residuals.gamma_integrability;
  residuals["a_constancy"] = res.residuals.a_constancy;
  residuals["c_constancy"] = res.residuals.c_constancy;
  residuals["c_jacobi"] = res.residuals.c_jacobi;
  residuals["pi_reconstruction"] = res.residuals.pi_reconstruction;
  residuals["d_reconstruction"] = res.residuals.d_reconstruction;
  if (res.residuals.killing) residuals["killing"] = *res.residuals.killing;
  rep["residuals"] = residuals;
  rep["a"] = res.a;
  rep["a_det"] = res.a_det;
  rep["c"] = res.c;
  bool pass = res.ok(o.rec_tol);
  rep["verdict"] = pass ? "pass" : "fail";
  rep["method"] = "grid";
  return emit(rep, o, pass ? 0 : 2);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metacurv: contravariant connections, metacurvature, and "
               "Poisson reconstruction over chart files"};
  app.require_subcommand(1);

  Options o;
  std::vector<CLI::App*> subs;
  for (const char* name : {"validate", "connection", "hawkins", "metacurvature",
                           "tensor-t", "reconstruct"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--chart", o.chart_path, "chart JSON file")->required();
    sub->add_option("--output", o.output, "output format: json|text")
        ->check(CLI::IsMember({"json", "text"}));
    sub->add_option("--tol", o.tol, "zero-test tolerance");
    sub->add_option("--seed", o.seed, "sampling seed");
    if (std::string(name) == "reconstruct") {
      sub->add_option("--grid", o.grid_nodes, "grid nodes per axis");
      sub->add_option("--step", o.step, "integrator step bound");
      sub->add_option("--rec-tol", o.rec_tol, "reconstruction residual tolerance");
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  try {
    mc::ChartData data = mc::load_chart_file(o.chart_path);
    if (subs[0]->parsed()) return cmd_validate(data, o);
    if (subs[1]->parsed()) return cmd_connection(data, o);
    if (subs[2]->parsed()) return cmd_hawkins(data, o);
    if (subs[3]->parsed()) return cmd_metacurvature(data, o);
    if (subs[4]->parsed()) return cmd_tensor_t(data, o);
    if (subs[5]->parsed()) return cmd_reconstruct(data, o);
  } catch (const mc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
