#include "metacurv/chartfile.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace metacurv {

using Json = nlohmann::json;

namespace {

Rational parse_rational(const Json& j, const std::string& where) {
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (j.is_string()) {
    try {
      return Rational(j.get<std::string>());
    } catch (const std::exception&) {
      throw Error("bad rational literal in " + where);
    }
  }
  throw Error("expected integer or rational string in " + where);
}

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw Error("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

ChartData load_chart_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("chart file is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"name", "coordinates", "leaf_count", "base_point",
                       "domain_box", "poisson", "metric", "christoffel",
                       "action", "declared_flat"},
                      "chart document");
  for (const char* key : {"name", "coordinates", "base_point", "poisson"})
    if (!j.contains(key)) throw Error(std::string("missing key '") + key + "'");

  std::vector<std::string> coords = j["coordinates"].get<std::vector<std::string>>();
  const int d = static_cast<int>(coords.size());
  Point base = j["base_point"].get<Point>();

  Box box;
  if (j.contains("domain_box")) {
    for (const auto& pair : j["domain_box"]) {
      if (!pair.is_array() || pair.size() != 2)
        throw Error("domain_box entries must be [lo, hi] pairs");
      box.axes.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
  }
  int leaf = j.value("leaf_count", -1);
  bool flat = j.value("declared_flat", false);

  ChartData data;
  data.chart = make_chart(j["name"].get<std::string>(), coords, base, box, leaf, flat);

  std::vector<std::tuple<int, int, ScalarExpr>> entries;
  for (const auto& e : j["poisson"]) {
    if (!e.is_array() || e.size() != 3)
      throw Error("poisson entries must be [i, j, expr]");
    entries.emplace_back(e[0].get<int>(), e[1].get<int>(),
                         parse(e[2].get<std::string>(), coords));
  }
  data.pi = PoissonStructure::from_entries(data.chart, entries);

  if (j.contains("metric")) {
    SymMatrix g(d, std::vector<ScalarExpr>(d));
    std::vector<std::vector<bool>> given(d, std::vector<bool>(d, false));
    for (const auto& e : j["metric"]) {
      if (!e.is_array() || e.size() != 3)
        throw Error("metric entries must be [i, j, expr]");
      int a = e[0].get<int>(), b = e[1].get<int>();
      if (a < 0 || b < 0 || a >= d || b >= d)
        throw Error("metric index out of range");
      ScalarExpr v = parse(e[2].get<std::string>(), coords);
      g[a][b] = v;
      given[a][b] = true;
      if (a != b && !given[b][a]) g[b][a] = v;
    }
    data.metric_raw = std::move(g);
  }

  if (j.contains("christoffel")) {
    std::vector<std::vector<std::vector<ScalarExpr>>> gamma(
        d, std::vector<std::vector<ScalarExpr>>(d, std::vector<ScalarExpr>(d)));
    for (const auto& e : j["christoffel"]) {
      if (!e.is_array() || e.size() != 4)
        throw Error("christoffel entries must be [i, j, k, expr]");
      int a = e[0].get<int>(), b = e[1].get<int>(), c = e[2].get<int>();
      if (a < 0 || b < 0 || c < 0 || a >= d || b >= d || c >= d)
        throw Error("christoffel index out of range");
      gamma[a][b][c] = parse(e[3].get<std::string>(), coords);
    }
    data.christoffel_raw = std::move(gamma);
  }

  if (j.contains("action")) {
    const Json& act = j["action"];
    reject_unknown_keys(
        act,
        {"dim", "structure_constants", "fundamental_fields", "r",
         "anti_homomorphism"},
        "action");
    for (const char* key : {"dim", "structure_constants", "fundamental_fields", "r"})
      if (!act.contains(key))
        throw Error(std::string("missing key '") + key + "' in action");
    LieAlgebraAction a;
    a.chart = data.chart;
    a.n = act["dim"].get<int>();
    if (a.n <= 0) throw Error("action dim must be positive");
    a.anti_homomorphism = act.value("anti_homomorphism", false);
    a.c.assign(a.n, std::vector<std::vector<Rational>>(
                        a.n, std::vector<Rational>(a.n, Rational(0))));
    for (const auto& e : act["structure_constants"]) {
      if (!e.is_array() || e.size() != 4)
        throw Error("structure_constants entries must be [i, j, k, value]");
      int i = e[0].get<int>(), jj = e[1].get<int>(), k = e[2].get<int>();
      if (i < 0 || jj < 0 || k < 0 || i >= a.n || jj >= a.n || k >= a.n)
        throw Error("structure constant index out of range");
      Rational v = parse_rational(e[3], "structure_constants");
      a.c[i][jj][k] = v;
      a.c[jj][i][k] = -v;
    }
    if (static_cast<int>(act["fundamental_fields"].size()) != a.n)
      throw Error("fundamental_fields must list one field per basis element");
    for (const auto& field : act["fundamental_fields"]) {
      if (!field.is_array() || static_cast<int>(field.size()) != d)
        throw Error("each fundamental field needs one component per coordinate");
      VectorField v(data.chart);
      for (int m = 0; m < d; ++m)
        v.set_component({m}, parse(field[m].get<std::string>(), coords));
      a.zeta.push_back(std::move(v));
    }
    a.r.assign(a.n, std::vector<Rational>(a.n, Rational(0)));
    for (const auto& e : act["r"]) {
      if (!e.is_array() || e.size() != 3)
        throw Error("r entries must be [i, j, value]");
      int i = e[0].get<int>(), jj = e[1].get<int>();
      if (i < 0 || jj < 0 || i >= a.n || jj >= a.n)
        throw Error("r index out of range");
      Rational v = parse_rational(e[2], "r");
      a.r[i][jj] = v;
      a.r[jj][i] = -v;
    }
    data.action = std::move(a);
  }
  return data;
}

ChartData load_chart_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open chart file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return load_chart_json(text);
}

Metric ChartData::make_metric() const {
  if (!metric_raw) throw PreconditionError("chart has no metric");
  return Metric(chart, *metric_raw);
}

ContravariantConnection ChartData::make_connection() const {
  if (christoffel_raw) return ContravariantConnection(pi, *christoffel_raw);
  if (metric_raw) return levi_civita_contravariant(pi, make_metric());
  if (action) return build_Dr(*action, pi);
  throw PreconditionError(
      "chart supplies no connection source (christoffel, metric, or action)");
}

}  // namespace metacurv
