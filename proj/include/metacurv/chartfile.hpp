#pragma once

#include "metacurv/connection.hpp"

namespace metacurv {

// Parsed chart description file. Raw tables are kept so that validation
// commands can report violations instead of failing at load time.
struct ChartData {
  ChartPtr chart;
  PoissonStructure pi;
  std::optional<SymMatrix> metric_raw;
  std::optional<std::vector<std::vector<std::vector<ScalarExpr>>>> christoffel_raw;
  std::optional<LieAlgebraAction> action;  // not yet validated

  bool has_connection_source() const {
    return metric_raw || christoffel_raw || action;
  }

  Metric make_metric() const;  // throws if absent or not admissible

  // Connection by priority: explicit Christoffel table, then the metric
  // contravariant connection, then D^r from the action.
  ContravariantConnection make_connection() const;
};

// Loads and structurally validates a chart JSON document. Unknown keys and
// malformed entries are rejected with an Error naming the offender.
ChartData load_chart_file(const std::string& path);
ChartData load_chart_json(const std::string& text);

}  // namespace metacurv
