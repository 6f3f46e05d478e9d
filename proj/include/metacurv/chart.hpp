#pragma once

#include <memory>
#include <string>
#include <vector>

#include "metacurv/expr.hpp"

namespace metacurv {

// A point of a chart; length equals the chart dimension.
using Point = std::vector<double>;

// A local coordinate chart: named coordinates, a base point, and the domain
// box used by sampling checks and grid construction. The first `leaf_dim`
// coordinates are the leafwise (x) block of a split chart; the rest are
// transverse (y). leaf_dim < 0 means no splitting was declared.
struct Chart {
  std::string name;
  std::vector<std::string> coords;
  Point base;
  Box box;
  int leaf_dim = -1;
  bool declared_flat = false;

  int dim() const { return static_cast<int>(coords.size()); }
  int transverse_dim() const { return leaf_dim < 0 ? 0 : dim() - leaf_dim; }

  bool is_leaf_coord(int i) const { return leaf_dim >= 0 && i < leaf_dim; }

  ScalarExpr parse_expr(const std::string& text) const {
    return parse(text, coords);
  }
};

using ChartPtr = std::shared_ptr<const Chart>;

inline Box shifted_unit_box(const Point& base) {
  Box b;
  for (double c : base) b.axes.emplace_back(c - 1.0, c + 1.0);
  return b;
}

inline ChartPtr make_chart(std::string name, std::vector<std::string> coords,
                           Point base, Box box = {}, int leaf_dim = -1,
                           bool declared_flat = false) {
  if (base.size() != coords.size())
    throw Error("base point length does not match chart dimension");
  for (double c : base)
    if (!std::isfinite(c)) throw Error("non-finite base point entry");
  auto ch = std::make_shared<Chart>();
  ch->name = std::move(name);
  ch->coords = std::move(coords);
  ch->base = std::move(base);
  ch->box = box.axes.empty() ? shifted_unit_box(ch->base) : std::move(box);
  if (ch->box.axes.size() != ch->coords.size())
    throw Error("domain box rank does not match chart dimension");
  ch->leaf_dim = leaf_dim;
  ch->declared_flat = declared_flat;
  return ch;
}

inline void require_same_chart(const ChartPtr& a, const ChartPtr& b) {
  if (a != b)
    throw ChartMismatchError("operands live on different charts ('" +
                             (a ? a->name : "<null>") + "' vs '" +
                             (b ? b->name : "<null>") + "')");
}

}  // namespace metacurv
