#include "metacurv/gridfield.hpp"

#include <algorithm>
#include <cmath>

namespace metacurv {

void GridSpec::for_each_node(
    const std::function<void(const std::vector<int>&)>& f) const {
  std::vector<int> node(dim(), 0);
  while (true) {
    f(node);
    int a = dim() - 1;
    while (a >= 0) {
      if (++node[a] < nodes[a]) break;
      node[a] = 0;
      --a;
    }
    if (a < 0) return;
  }
}

GridPtr make_centered_grid(const Point& base, int nodes_per_axis,
                           double half_width) {
  if (nodes_per_axis < 2 || nodes_per_axis % 2 == 0)
    throw Error("centered grid needs an odd node count >= 3");
  auto g = std::make_shared<GridSpec>();
  for (double c : base) {
    g->box.axes.emplace_back(c - half_width, c + half_width);
    g->nodes.push_back(nodes_per_axis);
    g->base_index.push_back(nodes_per_axis / 2);
  }
  return g;
}

GridPtr make_grid(const Box& box, const std::vector<int>& nodes,
                  const Point& base) {
  if (box.axes.size() != nodes.size() || base.size() != nodes.size())
    throw Error("grid specification rank mismatch");
  auto g = std::make_shared<GridSpec>();
  g->box = box;
  g->nodes = nodes;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    double sp = nodes[a] > 1
                    ? (box.axes[a].second - box.axes[a].first) / (nodes[a] - 1)
                    : 0.0;
    double rel = sp > 0 ? (base[a] - box.axes[a].first) / sp : 0.0;
    int idx = static_cast<int>(std::lround(rel));
    if (std::abs(rel - idx) > 1e-9 || idx < 0 || idx >= nodes[a])
      throw Error("grid does not cover the base point on a node");
    g->base_index.push_back(idx);
  }
  return g;
}

GridField::GridField(GridPtr grid)
    : grid_(std::move(grid)), v_(grid_->total_nodes(), 0.0) {}

GridField GridField::sample(GridPtr grid,
                            const std::function<double(const Point&)>& f) {
  GridField out(grid);
  grid->for_each_node(
      [&](const std::vector<int>& node) { out.set(node, f(grid->point(node))); });
  return out;
}

double GridField::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> fd_weights(double z, const std::vector<double>& x, int m) {
  // Fornberg (1988), weights for derivatives 0..m at z; returns order m.
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0;
    double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][m];
  return w;
}

double GridField::derivative_at_node(const std::vector<int>& node, int axis,
                                     int order) const {
  if (order < 1 || order > 3)
    throw PreconditionError("grid derivatives support orders 1..3 only");
  const int n = grid_->nodes[axis];
  const int want = order + 4;  // stencil width for 4th-order accuracy
  const int width = std::min(want, n);
  if (width < order + 1)
    throw PreconditionError("axis too short for requested derivative");
  int start = node[axis] - width / 2;
  start = std::clamp(start, 0, n - width);
  std::vector<double> xs(width);
  for (int i = 0; i < width; ++i) xs[i] = grid_->coord(axis, start + i);
  std::vector<double> w = fd_weights(grid_->coord(axis, node[axis]), xs, order);
  std::vector<int> probe = node;
  double s = 0.0;
  for (int i = 0; i < width; ++i) {
    probe[axis] = start + i;
    s += w[i] * at(probe);
  }
  return s;
}

double GridField::value(const Point& p) const {
  const int d = grid_->dim();
  // Per-axis windows of up to 4 nodes and Lagrange weights.
  std::vector<std::vector<int>> windows(d);
  std::vector<std::vector<double>> weights(d);
  for (int a = 0; a < d; ++a) {
    const int n = grid_->nodes[a];
    const int width = std::min(4, n);
    double sp = grid_->spacing(a);
    int center = sp > 0 ? static_cast<int>(
                              std::floor((p[a] - grid_->box.axes[a].first) / sp))
                        : 0;
    int start = std::clamp(center - width / 2 + 1, 0, n - width);
    std::vector<double> xs(width);
    for (int i = 0; i < width; ++i) xs[i] = grid_->coord(a, start + i);
    std::vector<double> w(width, 1.0);
    for (int i = 0; i < width; ++i) {
      for (int j = 0; j < width; ++j) {
        if (i == j) continue;
        w[i] *= (p[a] - xs[j]) / (xs[i] - xs[j]);
      }
      windows[a].push_back(start + i);
    }
    weights[a] = std::move(w);
  }
  // Sum over the window lattice.
  std::vector<int> pick(d, 0);
  std::vector<int> node(d, 0);
  double s = 0.0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      node[a] = windows[a][pick[a]];
      w *= weights[a][pick[a]];
    }
    s += w * at(node);
    int a = d - 1;
    while (a >= 0) {
      if (++pick[a] < static_cast<int>(windows[a].size())) break;
      pick[a] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return s;
}

}  // namespace metacurv
