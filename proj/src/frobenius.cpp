#include "metacurv/frobenius.hpp"

#include <cmath>

namespace metacurv {

namespace {

double axis_delta(const GridSpec& grid, int axis) {
  double sp = grid.spacing(axis);
  return sp > 0 ? std::min(sp / 2, 1e-3) : 1e-4;
}

}  // namespace

namespace {

// Centered 4th-order difference of a matrix/vector-valued callable.
template <typename F>
auto centered_diff(const F& f, const Point& p, int axis, double h)
    -> decltype(f(p)) {
  Point p2 = p, p1 = p, m1 = p, m2 = p;
  p2[axis] += 2 * h;
  p1[axis] += h;
  m1[axis] -= h;
  m2[axis] -= 2 * h;
  return ((-f(p2) + 8 * f(p1) - 8 * f(m1) + f(m2)) / (12 * h)).eval();
}

}  // namespace

double integrability_residual(const FrobeniusSystem& sys, const GridSpec& grid) {
  double res = 0.0;
  const int na = static_cast<int>(sys.axes.size());
  grid.for_each_node([&](const std::vector<int>& node) {
    Point p = grid.point(node);
    for (int a = 0; a < na; ++a) {
      for (int b = a + 1; b < na; ++b) {
        int ax = sys.axes[a], bx = sys.axes[b];
        double da = axis_delta(grid, ax), db = axis_delta(grid, bx);
        Eigen::MatrixXd ga = sys.gamma[a](p), gb = sys.gamma[b](p);
        Eigen::MatrixXd dga_db = centered_diff(sys.gamma[a], p, bx, db);
        Eigen::MatrixXd dgb_da = centered_diff(sys.gamma[b], p, ax, da);
        Eigen::MatrixXd rm = ga * gb + dga_db - gb * ga - dgb_da;
        res = std::max(res, rm.cwiseAbs().maxCoeff());
        Eigen::VectorXd ya = sys.rhs[a](p), yb = sys.rhs[b](p);
        Eigen::VectorXd dya_db = centered_diff(sys.rhs[a], p, bx, db);
        Eigen::VectorXd dyb_da = centered_diff(sys.rhs[b], p, ax, da);
        Eigen::VectorXd rv = ga * yb + dya_db - gb * ya - dyb_da;
        if (rv.size() > 0) res = std::max(res, rv.cwiseAbs().maxCoeff());
      }
    }
  });
  return res;
}

namespace {

// One RK4 march along `axis` from the value at `from` to the adjacent node,
// sub-stepping to respect the step bound.
Eigen::VectorXd march(const FrobeniusSystem& sys, int axis_pos,
                      const GridSpec& grid, const std::vector<int>& from,
                      int direction, const Eigen::VectorXd& start) {
  const int axis = sys.axes[axis_pos];
  Point p = grid.point(from);
  const double t0 = p[axis];
  const double t1 = grid.coord(axis, from[axis] + direction);
  const double span = t1 - t0;
  int nsub = std::max(1, static_cast<int>(std::ceil(std::abs(span) / sys.step)));
  if (std::abs(span) <= 0.0) return start;
  const double h = span / nsub;
  auto f = [&](double t, const Eigen::VectorXd& b) {
    Point q = p;
    q[axis] = t;
    return (sys.gamma[axis_pos](q) * b + sys.rhs[axis_pos](q)).eval();
  };
  Eigen::VectorXd b = start;
  double t = t0;
  for (int s = 0; s < nsub; ++s) {
    Eigen::VectorXd k1 = f(t, b);
    Eigen::VectorXd k2 = f(t + h / 2, b + (h / 2) * k1);
    Eigen::VectorXd k3 = f(t + h / 2, b + (h / 2) * k2);
    Eigen::VectorXd k4 = f(t + h, b + h * k3);
    b += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
  }
  return b;
}

std::vector<GridField> solve_with_order(const FrobeniusSystem& sys, GridPtr grid,
                                        const std::vector<int>& order) {
  const GridSpec& g = *grid;
  const int d = g.dim();
  if (sys.size <= 0) throw PreconditionError("empty Frobenius system");
  std::vector<GridField> out(sys.size, GridField(grid));
  std::vector<char> filled(g.total_nodes(), 0);

  auto store = [&](const std::vector<int>& node, const Eigen::VectorXd& v) {
    for (int c = 0; c < sys.size; ++c) out[c].set(node, v(c));
    filled[g.flat_index(node)] = 1;
  };
  auto load = [&](const std::vector<int>& node) {
    Eigen::VectorXd v(sys.size);
    for (int c = 0; c < sys.size; ++c) v(c) = out[c].at(node);
    return v;
  };

  // Seed every slice origin (active axes at their base node).
  std::vector<int> frozen;
  for (int a = 0; a < d; ++a)
    if (std::find(sys.axes.begin(), sys.axes.end(), a) == sys.axes.end())
      frozen.push_back(a);
  std::vector<std::vector<int>> frontier;
  {
    std::vector<int> node(d);
    for (int a = 0; a < d; ++a) node[a] = g.base_index[a];
    std::function<void(std::size_t)> rec = [&](std::size_t fi) {
      if (fi == frozen.size()) {
        store(node, sys.initial(g.point(node)));
        frontier.push_back(node);
        return;
      }
      for (int i = 0; i < g.nodes[frozen[fi]]; ++i) {
        node[frozen[fi]] = i;
        rec(fi + 1);
      }
    };
    rec(0);
  }

  // Sweep axis by axis: every already-filled node spawns a march in both
  // directions along the current axis.
  for (int apos_idx = 0; apos_idx < static_cast<int>(order.size()); ++apos_idx) {
    int apos = order[apos_idx];
    int axis = sys.axes[apos];
    std::vector<std::vector<int>> next = frontier;
    for (const auto& start_node : frontier) {
      for (int direction : {+1, -1}) {
        std::vector<int> node = start_node;
        Eigen::VectorXd v = load(node);
        while (true) {
          int ni = node[axis] + direction;
          if (ni < 0 || ni >= g.nodes[axis]) break;
          v = march(sys, apos, g, node, direction, v);
          node[axis] = ni;
          store(node, v);
          next.push_back(node);
        }
      }
    }
    frontier = std::move(next);
  }

  for (std::size_t i = 0; i < filled.size(); ++i)
    if (!filled[i]) throw Error("Frobenius sweep left grid nodes unfilled");
  return out;
}

}  // namespace

std::vector<GridField> solve(const FrobeniusSystem& sys, GridPtr grid) {
  double res = integrability_residual(sys, *grid);
  if (res >= sys.tol_int)
    throw PreconditionError("Frobenius system is not integrable (residual " +
                            std::to_string(res) + ")");
  std::vector<int> order(sys.axes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  return solve_with_order(sys, std::move(grid), order);
}

std::vector<GridField> solve_reversed(const FrobeniusSystem& sys, GridPtr grid) {
  std::vector<int> order(sys.axes.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<int>(order.size() - 1 - i);
  return solve_with_order(sys, std::move(grid), order);
}

double path_independence_discrepancy(const FrobeniusSystem& sys, GridPtr grid) {
  auto a = solve(sys, grid);
  auto b = solve_reversed(sys, grid);
  double m = 0.0;
  grid->for_each_node([&](const std::vector<int>& node) {
    for (int c = 0; c < sys.size; ++c)
      m = std::max(m, std::abs(a[c].at(node) - b[c].at(node)));
  });
  return m;
}

}  // namespace metacurv
