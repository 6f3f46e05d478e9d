#pragma once

#include <functional>
#include <memory>

#include "metacurv/chart.hpp"

namespace metacurv {

// Regular tensor-product grid over a box; the base point lies on a node.
struct GridSpec {
  Box box;
  std::vector<int> nodes;       // per-axis node counts
  std::vector<int> base_index;  // node index of the base point per axis

  int dim() const { return static_cast<int>(nodes.size()); }
  double spacing(int axis) const {
    auto [lo, hi] = box.axes[axis];
    return nodes[axis] > 1 ? (hi - lo) / (nodes[axis] - 1) : 0.0;
  }
  double coord(int axis, int index) const {
    return box.axes[axis].first + spacing(axis) * index;
  }
  Point point(const std::vector<int>& node) const {
    Point p(node.size());
    for (std::size_t a = 0; a < node.size(); ++a)
      p[a] = coord(static_cast<int>(a), node[a]);
    return p;
  }
  std::size_t flat_index(const std::vector<int>& node) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx = idx * nodes[a] + node[a];
    return idx;
  }
  std::size_t total_nodes() const {
    std::size_t n = 1;
    for (int c : nodes) n *= c;
    return n;
  }
  // Iterates all nodes (row-major).
  void for_each_node(const std::function<void(const std::vector<int>&)>& f) const;
};

using GridPtr = std::shared_ptr<const GridSpec>;

// Default grid: nodes_per_axis nodes on [base - half, base + half] per axis,
// centered on the base point.
GridPtr make_centered_grid(const Point& base, int nodes_per_axis = 33,
                           double half_width = 0.5);

// Grid over an explicit box; the base point must coincide with a node.
GridPtr make_grid(const Box& box, const std::vector<int>& nodes,
                  const Point& base);

// Sampled real-valued field on a grid with cubic interpolation and
// high-order finite-difference derivatives (orders 1..3).
class GridField {
 public:
  explicit GridField(GridPtr grid);

  const GridPtr& grid() const { return grid_; }

  double at(const std::vector<int>& node) const {
    return v_[grid_->flat_index(node)];
  }
  void set(const std::vector<int>& node, double value) {
    v_[grid_->flat_index(node)] = value;
  }

  // Tensor-product cubic Lagrange interpolation.
  double value(const Point& p) const;

  // Finite-difference derivative of the given order (1..3) along an axis at
  // a grid node, using shifted high-order stencils near the edges.
  double derivative_at_node(const std::vector<int>& node, int axis,
                            int order) const;

  double max_abs() const;

  // Samples a function over the whole grid.
  static GridField sample(GridPtr grid, const std::function<double(const Point&)>& f);

 private:
  GridPtr grid_;
  std::vector<double> v_;
};

// Finite-difference weights for the m-th derivative at point z from the
// given stencil locations (Fornberg's algorithm).
std::vector<double> fd_weights(double z, const std::vector<double>& x, int m);

}  // namespace metacurv
