#pragma once

#include <map>
#include <vector>

#include "metacurv/chart.hpp"
#include "metacurv/expr.hpp"

namespace metacurv {

// Strictly increasing multi-index into the chart coordinates; the empty set
// indexes the degree-0 component.
using IdxSet = std::vector<int>;

namespace graded {

using TermMap = std::map<IdxSet, ScalarExpr>;

// Sorts `idx` in place and returns the permutation sign; 0 if an index
// repeats.
int sort_sign(IdxSet& idx);

void add_term(TermMap& t, IdxSet idx, const ScalarExpr& coeff);
void prune(TermMap& t);
TermMap add(const TermMap& a, const TermMap& b);
TermMap negate(const TermMap& a);
TermMap scale(const TermMap& a, const ScalarExpr& s);
TermMap wedge(const TermMap& a, const TermMap& b);
bool is_zero(const TermMap& a);
int max_degree(const TermMap& a);

}  // namespace graded

enum class Variance { Covariant, Contravariant };

// Graded exterior object over a chart with ScalarExpr coefficients in the
// coordinate (co)basis. Components of every degree may coexist; all-zero
// components are pruned away.
template <Variance V>
class Graded {
 public:
  explicit Graded(ChartPtr chart) : chart_(std::move(chart)) {}

  static Graded zero(ChartPtr chart) { return Graded(std::move(chart)); }

  static Graded scalar(ChartPtr chart, ScalarExpr f) {
    Graded g(std::move(chart));
    graded::add_term(g.t_, {}, f);
    graded::prune(g.t_);
    return g;
  }

  // Basis element of degree 1: dx_i (covariant) or d/dx_i (contravariant).
  static Graded basis(ChartPtr chart, int i) {
    if (i < 0 || i >= chart->dim()) throw Error("basis index out of range");
    Graded g(std::move(chart));
    graded::add_term(g.t_, {i}, ScalarExpr::constant(1));
    return g;
  }

  const ChartPtr& chart() const { return chart_; }
  const graded::TermMap& terms() const { return t_; }

  ScalarExpr component(IdxSet idx) const {
    int s = graded::sort_sign(idx);
    if (s == 0) return ScalarExpr();
    auto it = t_.find(idx);
    if (it == t_.end()) return ScalarExpr();
    return s > 0 ? it->second : -it->second;
  }

  void set_component(IdxSet idx, const ScalarExpr& coeff) {
    graded::add_term(t_, std::move(idx), coeff);
    graded::prune(t_);
  }

  bool is_zero() const { return t_.empty(); }
  int max_degree() const { return graded::max_degree(t_); }

  bool is_homogeneous(int degree) const {
    for (const auto& [idx, c] : t_)
      if (static_cast<int>(idx.size()) != degree) return false;
    return true;
  }

  Graded operator+(const Graded& o) const {
    require_same_chart(chart_, o.chart_);
    return Graded(chart_, graded::add(t_, o.t_));
  }
  Graded operator-(const Graded& o) const {
    require_same_chart(chart_, o.chart_);
    return Graded(chart_, graded::add(t_, graded::negate(o.t_)));
  }
  Graded operator-() const { return Graded(chart_, graded::negate(t_)); }

  Graded scaled(const ScalarExpr& s) const {
    return Graded(chart_, graded::scale(t_, s));
  }

  Graded wedge(const Graded& o) const {
    require_same_chart(chart_, o.chart_);
    return Graded(chart_, graded::wedge(t_, o.t_));
  }

  Graded(ChartPtr chart, graded::TermMap t)
      : chart_(std::move(chart)), t_(std::move(t)) {
    graded::prune(t_);
  }

 private:
  ChartPtr chart_;
  graded::TermMap t_;
};

using DiffForm = Graded<Variance::Covariant>;
using MultiVector = Graded<Variance::Contravariant>;
using VectorField = MultiVector;  // degree-1 usage
using OneForm = DiffForm;         // degree-1 usage

template <Variance V>
Graded<V> wedge(const Graded<V>& a, const Graded<V>& b) {
  return a.wedge(b);
}

// Exterior derivative (degree +1); satisfies d(d(sigma)) = 0 and the graded
// Leibniz rule over the wedge.
DiffForm exterior_d(const DiffForm& sigma);

// Contraction of a multivector into a form; for decomposables
// i_{X ^ Y} = i_Y after i_X. Throws on degree underflow.
DiffForm interior_product(const MultiVector& p, const DiffForm& sigma);

// dual pairing <alpha, X> for a 1-form and a vector field.
ScalarExpr pairing(const DiffForm& alpha, const MultiVector& x);

// Cartan formula L_X = i_X d + d i_X (with the degree-0 case i_X df).
DiffForm lie_derivative(const MultiVector& x, const DiffForm& sigma);

// Lie bracket of vector fields (degree-1 multivectors).
MultiVector lie_bracket(const MultiVector& x, const MultiVector& y);

// Action of a vector field on a function.
ScalarExpr apply_vector(const MultiVector& x, const ScalarExpr& f);

}  // namespace metacurv
