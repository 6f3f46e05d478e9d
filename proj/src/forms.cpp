#include "metacurv/forms.hpp"

#include <algorithm>

namespace metacurv {

namespace graded {

int sort_sign(IdxSet& idx) {
  int sign = 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    std::size_t j = i;
    while (j > 0 && idx[j - 1] > idx[j]) {
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
      --j;
    }
  }
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (idx[i - 1] == idx[i]) return 0;
  return sign;
}

void add_term(TermMap& t, IdxSet idx, const ScalarExpr& coeff) {
  int s = sort_sign(idx);
  if (s == 0 || coeff.is_zero()) return;
  ScalarExpr c = s > 0 ? coeff : -coeff;
  auto it = t.find(idx);
  if (it == t.end())
    t.emplace(std::move(idx), std::move(c));
  else
    it->second += c;
}

void prune(TermMap& t) {
  for (auto it = t.begin(); it != t.end();)
    it = it->second.is_zero() ? t.erase(it) : std::next(it);
}

TermMap add(const TermMap& a, const TermMap& b) {
  TermMap r = a;
  for (const auto& [idx, c] : b) add_term(r, idx, c);
  prune(r);
  return r;
}

TermMap negate(const TermMap& a) {
  TermMap r;
  for (const auto& [idx, c] : a) r.emplace(idx, -c);
  return r;
}

TermMap scale(const TermMap& a, const ScalarExpr& s) {
  TermMap r;
  for (const auto& [idx, c] : a) r.emplace(idx, c * s);
  prune(r);
  return r;
}

TermMap wedge(const TermMap& a, const TermMap& b) {
  TermMap r;
  for (const auto& [ia, ca] : a) {
    for (const auto& [ib, cb] : b) {
      IdxSet idx = ia;
      idx.insert(idx.end(), ib.begin(), ib.end());
      add_term(r, std::move(idx), ca * cb);
    }
  }
  prune(r);
  return r;
}

bool is_zero(const TermMap& a) { return a.empty(); }

int max_degree(const TermMap& a) {
  int d = 0;
  for (const auto& [idx, c] : a) d = std::max(d, static_cast<int>(idx.size()));
  return d;
}

}  // namespace graded

DiffForm exterior_d(const DiffForm& sigma) {
  const int d = sigma.chart()->dim();
  graded::TermMap out;
  for (const auto& [idx, c] : sigma.terms()) {
    for (int k = 0; k < d; ++k) {
      ScalarExpr dc = differentiate(c, k);
      if (dc.is_zero()) continue;
      IdxSet nidx;
      nidx.reserve(idx.size() + 1);
      nidx.push_back(k);
      nidx.insert(nidx.end(), idx.begin(), idx.end());
      graded::add_term(out, std::move(nidx), dc);
    }
  }
  graded::prune(out);
  return DiffForm(sigma.chart(), std::move(out));
}

namespace {

// Contraction of a single basis vector into a term's index set; returns
// false if the index is absent.
bool contract_index(const IdxSet& idx, int k, IdxSet* out, int* sign) {
  auto it = std::find(idx.begin(), idx.end(), k);
  if (it == idx.end()) return false;
  int pos = static_cast<int>(it - idx.begin());
  *sign = pos % 2 == 0 ? 1 : -1;
  out->clear();
  out->reserve(idx.size() - 1);
  out->insert(out->end(), idx.begin(), it);
  out->insert(out->end(), std::next(it), idx.end());
  return true;
}

// i over one multivector term (J sorted) applied to one form term
// (I sorted); i_{X1^...^Xp} = i_{Xp} ... i_{X1}.
void contract_term(const IdxSet& j, const ScalarExpr& cj, const IdxSet& i,
                   const ScalarExpr& ci, graded::TermMap& out) {
  IdxSet cur = i;
  int total_sign = 1;
  for (int k : j) {
    IdxSet next;
    int s = 0;
    if (!contract_index(cur, k, &next, &s)) return;
    total_sign *= s;
    cur = std::move(next);
  }
  ScalarExpr c = cj * ci;
  if (total_sign < 0) c = -c;
  graded::add_term(out, std::move(cur), c);
}

}  // namespace

DiffForm interior_product(const MultiVector& p, const DiffForm& sigma) {
  require_same_chart(p.chart(), sigma.chart());
  for (const auto& [j, cj] : p.terms())
    for (const auto& [i, ci] : sigma.terms())
      if (j.size() > i.size())
        throw PreconditionError("interior product degree underflow");
  graded::TermMap out;
  for (const auto& [j, cj] : p.terms())
    for (const auto& [i, ci] : sigma.terms()) contract_term(j, cj, i, ci, out);
  graded::prune(out);
  return DiffForm(sigma.chart(), std::move(out));
}

ScalarExpr pairing(const DiffForm& alpha, const MultiVector& x) {
  require_same_chart(alpha.chart(), x.chart());
  ScalarExpr s;
  for (const auto& [i, ci] : alpha.terms()) {
    if (i.size() != 1) throw PreconditionError("pairing expects a 1-form");
    for (const auto& [j, cj] : x.terms()) {
      if (j.size() != 1) throw PreconditionError("pairing expects a vector field");
      if (i[0] == j[0]) s += ci * cj;
    }
  }
  return s;
}

ScalarExpr apply_vector(const MultiVector& x, const ScalarExpr& f) {
  ScalarExpr s;
  for (const auto& [j, cj] : x.terms()) {
    if (j.size() != 1)
      throw PreconditionError("apply_vector expects a vector field");
    s += cj * differentiate(f, j[0]);
  }
  return s;
}

DiffForm lie_derivative(const MultiVector& x, const DiffForm& sigma) {
  require_same_chart(x.chart(), sigma.chart());
  // Split off the degree-0 part: L_X f = i_X df, and the interior product
  // below would underflow on it.
  graded::TermMap deg0, rest;
  for (const auto& [i, c] : sigma.terms())
    (i.empty() ? deg0 : rest).emplace(i, c);
  DiffForm positive(sigma.chart(), std::move(rest));
  DiffForm f(sigma.chart(), std::move(deg0));
  DiffForm out = interior_product(x, exterior_d(positive)) +
                 exterior_d(interior_product(x, positive));
  if (!f.is_zero()) out = out + interior_product(x, exterior_d(f));
  return out;
}

MultiVector lie_bracket(const MultiVector& x, const MultiVector& y) {
  require_same_chart(x.chart(), y.chart());
  const int d = x.chart()->dim();
  graded::TermMap out;
  for (const auto& [jm, xm] : x.terms()) {
    if (jm.size() != 1)
      throw PreconditionError("lie_bracket expects vector fields");
    for (const auto& [jk, yk] : y.terms()) {
      if (jk.size() != 1)
        throw PreconditionError("lie_bracket expects vector fields");
      (void)d;
      graded::add_term(out, jk, xm * differentiate(yk, jm[0]));
      graded::add_term(out, jm, -(yk * differentiate(xm, jk[0])));
    }
  }
  graded::prune(out);
  return MultiVector(x.chart(), std::move(out));
}

}  // namespace metacurv
