#include "metacurv/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace metacurv {

const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
  }
  return "?";
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

namespace detail {

// ---------------------------------------------------------------------------
// Raw expression trees (only produced by the parser and explicit node
// construction; all arithmetic works on normal forms).
// ---------------------------------------------------------------------------

struct Node {
  enum Kind { Const, Coord, Add, Sub, Mul, Div, Neg, Pow, Apply };
  Kind kind;
  Rational value;             // Const
  int coord = -1;             // Coord
  int exponent = 0;           // Pow
  Func fn = Func::Sin;        // Apply
  NodePtr a, b;
};

NodePtr make_const(Rational q) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Const;
  n->value = std::move(q);
  return n;
}

NodePtr make_coord(int i) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Coord;
  n->coord = i;
  return n;
}

NodePtr make_binary(Node::Kind k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_neg(NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Neg;
  n->a = std::move(a);
  return n;
}

NodePtr make_pow(NodePtr a, int e) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Pow;
  n->a = std::move(a);
  n->exponent = e;
  return n;
}

NodePtr make_apply(Func f, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Apply;
  n->fn = f;
  n->a = std::move(a);
  return n;
}

// ---------------------------------------------------------------------------
// Normal form: multivariate polynomials over Q in "generators" (coordinates
// and elementary-function atoms), divided by a product of monic polynomial
// factors.
// ---------------------------------------------------------------------------

struct Atom;
using AtomPtr = std::shared_ptr<const Atom>;

struct Gen {
  int coord = -1;  // >= 0: coordinate index
  AtomPtr atom;    // non-null: elementary-function atom
  bool is_coord() const { return coord >= 0; }
};

using Monomial = std::vector<std::pair<Gen, int>>;  // sorted, exponents > 0

int cmp_gen(const Gen& a, const Gen& b);

struct MonoLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

struct Poly {
  std::map<Monomial, Rational, MonoLess> t;  // nonzero coefficients only

  bool is_zero() const { return t.empty(); }
  bool is_constant() const {
    return t.empty() || (t.size() == 1 && t.begin()->first.empty());
  }
  Rational constant_value() const {
    if (t.empty()) return Rational(0);
    return t.begin()->second;
  }
};

struct RatPoly {
  Poly num;
  // Denominator as product of monic factors with positive exponents,
  // sorted, none dividing the numerator.
  std::vector<std::pair<Poly, int>> den;

  bool is_zero() const { return num.is_zero(); }
  bool den_trivial() const { return den.empty(); }
};

struct Atom {
  Func fn;
  RatPoly arg;
};

int cmp_rational(const Rational& a, const Rational& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

int cmp_mono(const Monomial& a, const Monomial& b);
int cmp_poly(const Poly& a, const Poly& b);
int cmp_ratpoly(const RatPoly& a, const RatPoly& b);

int cmp_gen(const Gen& a, const Gen& b) {
  if (a.is_coord() != b.is_coord()) return a.is_coord() ? -1 : 1;
  if (a.is_coord()) {
    if (a.coord != b.coord) return a.coord < b.coord ? -1 : 1;
    return 0;
  }
  if (a.atom->fn != b.atom->fn)
    return static_cast<int>(a.atom->fn) < static_cast<int>(b.atom->fn) ? -1 : 1;
  return cmp_ratpoly(a.atom->arg, b.atom->arg);
}

int cmp_mono(const Monomial& a, const Monomial& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = cmp_gen(a[i].first, b[i].first);
    if (c != 0) return c;
    if (a[i].second != b[i].second) return a[i].second < b[i].second ? -1 : 1;
  }
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return 0;
}

bool MonoLess::operator()(const Monomial& a, const Monomial& b) const {
  return cmp_mono(a, b) < 0;
}

int cmp_poly(const Poly& a, const Poly& b) {
  auto ia = a.t.begin(), ib = b.t.begin();
  for (; ia != a.t.end() && ib != b.t.end(); ++ia, ++ib) {
    int c = cmp_mono(ia->first, ib->first);
    if (c != 0) return c;
    c = cmp_rational(ia->second, ib->second);
    if (c != 0) return c;
  }
  if (ia != a.t.end()) return 1;
  if (ib != b.t.end()) return -1;
  return 0;
}

int cmp_ratpoly(const RatPoly& a, const RatPoly& b) {
  int c = cmp_poly(a.num, b.num);
  if (c != 0) return c;
  std::size_t n = std::min(a.den.size(), b.den.size());
  for (std::size_t i = 0; i < n; ++i) {
    c = cmp_poly(a.den[i].first, b.den[i].first);
    if (c != 0) return c;
    if (a.den[i].second != b.den[i].second)
      return a.den[i].second < b.den[i].second ? -1 : 1;
  }
  if (a.den.size() != b.den.size()) return a.den.size() < b.den.size() ? -1 : 1;
  return 0;
}

// -------------------------- polynomial arithmetic --------------------------

void poly_add_term(Poly& p, const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto it = p.t.find(m);
  if (it == p.t.end()) {
    p.t.emplace(m, c);
  } else {
    it->second += c;
    if (it->second == 0) p.t.erase(it);
  }
}

Poly poly_add(const Poly& a, const Poly& b) {
  Poly r = a;
  for (const auto& [m, c] : b.t) poly_add_term(r, m, c);
  return r;
}

Poly poly_neg(const Poly& a) {
  Poly r;
  for (const auto& [m, c] : a.t) r.t.emplace(m, -c);
  return r;
}

Poly poly_scale(const Poly& a, const Rational& s) {
  Poly r;
  if (s == 0) return r;
  for (const auto& [m, c] : a.t) r.t.emplace(m, c * s);
  return r;
}

Monomial mono_mul(const Monomial& a, const Monomial& b) {
  Monomial r;
  r.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    int c = cmp_gen(a[i].first, b[j].first);
    if (c < 0) {
      r.push_back(a[i++]);
    } else if (c > 0) {
      r.push_back(b[j++]);
    } else {
      r.emplace_back(a[i].first, a[i].second + b[j].second);
      ++i;
      ++j;
    }
  }
  while (i < a.size()) r.push_back(a[i++]);
  while (j < b.size()) r.push_back(b[j++]);
  return r;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly r;
  for (const auto& [ma, ca] : a.t)
    for (const auto& [mb, cb] : b.t) poly_add_term(r, mono_mul(ma, mb), ca * cb);
  return r;
}

Poly poly_constant(const Rational& c) {
  Poly p;
  if (c != 0) p.t.emplace(Monomial{}, c);
  return p;
}

Poly poly_gen(const Gen& g) {
  Poly p;
  p.t.emplace(Monomial{{g, 1}}, Rational(1));
  return p;
}

// Divisibility of monomials: does a divide m?
bool mono_divides(const Monomial& a, const Monomial& m, Monomial* quotient) {
  Monomial q;
  std::size_t i = 0;
  for (const auto& [g, e] : a) {
    while (i < m.size() && cmp_gen(m[i].first, g) < 0) {
      q.push_back(m[i]);
      ++i;
    }
    if (i == m.size() || cmp_gen(m[i].first, g) != 0 || m[i].second < e)
      return false;
    if (m[i].second > e) q.emplace_back(m[i].first, m[i].second - e);
    ++i;
  }
  while (i < m.size()) q.push_back(m[i++]);
  if (quotient) *quotient = std::move(q);
  return true;
}

// Exact division test by leading-term reduction; nullopt if b does not
// divide a exactly.
std::optional<Poly> poly_exact_divide(const Poly& a, const Poly& b) {
  if (b.is_zero()) return std::nullopt;
  Poly rem = a;
  Poly quot;
  const auto& blead = *b.t.rbegin();
  while (!rem.is_zero()) {
    const auto& rlead = *rem.t.rbegin();
    Monomial qm;
    if (!mono_divides(blead.first, rlead.first, &qm)) return std::nullopt;
    Rational qc = rlead.second / blead.second;
    poly_add_term(quot, qm, qc);
    Poly sub;
    for (const auto& [m, c] : b.t)
      poly_add_term(sub, mono_mul(m, qm), c * qc);
    rem = poly_add(rem, poly_neg(sub));
  }
  return quot;
}

Rational leading_coeff(const Poly& p) {
  return p.t.empty() ? Rational(0) : p.t.rbegin()->second;
}

// Reduce even powers of sqrt atoms with polynomial arguments:
// sqrt(u)^(2k+r) -> u^k * sqrt(u)^r.
Poly sqrt_reduce(const Poly& p) {
  bool needed = false;
  for (const auto& [m, c] : p.t)
    for (const auto& [g, e] : m)
      if (!g.is_coord() && g.atom->fn == Func::Sqrt && e >= 2 &&
          g.atom->arg.den_trivial())
        needed = true;
  if (!needed) return p;
  Poly out;
  for (const auto& [m, c] : p.t) {
    Poly term = poly_constant(c);
    Monomial rest;
    for (const auto& [g, e] : m) {
      if (!g.is_coord() && g.atom->fn == Func::Sqrt && e >= 2 &&
          g.atom->arg.den_trivial()) {
        int k = e / 2, r = e % 2;
        Poly argp = g.atom->arg.num;  // den trivial
        for (int i = 0; i < k; ++i) term = poly_mul(term, argp);
        if (r) rest.emplace_back(g, 1);
      } else {
        rest.emplace_back(g, e);
      }
    }
    Poly restp;
    restp.t.emplace(std::move(rest), Rational(1));
    out = poly_add(out, poly_mul(term, restp));
  }
  return out;
}

// --------------------------- rational functions ----------------------------

using FactorVec = std::vector<std::pair<Poly, int>>;

void factor_insert(FactorVec& fs, const Poly& f, int pow) {
  if (pow == 0) return;
  for (auto& [g, e] : fs) {
    if (cmp_poly(g, f) == 0) {
      e += pow;
      return;
    }
  }
  fs.emplace_back(f, pow);
}

// Build a canonical rational function from numerator and factored
// denominator: factors are made monic, constants folded into the numerator,
// equal factors merged, and factors cancelled against the numerator.
RatPoly make_ratpoly(Poly num, FactorVec den) {
  num = sqrt_reduce(num);
  Rational scale(1);
  FactorVec fs;
  for (auto& [f, e] : den) {
    if (e == 0) continue;
    Poly fr = sqrt_reduce(f);
    if (fr.is_zero()) throw Error("division by zero expression");
    if (fr.is_constant()) {
      for (int i = 0; i < e; ++i) scale /= fr.constant_value();
      continue;
    }
    Rational lc = leading_coeff(fr);
    if (lc != 1) {
      fr = poly_scale(fr, Rational(1) / lc);
      for (int i = 0; i < e; ++i) scale /= lc;
    }
    factor_insert(fs, fr, e);
  }
  if (scale != 1) num = poly_scale(num, scale);
  if (num.is_zero()) return RatPoly{};
  // Cancel factors that divide the numerator exactly.
  for (auto& [f, e] : fs) {
    while (e > 0) {
      auto q = poly_exact_divide(num, f);
      if (!q) break;
      num = std::move(*q);
      --e;
    }
  }
  FactorVec kept;
  for (auto& fe : fs)
    if (fe.second > 0) kept.push_back(std::move(fe));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    int c = cmp_poly(a.first, b.first);
    if (c != 0) return c < 0;
    return a.second < b.second;
  });
  RatPoly r;
  r.num = std::move(num);
  r.den = std::move(kept);
  return r;
}

RatPoly rp_constant(const Rational& c) {
  RatPoly r;
  r.num = poly_constant(c);
  return r;
}

RatPoly rp_gen(const Gen& g) {
  RatPoly r;
  r.num = poly_gen(g);
  return r;
}

RatPoly rp_neg(const RatPoly& a) {
  RatPoly r;
  r.num = poly_neg(a.num);
  r.den = a.den;
  return r;
}

RatPoly rp_add(const RatPoly& a, const RatPoly& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  // Common denominator with per-factor maximal powers.
  FactorVec common = a.den;
  for (const auto& [f, e] : b.den) {
    bool found = false;
    for (auto& [g, eg] : common)
      if (cmp_poly(g, f) == 0) {
        eg = std::max(eg, e);
        found = true;
      }
    if (!found) common.emplace_back(f, e);
  }
  auto complement = [&common](const FactorVec& d) {
    Poly p = poly_constant(Rational(1));
    for (const auto& [f, e] : common) {
      int have = 0;
      for (const auto& [g, eg] : d)
        if (cmp_poly(g, f) == 0) have = eg;
      for (int i = 0; i < e - have; ++i) p = poly_mul(p, f);
    }
    return p;
  };
  Poly num = poly_add(poly_mul(a.num, complement(a.den)),
                      poly_mul(b.num, complement(b.den)));
  return make_ratpoly(std::move(num), std::move(common));
}

RatPoly rp_mul(const RatPoly& a, const RatPoly& b) {
  if (a.is_zero() || b.is_zero()) return RatPoly{};
  FactorVec den = a.den;
  for (const auto& [f, e] : b.den) factor_insert(den, f, e);
  return make_ratpoly(poly_mul(a.num, b.num), std::move(den));
}

RatPoly rp_inverse(const RatPoly& a) {
  if (a.is_zero()) throw Error("division by zero expression");
  Poly num = poly_constant(Rational(1));
  for (const auto& [f, e] : a.den)
    for (int i = 0; i < e; ++i) num = poly_mul(num, f);
  FactorVec den;
  den.emplace_back(a.num, 1);
  return make_ratpoly(std::move(num), std::move(den));
}

RatPoly rp_div(const RatPoly& a, const RatPoly& b) {
  return rp_mul(a, rp_inverse(b));
}

RatPoly rp_pow(const RatPoly& a, int e) {
  if (e == 0) return rp_constant(Rational(1));
  RatPoly base = e < 0 ? rp_inverse(a) : a;
  int n = e < 0 ? -e : e;
  RatPoly r = rp_constant(Rational(1));
  for (int i = 0; i < n; ++i) r = rp_mul(r, base);
  return r;
}

bool rp_has_atoms(const RatPoly& a);

bool poly_has_atoms(const Poly& p) {
  for (const auto& [m, c] : p.t)
    for (const auto& [g, e] : m)
      if (!g.is_coord()) return true;
  return false;
}

bool rp_has_atoms(const RatPoly& a) {
  if (poly_has_atoms(a.num)) return true;
  for (const auto& [f, e] : a.den)
    if (poly_has_atoms(f)) return true;
  return false;
}

std::optional<Rational> perfect_square_root(const Rational& q) {
  using boost::multiprecision::cpp_int;
  if (q < 0) return std::nullopt;
  cpp_int n = numerator(q), d = denominator(q);
  cpp_int sn = sqrt(n), sd = sqrt(d);
  if (sn * sn == n && sd * sd == d) return Rational(sn, sd);
  return std::nullopt;
}

RatPoly rp_apply(Func fn, const RatPoly& arg) {
  if (arg.den_trivial() && arg.num.is_constant()) {
    Rational c = arg.num.constant_value();
    switch (fn) {
      case Func::Sin:
        if (c == 0) return rp_constant(Rational(0));
        break;
      case Func::Cos:
        if (c == 0) return rp_constant(Rational(1));
        break;
      case Func::Exp:
        if (c == 0) return rp_constant(Rational(1));
        break;
      case Func::Log:
        if (c == 1) return rp_constant(Rational(0));
        break;
      case Func::Sqrt: {
        auto r = perfect_square_root(c);
        if (r) return rp_constant(*r);
        break;
      }
    }
  }
  Gen g;
  g.atom = std::make_shared<Atom>(Atom{fn, arg});
  return rp_gen(g);
}

// ------------------------------- evaluation --------------------------------

double eval_ratpoly(const RatPoly& p, std::span<const double> x);

double eval_gen(const Gen& g, std::span<const double> x) {
  if (g.is_coord()) {
    if (g.coord < 0 || static_cast<std::size_t>(g.coord) >= x.size())
      throw Error("coordinate index out of range in eval");
    return x[g.coord];
  }
  double a = eval_ratpoly(g.atom->arg, x);
  std::vector<double> pt(x.begin(), x.end());
  switch (g.atom->fn) {
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Exp: return std::exp(a);
    case Func::Log:
      if (a <= 0.0) throw PoleError("log of non-positive value", pt);
      return std::log(a);
    case Func::Sqrt:
      if (a < 0.0) throw PoleError("sqrt of negative value", pt);
      return std::sqrt(a);
  }
  return 0.0;
}

double eval_poly(const Poly& p, std::span<const double> x) {
  double s = 0.0;
  for (const auto& [m, c] : p.t) {
    double t = to_double(c);
    for (const auto& [g, e] : m) {
      double v = eval_gen(g, x);
      for (int i = 0; i < e; ++i) t *= v;
    }
    s += t;
  }
  return s;
}

double eval_ratpoly(const RatPoly& p, std::span<const double> x) {
  double n = eval_poly(p.num, x);
  double d = 1.0;
  for (const auto& [f, e] : p.den) {
    double v = eval_poly(f, x);
    for (int i = 0; i < e; ++i) d *= v;
  }
  if (d == 0.0)
    throw PoleError("division by zero", std::vector<double>(x.begin(), x.end()));
  return n / d;
}

double eval_tree(const Node& n, std::span<const double> x) {
  switch (n.kind) {
    case Node::Const: return to_double(n.value);
    case Node::Coord:
      if (n.coord < 0 || static_cast<std::size_t>(n.coord) >= x.size())
        throw Error("coordinate index out of range in eval");
      return x[n.coord];
    case Node::Add: return eval_tree(*n.a, x) + eval_tree(*n.b, x);
    case Node::Sub: return eval_tree(*n.a, x) - eval_tree(*n.b, x);
    case Node::Mul: return eval_tree(*n.a, x) * eval_tree(*n.b, x);
    case Node::Div: {
      double d = eval_tree(*n.b, x);
      if (d == 0.0)
        throw PoleError("division by zero",
                        std::vector<double>(x.begin(), x.end()));
      return eval_tree(*n.a, x) / d;
    }
    case Node::Neg: return -eval_tree(*n.a, x);
    case Node::Pow: {
      double b = eval_tree(*n.a, x);
      if (b == 0.0 && n.exponent < 0)
        throw PoleError("zero raised to negative power",
                        std::vector<double>(x.begin(), x.end()));
      return std::pow(b, n.exponent);
    }
    case Node::Apply: {
      double a = eval_tree(*n.a, x);
      std::vector<double> pt(x.begin(), x.end());
      switch (n.fn) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Exp: return std::exp(a);
        case Func::Log:
          if (a <= 0.0) throw PoleError("log of non-positive value", pt);
          return std::log(a);
        case Func::Sqrt:
          if (a < 0.0) throw PoleError("sqrt of negative value", pt);
          return std::sqrt(a);
      }
      return 0.0;
    }
  }
  return 0.0;
}

// --------------------------- tree normalization ----------------------------

RatPoly normalize_tree(const Node& n) {
  switch (n.kind) {
    case Node::Const: return rp_constant(n.value);
    case Node::Coord: {
      Gen g;
      g.coord = n.coord;
      return rp_gen(g);
    }
    case Node::Add: return rp_add(normalize_tree(*n.a), normalize_tree(*n.b));
    case Node::Sub:
      return rp_add(normalize_tree(*n.a), rp_neg(normalize_tree(*n.b)));
    case Node::Mul: return rp_mul(normalize_tree(*n.a), normalize_tree(*n.b));
    case Node::Div: {
      RatPoly a = normalize_tree(*n.a);
      // Division by an explicit power keeps the base as a repeated
      // denominator factor, so x/(f)^2 and the quotient rule meet in the
      // same normal form.
      if (n.b->kind == Node::Pow && n.b->exponent > 0) {
        RatPoly base = normalize_tree(*n.b->a);
        for (int i = 0; i < n.b->exponent; ++i) a = rp_div(a, base);
        return a;
      }
      return rp_div(a, normalize_tree(*n.b));
    }
    case Node::Neg: return rp_neg(normalize_tree(*n.a));
    case Node::Pow: return rp_pow(normalize_tree(*n.a), n.exponent);
    case Node::Apply: return rp_apply(n.fn, normalize_tree(*n.a));
  }
  return RatPoly{};
}

// ------------------------------- derivative --------------------------------

RatPoly diff_ratpoly(const RatPoly& p, int k);

RatPoly diff_gen(const Gen& g, int k) {
  if (g.is_coord()) return rp_constant(Rational(g.coord == k ? 1 : 0));
  RatPoly du = diff_ratpoly(g.atom->arg, k);
  if (du.is_zero()) return RatPoly{};
  RatPoly u = g.atom->arg;
  switch (g.atom->fn) {
    case Func::Sin: return rp_mul(rp_apply(Func::Cos, u), du);
    case Func::Cos: return rp_neg(rp_mul(rp_apply(Func::Sin, u), du));
    case Func::Exp: return rp_mul(rp_apply(Func::Exp, u), du);
    case Func::Log: return rp_div(du, u);
    case Func::Sqrt:
      return rp_div(du, rp_mul(rp_constant(Rational(2)), rp_apply(Func::Sqrt, u)));
  }
  return RatPoly{};
}

RatPoly diff_poly(const Poly& p, int k) {
  RatPoly out;
  for (const auto& [m, c] : p.t) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      RatPoly dg = diff_gen(m[i].first, k);
      if (dg.is_zero()) continue;
      // c * e * g^(e-1) * dg * prod of the rest
      Poly rest = poly_constant(c * m[i].second);
      Monomial mm;
      for (std::size_t j = 0; j < m.size(); ++j) {
        int e = m[j].second - (j == i ? 1 : 0);
        if (e > 0) mm.emplace_back(m[j].first, e);
      }
      Poly restm;
      restm.t.emplace(std::move(mm), Rational(1));
      RatPoly term;
      term.num = sqrt_reduce(poly_mul(rest, restm));
      out = rp_add(out, rp_mul(term, dg));
    }
  }
  return out;
}

RatPoly diff_ratpoly(const RatPoly& p, int k) {
  // d(N / prod f_i^e_i) = dN/den - sum_i e_i N f_i' / (den * f_i)
  RatPoly dn = diff_poly(p.num, k);
  RatPoly result;
  if (!dn.is_zero()) {
    FactorVec den = p.den;
    result = rp_mul(dn, make_ratpoly(poly_constant(Rational(1)), std::move(den)));
  }
  for (std::size_t i = 0; i < p.den.size(); ++i) {
    RatPoly df = diff_poly(p.den[i].first, k);
    if (df.is_zero()) continue;
    FactorVec den = p.den;
    factor_insert(den, p.den[i].first, 1);
    RatPoly base = make_ratpoly(p.num, std::move(den));
    RatPoly term = rp_mul(rp_constant(Rational(-p.den[i].second)),
                          rp_mul(base, df));
    result = rp_add(result, term);
  }
  return result;
}

// -------------------------------- printing ---------------------------------

std::string rational_str(const Rational& q) {
  std::ostringstream os;
  os << numerator(q);
  if (denominator(q) != 1) os << "/" << denominator(q);
  return os.str();
}

std::string print_ratpoly(const RatPoly& p,
                          const std::vector<std::string>& names);

std::string coord_name(int i, const std::vector<std::string>& names) {
  if (i >= 0 && static_cast<std::size_t>(i) < names.size()) return names[i];
  return "x" + std::to_string(i + 1);
}

std::string print_gen(const Gen& g, const std::vector<std::string>& names) {
  if (g.is_coord()) return coord_name(g.coord, names);
  return std::string(func_name(g.atom->fn)) + "(" +
         print_ratpoly(g.atom->arg, names) + ")";
}

std::string print_term(const Rational& coeff_abs, const Monomial& m,
                       const std::vector<std::string>& names) {
  std::string s;
  if (m.empty() || coeff_abs != 1) s = rational_str(coeff_abs);
  for (const auto& [g, e] : m) {
    if (!s.empty()) s += "*";
    s += print_gen(g, names);
    if (e != 1) s += "^" + std::to_string(e);
  }
  return s;
}

std::string print_poly(const Poly& p, const std::vector<std::string>& names) {
  if (p.t.empty()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [m, c] : p.t) {
    bool neg = c < 0;
    Rational a = neg ? Rational(-c) : c;
    if (first) {
      if (neg) s += "-";
      first = false;
    } else {
      s += neg ? " - " : " + ";
    }
    s += print_term(a, m, names);
  }
  return s;
}

std::string print_ratpoly(const RatPoly& p,
                          const std::vector<std::string>& names) {
  std::string num = print_poly(p.num, names);
  if (p.den.empty()) return num;
  if (p.num.t.size() > 1) num = "(" + num + ")";
  std::string s = num;
  for (const auto& [f, e] : p.den) {
    s += "/(" + print_poly(f, names) + ")";
    if (e != 1) s += "^" + std::to_string(e);
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ScalarExpr
// ---------------------------------------------------------------------------

using detail::RatPoly;

ScalarExpr::ScalarExpr() : nf_(std::make_shared<RatPoly>()) {}

ScalarExpr::ScalarExpr(detail::NodePtr tree) : tree_(std::move(tree)) {}

ScalarExpr::ScalarExpr(std::shared_ptr<const RatPoly> nf) : nf_(std::move(nf)) {}

const RatPoly& ScalarExpr::normal_form() const {
  if (!nf_) nf_ = std::make_shared<RatPoly>(detail::normalize_tree(*tree_));
  return *nf_;
}

ScalarExpr ScalarExpr::constant(long n) { return constant(Rational(n)); }

ScalarExpr ScalarExpr::constant(const Rational& q) {
  return ScalarExpr(std::make_shared<RatPoly>(detail::rp_constant(q)));
}

ScalarExpr ScalarExpr::coordinate(int index) {
  if (index < 0) throw Error("negative coordinate index");
  detail::Gen g;
  g.coord = index;
  return ScalarExpr(std::make_shared<RatPoly>(detail::rp_gen(g)));
}

ScalarExpr ScalarExpr::apply(Func f, const ScalarExpr& arg) {
  return ScalarExpr(
      std::make_shared<RatPoly>(detail::rp_apply(f, arg.normal_form())));
}

ScalarExpr ScalarExpr::operator+(const ScalarExpr& o) const {
  return ScalarExpr(
      std::make_shared<RatPoly>(detail::rp_add(normal_form(), o.normal_form())));
}

ScalarExpr ScalarExpr::operator-(const ScalarExpr& o) const {
  return ScalarExpr(std::make_shared<RatPoly>(
      detail::rp_add(normal_form(), detail::rp_neg(o.normal_form()))));
}

ScalarExpr ScalarExpr::operator*(const ScalarExpr& o) const {
  return ScalarExpr(
      std::make_shared<RatPoly>(detail::rp_mul(normal_form(), o.normal_form())));
}

ScalarExpr ScalarExpr::operator/(const ScalarExpr& o) const {
  return ScalarExpr(
      std::make_shared<RatPoly>(detail::rp_div(normal_form(), o.normal_form())));
}

ScalarExpr ScalarExpr::operator-() const {
  return ScalarExpr(std::make_shared<RatPoly>(detail::rp_neg(normal_form())));
}

ScalarExpr ScalarExpr::pow(int e) const {
  return ScalarExpr(std::make_shared<RatPoly>(detail::rp_pow(normal_form(), e)));
}

ScalarExpr ScalarExpr::normalized() const {
  normal_form();
  return ScalarExpr(nf_);
}

bool ScalarExpr::is_normal() const { return nf_ != nullptr && tree_ == nullptr; }

bool ScalarExpr::is_zero() const { return normal_form().is_zero(); }

bool ScalarExpr::has_function_atoms() const {
  return detail::rp_has_atoms(normal_form());
}

std::optional<Rational> ScalarExpr::as_rational() const {
  const RatPoly& p = normal_form();
  if (!p.den_trivial() || !p.num.is_constant()) return std::nullopt;
  return p.num.constant_value();
}

namespace {

bool poly_involves(const detail::Poly& p, const std::vector<int>& coords);

bool ratpoly_involves(const RatPoly& p, const std::vector<int>& coords) {
  if (poly_involves(p.num, coords)) return true;
  for (const auto& [f, e] : p.den)
    if (poly_involves(f, coords)) return true;
  return false;
}

bool gen_involves(const detail::Gen& g, const std::vector<int>& coords) {
  if (g.is_coord())
    return std::find(coords.begin(), coords.end(), g.coord) != coords.end();
  return ratpoly_involves(g.atom->arg, coords);
}

bool poly_involves(const detail::Poly& p, const std::vector<int>& coords) {
  for (const auto& [m, c] : p.t)
    for (const auto& [g, e] : m)
      if (gen_involves(g, coords)) return true;
  return false;
}

}  // namespace

std::optional<int> ScalarExpr::polynomial_degree(
    const std::vector<int>& coords) const {
  const RatPoly& p = normal_form();
  for (const auto& [f, e] : p.den)
    if (poly_involves(f, coords)) return std::nullopt;
  int deg = 0;
  for (const auto& [m, c] : p.num.t) {
    int d = 0;
    for (const auto& [g, e] : m) {
      if (g.is_coord() &&
          std::find(coords.begin(), coords.end(), g.coord) != coords.end()) {
        d += e;
      } else if (gen_involves(g, coords)) {
        return std::nullopt;  // atom depending on the coordinates
      }
    }
    deg = std::max(deg, d);
  }
  return deg;
}

bool ScalarExpr::structurally_equal(const ScalarExpr& o) const {
  return detail::cmp_ratpoly(normal_form(), o.normal_form()) == 0;
}

double ScalarExpr::eval(std::span<const double> point) const {
  if (tree_) return detail::eval_tree(*tree_, point);
  return detail::eval_ratpoly(*nf_, point);
}

std::string ScalarExpr::str(const std::vector<std::string>& names) const {
  return detail::print_ratpoly(normal_form(), names);
}

std::string ScalarExpr::str() const { return str({}); }

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Parser {
  const std::string& s;
  const std::vector<std::string>& coords;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }

  detail::NodePtr parse_expr() {
    skip_ws();
    detail::NodePtr left;
    if (eat('-')) {
      left = detail::make_neg(parse_term());
    } else {
      eat('+');
      left = parse_term();
    }
    while (true) {
      skip_ws();
      if (eat('+')) {
        left = detail::make_binary(detail::Node::Add, left, parse_term());
      } else if (eat('-')) {
        left = detail::make_binary(detail::Node::Sub, left, parse_term());
      } else {
        return left;
      }
    }
  }

  detail::NodePtr parse_term() {
    detail::NodePtr left = parse_factor();
    while (true) {
      skip_ws();
      if (eat('*')) {
        left = detail::make_binary(detail::Node::Mul, left, parse_factor());
      } else if (eat('/')) {
        left = detail::make_binary(detail::Node::Div, left, parse_factor());
      } else {
        return left;
      }
    }
  }

  detail::NodePtr parse_factor() {
    detail::NodePtr base = parse_base();
    skip_ws();
    if (eat('^')) {
      skip_ws();
      bool neg = false;
      if (pos < s.size() && s[pos] == '-') {
        neg = true;
        ++pos;
      }
      std::size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
        ++pos;
      if (pos == start) throw ParseError("expected integer exponent", pos);
      int e = std::stoi(s.substr(start, pos - start));
      return detail::make_pow(base, neg ? -e : e);
    }
    return base;
  }

  detail::NodePtr parse_base() {
    skip_ws();
    if (pos >= s.size()) throw ParseError("unexpected end of input", pos);
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    if (c == '(') {
      ++pos;
      auto e = parse_expr();
      if (!eat(')')) throw ParseError("expected ')'", pos);
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_ident();
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos);
  }

  detail::NodePtr parse_number() {
    std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
      ++pos;
    Rational value(s.substr(start, pos - start));
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      std::size_t frac = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
        ++pos;
      if (pos == frac) throw ParseError("expected digits after '.'", pos);
      std::string digits = s.substr(frac, pos - frac);
      Rational num(digits);
      Rational den(1);
      for (std::size_t i = 0; i < digits.size(); ++i) den *= 10;
      value += num / den;
    }
    return detail::make_const(value);
  }

  detail::NodePtr parse_ident() {
    std::size_t start = pos;
    while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                              s[pos] == '_'))
      ++pos;
    std::string name = s.substr(start, pos - start);
    for (std::size_t i = 0; i < coords.size(); ++i)
      if (coords[i] == name) return detail::make_coord(static_cast<int>(i));
    static const std::pair<const char*, Func> funcs[] = {
        {"sin", Func::Sin}, {"cos", Func::Cos}, {"exp", Func::Exp},
        {"log", Func::Log}, {"sqrt", Func::Sqrt}};
    for (const auto& [fname, fn] : funcs) {
      if (name == fname) {
        if (!eat('(')) throw ParseError("expected '(' after function", pos);
        auto arg = parse_expr();
        if (!eat(')')) throw ParseError("expected ')'", pos);
        return detail::make_apply(fn, arg);
      }
    }
    throw ParseError("unknown identifier '" + name + "'", start);
  }
};

}  // namespace

ScalarExpr parse(const std::string& text, const std::vector<std::string>& coords) {
  Parser p{text, coords};
  auto tree = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size())
    throw ParseError("unexpected trailing input", p.pos);
  return ScalarExpr(std::move(tree));
}

ScalarExpr differentiate(const ScalarExpr& e, int index) {
  return ScalarExpr(
      std::make_shared<RatPoly>(detail::diff_ratpoly(e.normal_form(), index)));
}

// ---------------------------------------------------------------------------
// Zero test with sampling fallback
// ---------------------------------------------------------------------------

ZeroTest equals_zero(const ScalarExpr& e, double tol, const Box& box,
                     std::uint64_t seed) {
  if (tol <= 0) throw PreconditionError("equals_zero requires tol > 0");
  ZeroTest r;
  if (e.is_zero()) {
    r.is_zero = true;
    return r;
  }
  if (!e.has_function_atoms()) {
    r.is_zero = false;  // nonzero polynomial / rational function
    return r;
  }
  // Sampling path.
  r.sampled = true;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int wanted = 64;
  int got = 0, attempts = 0;
  const int max_attempts = 2 * wanted;
  std::vector<double> p(box.axes.size());
  double max_abs = 0.0;
  while (got < wanted && attempts < max_attempts) {
    ++attempts;
    for (std::size_t i = 0; i < box.axes.size(); ++i) {
      auto [lo, hi] = box.axes[i];
      p[i] = lo + (hi - lo) * uni(rng);
    }
    try {
      double v = e.eval(p);
      if (!std::isfinite(v)) continue;
      max_abs = std::max(max_abs, std::abs(v));
      ++got;
    } catch (const PoleError&) {
      continue;  // resample
    }
  }
  if (got < wanted && got * 2 < attempts)
    throw DomainError("domain too singular for sampled zero test");
  r.samples = got;
  r.max_abs = max_abs;
  r.is_zero = got > 0 && max_abs < tol;
  return r;
}

}  // namespace metacurv
