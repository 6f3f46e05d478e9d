#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "metacurv/errors.hpp"

namespace metacurv {

using Rational = boost::multiprecision::cpp_rational;

// Elementary functions kept as opaque atoms by the normal form.
enum class Func { Sin, Cos, Exp, Log, Sqrt };

const char* func_name(Func f);

namespace detail {
struct Node;
struct RatPoly;
using NodePtr = std::shared_ptr<const Node>;
}  // namespace detail

struct Box {
  // Per-axis [lo, hi]. Default chart box is [-1,1]^d recentered on the base
  // point.
  std::vector<std::pair<double, double>> axes;
};

struct ZeroTest {
  bool is_zero = false;
  bool sampled = false;  // true when decided by point sampling, not algebra
  int samples = 0;
  double max_abs = 0.0;
};

// Exact symbolic scalar function of chart coordinates. Coordinates are
// referred to by index; names live in the chart. Values are immutable and
// cheap to copy (shared internals).
//
// Arithmetic is eager: the result of any operator is already in normal form
// (expanded multivariate polynomial over a rational-coefficient field, with
// elementary-function applications as opaque generators, divided by a product
// of monic polynomial factors). Only parse() yields a raw tree, which keeps
// the distinction between an expression and its normal form observable.
class ScalarExpr {
 public:
  ScalarExpr();  // zero
  static ScalarExpr constant(long n);
  static ScalarExpr constant(const Rational& q);
  static ScalarExpr coordinate(int index);
  static ScalarExpr apply(Func f, const ScalarExpr& arg);

  ScalarExpr operator+(const ScalarExpr&) const;
  ScalarExpr operator-(const ScalarExpr&) const;
  ScalarExpr operator*(const ScalarExpr&) const;
  ScalarExpr operator/(const ScalarExpr&) const;
  ScalarExpr operator-() const;
  ScalarExpr pow(int exponent) const;

  ScalarExpr& operator+=(const ScalarExpr& o) { return *this = *this + o; }
  ScalarExpr& operator-=(const ScalarExpr& o) { return *this = *this - o; }
  ScalarExpr& operator*=(const ScalarExpr& o) { return *this = *this * o; }

  // Normal form (idempotent).
  ScalarExpr normalized() const;
  bool is_normal() const;

  // Exact zero test on the normal form's numerator. For atom-free
  // expressions this decides semantic zero; with atoms it is sufficient but
  // not necessary (see equals_zero for the sampling fallback).
  bool is_zero() const;
  bool has_function_atoms() const;

  // Value if the normal form is a rational constant.
  std::optional<Rational> as_rational() const;

  // Total degree as a polynomial in the listed coordinates, treating all
  // other generators as constants; nullopt if not polynomial in them
  // (denominator or atom depends on one of the coordinates).
  std::optional<int> polynomial_degree(const std::vector<int>& coords) const;

  // Structural equality of normal forms.
  bool structurally_equal(const ScalarExpr&) const;

  double eval(std::span<const double> point) const;
  double eval(const std::vector<double>& point) const {
    return eval(std::span<const double>(point));
  }

  // Renders the normal form; re-parsing the output reproduces the same
  // normal form.
  std::string str(const std::vector<std::string>& coord_names) const;
  std::string str() const;  // coordinates rendered as x1, x2, ...

  // Internal handles (used by differentiate and the tests of the engine).
  const detail::RatPoly& normal_form() const;
  explicit ScalarExpr(detail::NodePtr tree);
  explicit ScalarExpr(std::shared_ptr<const detail::RatPoly> nf);

 private:
  detail::NodePtr tree_;                            // raw tree, may be null
  mutable std::shared_ptr<const detail::RatPoly> nf_;  // cached normal form
};

inline ScalarExpr operator*(long n, const ScalarExpr& e) {
  return ScalarExpr::constant(n) * e;
}

// Recursive-descent parser for the expression grammar:
//   expr   := ['-'] term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' integer)?
//   base   := number | identifier | '(' expr ')' | func '(' expr ')'
//   func   in {sin, cos, exp, log, sqrt}
//   number := decimal literal (rationals arise from '/')
// Throws ParseError (with position) on syntax errors and unknown
// identifiers.
ScalarExpr parse(const std::string& text, const std::vector<std::string>& coords);

// Exact partial derivative with respect to coordinate `index`.
ScalarExpr differentiate(const ScalarExpr& e, int index);

inline constexpr std::uint64_t kDefaultSeed = 0x5eed0001u;

// Zero test. Exact for atom-free normal forms; expressions containing
// elementary-function atoms whose numerator is not identically zero fall
// back to evaluation at 64 pseudo-random points of `box` and require
// |value| < tol at all of them (the result is flagged `sampled`). Points at
// poles are resampled; if more than half of the attempts fail the domain is
// reported as too singular.
ZeroTest equals_zero(const ScalarExpr& e, double tol, const Box& box,
                     std::uint64_t seed = kDefaultSeed);

double to_double(const Rational& q);

}  // namespace metacurv
