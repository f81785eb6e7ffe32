#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/errors.hpp"

namespace lcsg {

// Closed-form scalar fields on coordinate charts. Expression trees are
// immutable and shared; all operations below are pure.

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

enum class ExprOp : uint8_t {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Pow,  // integer exponent >= 0
  Exp,
  Log,
  Sin,
  Cos,
  Sqrt,
};

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprOp op = ExprOp::Const;
  double value = 0.0;   // Const
  std::string var;      // Var
  int exponent = 0;     // Pow
  NodePtr a, b;
};

class ScalarExpr {
 public:
  ScalarExpr();  // the zero expression
  explicit ScalarExpr(NodePtr n) : n_(std::move(n)) {}

  static ScalarExpr constant(double v);
  static ScalarExpr variable(std::string name);

  const ExprNode& node() const { return *n_; }
  const NodePtr& ptr() const { return n_; }

  bool is_const() const { return n_->op == ExprOp::Const; }
  bool is_const(double v) const { return is_const() && n_->value == v; }
  bool is_zero() const { return is_const(0.0); }

 private:
  NodePtr n_;
};

// Folding constructors: constant subtrees collapse, additive/multiplicative
// identities drop out. No algebraic simplification beyond that.
ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator-(const ScalarExpr& a);
ScalarExpr pow_i(const ScalarExpr& a, int n);
ScalarExpr exp(const ScalarExpr& a);
ScalarExpr log(const ScalarExpr& a);
ScalarExpr sin(const ScalarExpr& a);
ScalarExpr cos(const ScalarExpr& a);
ScalarExpr sqrt(const ScalarExpr& a);

class Chart;
using ChartPtr = std::shared_ptr<const Chart>;

class Chart {
 public:
  Chart(std::string name, std::vector<std::string> vars, std::vector<Interval> box = {});

  const std::string& name() const { return name_; }
  const std::vector<std::string>& vars() const { return vars_; }
  std::size_t dim() const { return vars_.size(); }
  const Interval& box(std::size_t i) const { return box_[i]; }
  std::optional<std::size_t> index_of(std::string_view v) const;

  const std::vector<ScalarExpr>& guards() const { return guards_; }
  // Guards restrict sampling: points where any guard is within 1e-6 of zero
  // are redrawn.
  ChartPtr with_guard(ScalarExpr g) const;

  bool same_vars(const Chart& other) const { return vars_ == other.vars_; }

 private:
  std::string name_;
  std::vector<std::string> vars_;
  std::vector<Interval> box_;
  std::vector<ScalarExpr> guards_;
  std::unordered_map<std::string, std::size_t> index_;
};

ChartPtr make_chart(std::string name, std::vector<std::string> vars,
                    std::vector<Interval> box = {});

struct Point {
  ChartPtr chart;
  std::vector<double> x;
};

using ScalarDefs = std::map<std::string, ScalarExpr, std::less<>>;

// Recursive-descent parser for the expression grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := "-"? atom ("^" unsigned-int)?
//   atom   := number | ident | func "(" expr ")" | "(" expr ")"
//   func   in {exp, log, sin, cos, sqrt}
// Identifiers resolve to chart variables or entries of `named` (inlined).
ScalarExpr parse_expr(std::string_view text, const Chart& chart,
                      const ScalarDefs* named = nullptr);

std::string to_string(const ScalarExpr& e);

double eval(const ScalarExpr& e, const Point& p);
ScalarExpr partial(const ScalarExpr& e, std::string_view var);
ScalarExpr subst(const ScalarExpr& e, const std::map<std::string, ScalarExpr>& repl);
void collect_variables(const ScalarExpr& e, std::set<std::string>& out);

// Deterministic counter-based sampling, uniform in the chart box. Identical
// output for identical (chart, n, seed) regardless of call interleaving.
std::vector<Point> sample_points(const ChartPtr& chart, int n, uint64_t seed);

// Relative residual used by every checker in the project.
inline double residual(double lhs, double rhs) {
  double d = lhs - rhs;
  if (d < 0) d = -d;
  double m = std::max(lhs < 0 ? -lhs : lhs, rhs < 0 ? -rhs : rhs);
  return d / (1.0 + m);
}

constexpr double kDefaultTol = 1e-8;

}  // namespace lcsg
