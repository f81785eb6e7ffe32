#include "core/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace lcsg {

const char* err_name(Err k) {
  switch (k) {
    case Err::Syntax: return "SyntaxError";
    case Err::UnknownVariable: return "UnknownVariable";
    case Err::Domain: return "DomainError";
    case Err::SamplingExhausted: return "SamplingExhausted";
    case Err::KindMismatch: return "KindMismatch";
    case Err::ChartMismatch: return "ChartMismatch";
    case Err::DegreeOverflow: return "DegreeOverflow";
    case Err::DegreeUnderflow: return "DegreeUnderflow";
    case Err::SingularForm: return "SingularForm";
    case Err::NotContact: return "NotContact";
    case Err::NotComposable: return "NotComposable";
    case Err::RankDeficiency: return "RankDeficiency";
    case Err::NotInFiber: return "NotInFiber";
    case Err::NotProjectable: return "NotProjectable";
    case Err::BasicnessViolation: return "BasicnessViolation";
    case Err::NotLcs: return "NotLcs";
    case Err::Definition: return "DefinitionError";
    case Err::UnknownSuite: return "UnknownSuite";
  }
  return "Error";
}

namespace {

NodePtr make_node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

const NodePtr& const_node(double v) {
  static const NodePtr zero = make_node({ExprOp::Const, 0.0});
  static const NodePtr one = make_node({ExprOp::Const, 1.0});
  if (v == 0.0) return zero;
  if (v == 1.0) return one;
  thread_local NodePtr scratch;
  scratch = make_node({ExprOp::Const, v});
  return scratch;
}

}  // namespace

ScalarExpr::ScalarExpr() : n_(const_node(0.0)) {}

ScalarExpr ScalarExpr::constant(double v) { return ScalarExpr(const_node(v)); }

ScalarExpr ScalarExpr::variable(std::string name) {
  ExprNode n;
  n.op = ExprOp::Var;
  n.var = std::move(name);
  return ScalarExpr(make_node(std::move(n)));
}

namespace {

ScalarExpr binary(ExprOp op, const ScalarExpr& a, const ScalarExpr& b) {
  ExprNode n;
  n.op = op;
  n.a = a.ptr();
  n.b = b.ptr();
  return ScalarExpr(make_node(std::move(n)));
}

ScalarExpr unary(ExprOp op, const ScalarExpr& a) {
  ExprNode n;
  n.op = op;
  n.a = a.ptr();
  return ScalarExpr(make_node(std::move(n)));
}

}  // namespace

ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (a.is_const() && b.is_const()) return ScalarExpr::constant(a.node().value + b.node().value);
  return binary(ExprOp::Add, a, b);
}

ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b) {
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (a.is_const() && b.is_const()) return ScalarExpr::constant(a.node().value - b.node().value);
  return binary(ExprOp::Sub, a, b);
}

ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) {
  if (a.is_zero() || b.is_zero()) return ScalarExpr();
  if (a.is_const(1.0)) return b;
  if (b.is_const(1.0)) return a;
  if (a.is_const(-1.0)) return -b;
  if (b.is_const(-1.0)) return -a;
  if (a.is_const() && b.is_const()) return ScalarExpr::constant(a.node().value * b.node().value);
  return binary(ExprOp::Mul, a, b);
}

ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b) {
  if (a.is_zero()) return a;
  if (b.is_const(1.0)) return a;
  if (a.is_const() && b.is_const() && b.node().value != 0.0)
    return ScalarExpr::constant(a.node().value / b.node().value);
  return binary(ExprOp::Div, a, b);
}

ScalarExpr operator-(const ScalarExpr& a) {
  if (a.is_const()) return ScalarExpr::constant(-a.node().value);
  if (a.node().op == ExprOp::Neg) return ScalarExpr(a.node().a);
  return unary(ExprOp::Neg, a);
}

ScalarExpr pow_i(const ScalarExpr& a, int n) {
  if (n < 0) fail(Err::Syntax, "negative exponent");
  if (n == 0) return ScalarExpr::constant(1.0);
  if (n == 1) return a;
  if (a.is_const()) return ScalarExpr::constant(std::pow(a.node().value, n));
  ExprNode node;
  node.op = ExprOp::Pow;
  node.exponent = n;
  node.a = a.ptr();
  return ScalarExpr(make_node(std::move(node)));
}

namespace {

ScalarExpr fold_unary(ExprOp op, const ScalarExpr& a, double (*f)(double)) {
  if (a.is_const()) {
    double v = f(a.node().value);
    if (std::isfinite(v)) return ScalarExpr::constant(v);
  }
  return unary(op, a);
}

}  // namespace

ScalarExpr exp(const ScalarExpr& a) { return fold_unary(ExprOp::Exp, a, std::exp); }
ScalarExpr log(const ScalarExpr& a) { return fold_unary(ExprOp::Log, a, std::log); }
ScalarExpr sin(const ScalarExpr& a) { return fold_unary(ExprOp::Sin, a, std::sin); }
ScalarExpr cos(const ScalarExpr& a) { return fold_unary(ExprOp::Cos, a, std::cos); }
ScalarExpr sqrt(const ScalarExpr& a) { return fold_unary(ExprOp::Sqrt, a, std::sqrt); }

Chart::Chart(std::string name, std::vector<std::string> vars, std::vector<Interval> box)
    : name_(std::move(name)), vars_(std::move(vars)), box_(std::move(box)) {
  if (box_.empty()) box_.assign(vars_.size(), Interval{});
  if (box_.size() != vars_.size()) fail(Err::Definition, "chart '" + name_ + "': box size mismatch");
  for (const auto& iv : box_) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi))
      fail(Err::Definition, "chart '" + name_ + "': invalid box interval");
  }
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (!index_.emplace(vars_[i], i).second)
      fail(Err::Definition, "chart '" + name_ + "': duplicate variable '" + vars_[i] + "'");
  }
}

std::optional<std::size_t> Chart::index_of(std::string_view v) const {
  auto it = index_.find(std::string(v));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ChartPtr Chart::with_guard(ScalarExpr g) const {
  auto c = std::make_shared<Chart>(*this);
  c->guards_.push_back(std::move(g));
  return c;
}

ChartPtr make_chart(std::string name, std::vector<std::string> vars, std::vector<Interval> box) {
  return std::make_shared<const Chart>(std::move(name), std::move(vars), std::move(box));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
  enum Kind { Num, Ident, Op, End } kind = End;
  std::string text;
  double num = 0.0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r' || s_[pos_] == '\n')) {
      if (s_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= s_.size()) {
      tok_.kind = Token::End;
      return;
    }
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) bump();
      if (pos_ < s_.size() && s_[pos_] == '.') {
        bump();
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) bump();
      }
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        std::size_t mark = pos_;
        bump();
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) bump();
        if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
          while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) bump();
        } else {
          pos_ = mark;  // bare 'e' is not an exponent
        }
      }
      tok_.kind = Token::Num;
      tok_.text = std::string(s_.substr(start, pos_ - start));
      tok_.num = std::strtod(tok_.text.c_str(), nullptr);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        bump();
      tok_.kind = Token::Ident;
      tok_.text = std::string(s_.substr(start, pos_ - start));
      return;
    }
    tok_.kind = Token::Op;
    tok_.text = std::string(1, c);
    bump();
  }

  void bump() {
    ++pos_;
    ++col_;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

[[noreturn]] void syntax_error(const Token& t, const std::string& what) {
  std::ostringstream os;
  os << what << " at line " << t.line << ", column " << t.col;
  if (t.kind != Token::End) os << " (near '" << t.text << "')";
  fail(Err::Syntax, os.str());
}

class Parser {
 public:
  Parser(std::string_view text, const Chart& chart, const ScalarDefs* named)
      : lex_(text), chart_(chart), named_(named) {}

  ScalarExpr parse() {
    ScalarExpr e = expr();
    if (lex_.peek().kind != Token::End) syntax_error(lex_.peek(), "unexpected trailing input");
    return e;
  }

 private:
  bool is_op(const char* s) const {
    return lex_.peek().kind == Token::Op && lex_.peek().text == s;
  }

  ScalarExpr expr() {
    ScalarExpr e = term();
    while (is_op("+") || is_op("-")) {
      bool plus = is_op("+");
      lex_.take();
      ScalarExpr rhs = term();
      e = plus ? e + rhs : e - rhs;
    }
    return e;
  }

  ScalarExpr term() {
    ScalarExpr e = factor();
    while (is_op("*") || is_op("/")) {
      bool mul = is_op("*");
      lex_.take();
      ScalarExpr rhs = factor();
      e = mul ? e * rhs : e / rhs;
    }
    return e;
  }

  ScalarExpr factor() {
    bool negate = false;
    if (is_op("-")) {
      lex_.take();
      negate = true;
    }
    ScalarExpr e = atom();
    if (is_op("^")) {
      Token caret = lex_.take();
      Token t = lex_.peek();
      if (t.kind != Token::Num || t.text.find_first_of(".eE") != std::string::npos)
        syntax_error(caret, "exponent must be an unsigned integer");
      lex_.take();
      e = pow_i(e, static_cast<int>(t.num));
    }
    return negate ? -e : e;
  }

  ScalarExpr atom() {
    Token t = lex_.peek();
    if (t.kind == Token::Num) {
      lex_.take();
      return ScalarExpr::constant(t.num);
    }
    if (t.kind == Token::Ident) {
      lex_.take();
      if (is_op("(")) {
        ScalarExpr (*fn)(const ScalarExpr&) = nullptr;
        if (t.text == "exp") fn = exp;
        else if (t.text == "log") fn = log;
        else if (t.text == "sin") fn = sin;
        else if (t.text == "cos") fn = cos;
        else if (t.text == "sqrt") fn = sqrt;
        if (!fn) syntax_error(t, "unknown function '" + t.text + "'");
        lex_.take();
        ScalarExpr inner = expr();
        if (!is_op(")")) syntax_error(lex_.peek(), "expected ')'");
        lex_.take();
        return fn(inner);
      }
      if (chart_.index_of(t.text)) return ScalarExpr::variable(t.text);
      if (named_) {
        auto it = named_->find(t.text);
        if (it != named_->end()) return it->second;
      }
      fail(Err::UnknownVariable,
           "'" + t.text + "' is not a variable of chart '" + chart_.name() + "'");
    }
    if (is_op("(")) {
      lex_.take();
      ScalarExpr e = expr();
      if (!is_op(")")) syntax_error(lex_.peek(), "expected ')'");
      lex_.take();
      return e;
    }
    syntax_error(t, "expected a number, variable, function call or '('");
  }

  Lexer lex_;
  const Chart& chart_;
  const ScalarDefs* named_;
};

}  // namespace

ScalarExpr parse_expr(std::string_view text, const Chart& chart, const ScalarDefs* named) {
  return Parser(text, chart, named).parse();
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_double(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// precedence: 1 add/sub, 2 mul/div, 3 unary minus, 4 pow, 5 atom
int precedence(const ExprNode& n) {
  switch (n.op) {
    case ExprOp::Add:
    case ExprOp::Sub: return 1;
    case ExprOp::Mul:
    case ExprOp::Div: return 2;
    case ExprOp::Neg: return 3;
    case ExprOp::Pow: return 4;
    default: return 5;
  }
}

void print_node(const ExprNode& n, std::string& out, int parent_prec) {
  int prec = precedence(n);
  bool paren = prec < parent_prec;
  // negative literals need the same guard as unary minus
  if (n.op == ExprOp::Const && n.value < 0) paren = 3 < parent_prec;
  if (paren) out += '(';
  switch (n.op) {
    case ExprOp::Const: out += format_double(n.value); break;
    case ExprOp::Var: out += n.var; break;
    case ExprOp::Add:
      print_node(*n.a, out, 1);
      out += " + ";
      print_node(*n.b, out, 2);
      break;
    case ExprOp::Sub:
      print_node(*n.a, out, 1);
      out += " - ";
      print_node(*n.b, out, 2);
      break;
    case ExprOp::Mul:
      print_node(*n.a, out, 2);
      out += "*";
      print_node(*n.b, out, 3);
      break;
    case ExprOp::Div:
      print_node(*n.a, out, 2);
      out += "/";
      print_node(*n.b, out, 3);
      break;
    case ExprOp::Neg:
      out += '-';
      print_node(*n.a, out, 3);
      break;
    case ExprOp::Pow:
      print_node(*n.a, out, 5);
      out += '^';
      out += std::to_string(n.exponent);
      break;
    case ExprOp::Exp:
    case ExprOp::Log:
    case ExprOp::Sin:
    case ExprOp::Cos:
    case ExprOp::Sqrt: {
      const char* name = n.op == ExprOp::Exp   ? "exp"
                         : n.op == ExprOp::Log ? "log"
                         : n.op == ExprOp::Sin ? "sin"
                         : n.op == ExprOp::Cos ? "cos"
                                               : "sqrt";
      out += name;
      out += '(';
      print_node(*n.a, out, 0);
      out += ')';
      break;
    }
  }
  if (paren) out += ')';
}

}  // namespace

std::string to_string(const ScalarExpr& e) {
  std::string out;
  print_node(e.node(), out, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_node(const ExprNode& n, const Chart& chart, const std::vector<double>& x,
                 const Point& p) {
  switch (n.op) {
    case ExprOp::Const: return n.value;
    case ExprOp::Var: {
      auto idx = chart.index_of(n.var);
      if (!idx) fail(Err::UnknownVariable, "'" + n.var + "' not in chart '" + chart.name() + "'");
      return x[*idx];
    }
    case ExprOp::Add: return eval_node(*n.a, chart, x, p) + eval_node(*n.b, chart, x, p);
    case ExprOp::Sub: return eval_node(*n.a, chart, x, p) - eval_node(*n.b, chart, x, p);
    case ExprOp::Mul: return eval_node(*n.a, chart, x, p) * eval_node(*n.b, chart, x, p);
    case ExprOp::Div: {
      double num = eval_node(*n.a, chart, x, p);
      double den = eval_node(*n.b, chart, x, p);
      if (den == 0.0) fail(Err::Domain, "division by zero at a sample point");
      return num / den;
    }
    case ExprOp::Neg: return -eval_node(*n.a, chart, x, p);
    case ExprOp::Pow: {
      double base = eval_node(*n.a, chart, x, p);
      double r = 1.0;
      for (int i = 0; i < n.exponent; ++i) r *= base;
      return r;
    }
    case ExprOp::Exp: return std::exp(eval_node(*n.a, chart, x, p));
    case ExprOp::Log: {
      double v = eval_node(*n.a, chart, x, p);
      if (v <= 0.0) fail(Err::Domain, "log of non-positive value");
      return std::log(v);
    }
    case ExprOp::Sin: return std::sin(eval_node(*n.a, chart, x, p));
    case ExprOp::Cos: return std::cos(eval_node(*n.a, chart, x, p));
    case ExprOp::Sqrt: {
      double v = eval_node(*n.a, chart, x, p);
      if (v < 0.0) fail(Err::Domain, "sqrt of negative value");
      return std::sqrt(v);
    }
  }
  fail(Err::Domain, "corrupt expression node");
}

}  // namespace

double eval(const ScalarExpr& e, const Point& p) {
  if (!p.chart) fail(Err::ChartMismatch, "point has no chart");
  if (p.x.size() != p.chart->dim()) fail(Err::ChartMismatch, "point/chart dimension mismatch");
  double v = eval_node(e.node(), *p.chart, p.x, p);
  if (!std::isfinite(v)) fail(Err::Domain, "non-finite evaluation result");
  return v;
}

// ---------------------------------------------------------------------------
// Differentiation

ScalarExpr partial(const ScalarExpr& e, std::string_view var) {
  const ExprNode& n = e.node();
  auto wrap = [](const NodePtr& p) { return ScalarExpr(p); };
  switch (n.op) {
    case ExprOp::Const: return ScalarExpr();
    case ExprOp::Var: return n.var == var ? ScalarExpr::constant(1.0) : ScalarExpr();
    case ExprOp::Add: return partial(wrap(n.a), var) + partial(wrap(n.b), var);
    case ExprOp::Sub: return partial(wrap(n.a), var) - partial(wrap(n.b), var);
    case ExprOp::Mul:
      return partial(wrap(n.a), var) * wrap(n.b) + wrap(n.a) * partial(wrap(n.b), var);
    case ExprOp::Div: {
      ScalarExpr u = wrap(n.a), v = wrap(n.b);
      ScalarExpr du = partial(u, var), dv = partial(v, var);
      return (du * v - u * dv) / (v * v);
    }
    case ExprOp::Neg: return -partial(wrap(n.a), var);
    case ExprOp::Pow: {
      ScalarExpr u = wrap(n.a);
      return ScalarExpr::constant(n.exponent) * pow_i(u, n.exponent - 1) * partial(u, var);
    }
    case ExprOp::Exp: return exp(wrap(n.a)) * partial(wrap(n.a), var);
    case ExprOp::Log: return partial(wrap(n.a), var) / wrap(n.a);
    case ExprOp::Sin: return cos(wrap(n.a)) * partial(wrap(n.a), var);
    case ExprOp::Cos: return -sin(wrap(n.a)) * partial(wrap(n.a), var);
    case ExprOp::Sqrt:
      return partial(wrap(n.a), var) / (ScalarExpr::constant(2.0) * sqrt(wrap(n.a)));
  }
  fail(Err::Domain, "corrupt expression node");
}

ScalarExpr subst(const ScalarExpr& e, const std::map<std::string, ScalarExpr>& repl) {
  const ExprNode& n = e.node();
  auto wrap = [](const NodePtr& p) { return ScalarExpr(p); };
  switch (n.op) {
    case ExprOp::Const: return e;
    case ExprOp::Var: {
      auto it = repl.find(n.var);
      return it == repl.end() ? e : it->second;
    }
    case ExprOp::Add: return subst(wrap(n.a), repl) + subst(wrap(n.b), repl);
    case ExprOp::Sub: return subst(wrap(n.a), repl) - subst(wrap(n.b), repl);
    case ExprOp::Mul: return subst(wrap(n.a), repl) * subst(wrap(n.b), repl);
    case ExprOp::Div: return subst(wrap(n.a), repl) / subst(wrap(n.b), repl);
    case ExprOp::Neg: return -subst(wrap(n.a), repl);
    case ExprOp::Pow: return pow_i(subst(wrap(n.a), repl), n.exponent);
    case ExprOp::Exp: return exp(subst(wrap(n.a), repl));
    case ExprOp::Log: return log(subst(wrap(n.a), repl));
    case ExprOp::Sin: return sin(subst(wrap(n.a), repl));
    case ExprOp::Cos: return cos(subst(wrap(n.a), repl));
    case ExprOp::Sqrt: return sqrt(subst(wrap(n.a), repl));
  }
  fail(Err::Domain, "corrupt expression node");
}

void collect_variables(const ScalarExpr& e, std::set<std::string>& out) {
  const ExprNode& n = e.node();
  if (n.op == ExprOp::Var) out.insert(n.var);
  if (n.a) collect_variables(ScalarExpr(n.a), out);
  if (n.b) collect_variables(ScalarExpr(n.b), out);
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

double unit_double(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<Point> sample_points(const ChartPtr& chart, int n, uint64_t seed) {
  if (n < 1) fail(Err::Definition, "sample_points: n must be >= 1");
  const uint64_t stream = splitmix64(seed ^ fnv1a(chart->name()));
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt <= 100; ++attempt) {
      Point p{chart, std::vector<double>(chart->dim())};
      for (std::size_t c = 0; c < chart->dim(); ++c) {
        uint64_t key = splitmix64(stream ^ splitmix64((static_cast<uint64_t>(i) << 32) ^
                                                      (static_cast<uint64_t>(attempt) << 8) ^ c));
        const Interval& iv = chart->box(c);
        p.x[c] = iv.lo + unit_double(key) * (iv.hi - iv.lo);
      }
      bool ok = true;
      for (const auto& g : chart->guards()) {
        double v;
        try {
          v = eval(g, p);
        } catch (const GeoError&) {
          ok = false;  // guard undefined here: treat as excluded
          break;
        }
        if (std::abs(v) < 1e-6) {
          ok = false;
          break;
        }
      }
      if (ok) {
        pts.push_back(std::move(p));
        accepted = true;
        break;
      }
    }
    if (!accepted)
      fail(Err::SamplingExhausted,
           "chart '" + chart->name() + "': guard rejected 100 redraws for point " + std::to_string(i));
  }
  return pts;
}

}  // namespace lcsg
