#include "openstab/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace openstab::expr {

namespace {

struct FuncInfo {
  Func func;
  std::string_view name;
  std::size_t arity;
};

constexpr std::array<FuncInfo, 12> kFunctions{{
    {Func::sin, "sin", 1},
    {Func::cos, "cos", 1},
    {Func::tan, "tan", 1},
    {Func::atan, "atan", 1},
    {Func::exp, "exp", 1},
    {Func::log, "log", 1},
    {Func::sqrt, "sqrt", 1},
    {Func::abs, "abs", 1},
    {Func::pow, "pow", 2},
    {Func::min, "min", 2},
    {Func::max, "max", 2},
    {Func::step, "step", 1},
}};

// ---------------------------------------------------------------------------
// Scalar kernels shared by the tree walker and the compiled program.

bool finish(double v, double& out, const char*& why) {
  if (!std::isfinite(v)) {
    why = "non-finite result";
    return false;
  }
  out = v;
  return true;
}

bool apply_binary(BinaryOp op, double a, double b, double& out, const char*& why) {
  switch (op) {
    case BinaryOp::add: return finish(a + b, out, why);
    case BinaryOp::sub: return finish(a - b, out, why);
    case BinaryOp::mul: return finish(a * b, out, why);
    case BinaryOp::div:
      if (b == 0.0) {
        why = "division by zero";
        return false;
      }
      return finish(a / b, out, why);
    case BinaryOp::pow:
      if (a < 0.0 && b != std::trunc(b)) {
        why = "negative base with non-integer exponent";
        return false;
      }
      if (a == 0.0 && b < 0.0) {
        why = "zero raised to a negative power";
        return false;
      }
      return finish(std::pow(a, b), out, why);
  }
  why = "bad operator";
  return false;
}

bool apply_func(Func f, double a, double b, double& out, const char*& why) {
  switch (f) {
    case Func::sin: return finish(std::sin(a), out, why);
    case Func::cos: return finish(std::cos(a), out, why);
    case Func::tan: return finish(std::tan(a), out, why);
    case Func::atan: return finish(std::atan(a), out, why);
    case Func::exp: return finish(std::exp(a), out, why);
    case Func::log:
      if (!(a > 0.0)) {
        why = "log of non-positive value";
        return false;
      }
      return finish(std::log(a), out, why);
    case Func::sqrt:
      if (a < 0.0) {
        why = "sqrt of negative value";
        return false;
      }
      return finish(std::sqrt(a), out, why);
    case Func::abs: return finish(std::abs(a), out, why);
    case Func::pow: return apply_binary(BinaryOp::pow, a, b, out, why);
    case Func::min: return finish(std::min(a, b), out, why);
    case Func::max: return finish(std::max(a, b), out, why);
    case Func::step: return finish(a > 0.0 ? 1.0 : 0.0, out, why);
  }
  why = "bad function";
  return false;
}

// ---------------------------------------------------------------------------
// Node construction.

NodePtr make_constant(double v, SourceSpan span = {}) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::constant;
  n->value = v;
  n->span = span;
  return n;
}

NodePtr make_variable(std::size_t i, SourceSpan span = {}) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::variable;
  n->variable = i;
  n->span = span;
  return n;
}

NodePtr make_negate(NodePtr a, SourceSpan span = {}) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::negate;
  n->children = {std::move(a)};
  n->span = span;
  return n;
}

NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b, SourceSpan span = {}) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::binary;
  n->op = op;
  n->children = {std::move(a), std::move(b)};
  n->span = span;
  return n;
}

NodePtr make_call(Func f, std::vector<NodePtr> args, SourceSpan span = {}) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::call;
  n->func = f;
  n->children = std::move(args);
  n->span = span;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->kind == NodeKind::constant && n->value == v; }
bool is_const(const NodePtr& n) { return n->kind == NodeKind::constant; }

// Folding builders.

NodePtr fold_binary(BinaryOp op, NodePtr a, NodePtr b) {
  if (is_const(a) && is_const(b)) {
    double out = 0.0;
    const char* why = nullptr;
    if (apply_binary(op, a->value, b->value, out, why)) return make_constant(out);
    return make_binary(op, std::move(a), std::move(b));
  }
  switch (op) {
    case BinaryOp::add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case BinaryOp::sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return b->kind == NodeKind::negate ? b->children[0] : make_negate(b);
      break;
    case BinaryOp::mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case BinaryOp::div:
      if (is_const(a, 0.0)) return make_constant(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case BinaryOp::pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return make_constant(1.0);
      break;
  }
  return make_binary(op, std::move(a), std::move(b));
}

NodePtr fold_negate(NodePtr a) {
  if (is_const(a)) return make_constant(-a->value);
  if (a->kind == NodeKind::negate) return a->children[0];
  return make_negate(std::move(a));
}

NodePtr fold_call(Func f, std::vector<NodePtr> args) {
  bool all_const = true;
  for (const auto& a : args) all_const = all_const && is_const(a);
  if (all_const) {
    double out = 0.0;
    const char* why = nullptr;
    double b = args.size() > 1 ? args[1]->value : 0.0;
    if (apply_func(f, args[0]->value, b, out, why)) return make_constant(out);
  }
  return make_call(f, std::move(args));
}

// ---------------------------------------------------------------------------
// Printing.

constexpr int kPrecSum = 1;
constexpr int kPrecProduct = 2;
constexpr int kPrecUnary = 3;
constexpr int kPrecPower = 4;
constexpr int kPrecAtom = 5;

int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::negate: return kPrecUnary;
    case NodeKind::binary:
      switch (n.op) {
        case BinaryOp::add:
        case BinaryOp::sub: return kPrecSum;
        case BinaryOp::mul:
        case BinaryOp::div: return kPrecProduct;
        case BinaryOp::pow: return kPrecPower;
      }
      break;
    default: break;
  }
  return kPrecAtom;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (std::signbit(v)) s = "(" + s + ")";
  return s;
}

void print(const Node& n, std::string& out);

void print_wrapped(const Node& n, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(n, out);
  if (wrap) out += ')';
}

void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::constant:
      out += format_number(n.value);
      return;
    case NodeKind::variable:
      out += "x" + std::to_string(n.variable + 1);
      return;
    case NodeKind::negate: {
      out += '-';
      const Node& c = *n.children[0];
      print_wrapped(c, precedence(c) < kPrecUnary || c.kind == NodeKind::negate, out);
      return;
    }
    case NodeKind::binary: {
      const Node& l = *n.children[0];
      const Node& r = *n.children[1];
      const int p = precedence(n);
      if (n.op == BinaryOp::pow) {
        print_wrapped(l, precedence(l) <= kPrecPower, out);
        out += '^';
        print_wrapped(r, precedence(r) < kPrecPower, out);
        return;
      }
      print_wrapped(l, precedence(l) < p, out);
      switch (n.op) {
        case BinaryOp::add: out += " + "; break;
        case BinaryOp::sub: out += " - "; break;
        case BinaryOp::mul: out += '*'; break;
        case BinaryOp::div: out += '/'; break;
        default: break;
      }
      print_wrapped(r, precedence(r) <= p || r.kind == NodeKind::negate, out);
      return;
    }
    case NodeKind::call: {
      out += function_name(n.func);
      out += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ", ";
        print(*n.children[i], out);
      }
      out += ')';
      return;
    }
  }
}

std::string print_node(const Node& n) {
  std::string s;
  print(n, s);
  return s;
}

// ---------------------------------------------------------------------------
// Tree evaluation.

struct TreeEvaluator {
  std::span<const double> x;
  const Node* failed = nullptr;
  const char* why = nullptr;

  bool eval(const Node& n, double& out) {
    switch (n.kind) {
      case NodeKind::constant:
        out = n.value;
        return true;
      case NodeKind::variable:
        out = x[n.variable];
        if (!std::isfinite(out)) return fail(n, "non-finite input");
        return true;
      case NodeKind::negate: {
        double a = 0.0;
        if (!eval(*n.children[0], a)) return false;
        out = -a;
        return true;
      }
      case NodeKind::binary: {
        double a = 0.0, b = 0.0;
        if (!eval(*n.children[0], a) || !eval(*n.children[1], b)) return false;
        const char* w = nullptr;
        if (!apply_binary(n.op, a, b, out, w)) return fail(n, w);
        return true;
      }
      case NodeKind::call: {
        double a = 0.0, b = 0.0;
        if (!eval(*n.children[0], a)) return false;
        if (n.children.size() > 1 && !eval(*n.children[1], b)) return false;
        const char* w = nullptr;
        if (!apply_func(n.func, a, b, out, w)) return fail(n, w);
        return true;
      }
    }
    return fail(n, "bad node");
  }

  bool fail(const Node& n, const char* w) {
    failed = &n;
    why = w;
    return false;
  }
};

// ---------------------------------------------------------------------------
// Parsing.

class Parser {
 public:
  Parser(std::string_view src, std::size_t dim) : src_(src), dim_(dim) {}

  NodePtr parse() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError(ParseErrorKind::syntax, 1, "empty expression");
    NodePtr n = parse_sum();
    skip_space();
    if (pos_ < src_.size()) error("unexpected '" + std::string(1, src_[pos_]) + "'");
    return n;
  }

 private:
  int column() const { return static_cast<int>(pos_) + 1; }

  [[noreturn]] void error(const std::string& msg) const { error_at(column(), msg); }
  [[noreturn]] void error_at(int col, const std::string& msg) const {
    throw ParseError(ParseErrorKind::syntax, col, msg);
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  SourceSpan span_from(std::size_t start) const {
    return {static_cast<int>(start) + 1, static_cast<int>(pos_ - start)};
  }

  NodePtr parse_sum() {
    skip_space();
    const std::size_t start = pos_;
    NodePtr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        NodePtr rhs = parse_product();
        lhs = make_binary(BinaryOp::add, lhs, rhs, span_from(start));
      } else if (accept('-')) {
        NodePtr rhs = parse_product();
        lhs = make_binary(BinaryOp::sub, lhs, rhs, span_from(start));
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_product() {
    skip_space();
    const std::size_t start = pos_;
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        NodePtr rhs = parse_unary();
        lhs = make_binary(BinaryOp::mul, lhs, rhs, span_from(start));
      } else if (accept('/')) {
        NodePtr rhs = parse_unary();
        lhs = make_binary(BinaryOp::div, lhs, rhs, span_from(start));
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    skip_space();
    const std::size_t start = pos_;
    if (accept('-')) return make_negate(parse_unary(), span_from(start));
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    skip_space();
    const std::size_t start = pos_;
    NodePtr base = parse_primary();
    if (accept('^')) {
      NodePtr exponent = parse_unary();
      return make_binary(BinaryOp::pow, base, exponent, span_from(start));
    }
    return base;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) error("unexpected end of expression");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    if (c == '(') {
      const std::size_t open = pos_;
      ++pos_;
      NodePtr inner = parse_sum();
      if (!accept(')')) error_at(static_cast<int>(open) + 1, "unbalanced '('");
      return inner;
    }
    error("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) error_at(static_cast<int>(start) + 1, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        pos_ = look;
        digits();
      }
    }
    double v = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) error_at(static_cast<int>(start) + 1, "malformed number");
    return make_constant(v, span_from(start));
  }

  NodePtr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    const int col = static_cast<int>(start) + 1;

    skip_space();
    const bool is_call = pos_ < src_.size() && src_[pos_] == '(';

    for (const auto& info : kFunctions) {
      if (info.name != name || info.func == Func::step) continue;
      if (!is_call) error_at(col, "function '" + std::string(name) + "' requires arguments");
      ++pos_;
      std::vector<NodePtr> args;
      if (!accept(')')) {
        args.push_back(parse_sum());
        while (accept(',')) args.push_back(parse_sum());
        if (!accept(')')) error("expected ',' or ')'");
      }
      if (args.size() != info.arity) {
        throw ParseError(ParseErrorKind::arity_mismatch, col,
                         "function '" + std::string(name) + "' takes " + std::to_string(info.arity) +
                             " argument(s), got " + std::to_string(args.size()));
      }
      return make_call(info.func, std::move(args), span_from(start));
    }

    if (is_call)
      throw ParseError(ParseErrorKind::unknown_identifier, col,
                       "unknown function '" + std::string(name) + "'");

    const SourceSpan span = span_from(start);
    if (name == "pi") return make_constant(std::numbers::pi, span);
    if (name == "e") return make_constant(std::numbers::e, span);

    std::optional<std::size_t> index;
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
      std::size_t k = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (ec != std::errc() || k == 0)
        throw ParseError(ParseErrorKind::variable_out_of_range, col,
                         "variable '" + std::string(name) + "' out of range (variables are x1..x" +
                             std::to_string(dim_) + ")");
      index = k - 1;
    } else if (dim_ <= 3 && name.size() == 1 && (name[0] == 'x' || name[0] == 'y' || name[0] == 'z')) {
      index = static_cast<std::size_t>(name[0] == 'x' ? 0 : name[0] == 'y' ? 1 : 2);
    }
    if (!index)
      throw ParseError(ParseErrorKind::unknown_identifier, col,
                       "unknown identifier '" + std::string(name) + "'");
    if (*index >= dim_)
      throw ParseError(ParseErrorKind::variable_out_of_range, col,
                       "variable '" + std::string(name) + "' out of range for dimension " +
                           std::to_string(dim_));
    return make_variable(*index, span);
  }

  std::string_view src_;
  std::size_t dim_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Differentiation.

class Differentiator {
 public:
  Differentiator(std::size_t var, DiffOptions opts) : var_(var), opts_(opts) {}

  NodePtr d(const NodePtr& np) {
    const Node& n = *np;
    switch (n.kind) {
      case NodeKind::constant: return make_constant(0.0);
      case NodeKind::variable: return make_constant(n.variable == var_ ? 1.0 : 0.0);
      case NodeKind::negate: return fold_negate(d(n.children[0]));
      case NodeKind::binary: return binary(n);
      case NodeKind::call: return call(n);
    }
    return make_constant(0.0);
  }

 private:
  NodePtr binary(const Node& n) {
    const NodePtr& a = n.children[0];
    const NodePtr& b = n.children[1];
    switch (n.op) {
      case BinaryOp::add: return fold_binary(BinaryOp::add, d(a), d(b));
      case BinaryOp::sub: return fold_binary(BinaryOp::sub, d(a), d(b));
      case BinaryOp::mul:
        return fold_binary(BinaryOp::add, fold_binary(BinaryOp::mul, d(a), b),
                           fold_binary(BinaryOp::mul, a, d(b)));
      case BinaryOp::div: return quotient(a, b);
      case BinaryOp::pow: return power(a, b);
    }
    return make_constant(0.0);
  }

  NodePtr quotient(const NodePtr& a, const NodePtr& b) {
    NodePtr da = d(a);
    NodePtr db = d(b);
    if (is_const(db, 0.0)) return fold_binary(BinaryOp::div, da, b);
    NodePtr b2 = fold_binary(BinaryOp::pow, b, make_constant(2.0));
    if (is_const(da, 0.0))
      return fold_negate(fold_binary(BinaryOp::div, fold_binary(BinaryOp::mul, a, db), b2));
    NodePtr num = fold_binary(BinaryOp::sub, fold_binary(BinaryOp::mul, da, b),
                              fold_binary(BinaryOp::mul, a, db));
    return fold_binary(BinaryOp::div, num, b2);
  }

  NodePtr power(const NodePtr& a, const NodePtr& b) {
    NodePtr da = d(a);
    NodePtr db = d(b);
    if (is_const(db, 0.0)) {
      // d(a^c) = c a^(c-1) a'
      NodePtr cm1 = fold_binary(BinaryOp::sub, b, make_constant(1.0));
      NodePtr lead = fold_binary(BinaryOp::mul, b, fold_binary(BinaryOp::pow, a, cm1));
      return fold_binary(BinaryOp::mul, lead, da);
    }
    NodePtr ab = make_binary(BinaryOp::pow, a, b);
    NodePtr log_a = fold_call(Func::log, {a});
    if (is_const(da, 0.0))
      return fold_binary(BinaryOp::mul, fold_binary(BinaryOp::mul, ab, log_a), db);
    NodePtr inner = fold_binary(
        BinaryOp::add, fold_binary(BinaryOp::mul, db, log_a),
        fold_binary(BinaryOp::div, fold_binary(BinaryOp::mul, b, da), a));
    return fold_binary(BinaryOp::mul, ab, inner);
  }

  NodePtr call(const Node& n) {
    const NodePtr& a = n.children[0];
    if (n.func == Func::pow) return power(a, n.children[1]);
    if (n.func == Func::min || n.func == Func::max) return minmax(n);
    if (n.func == Func::step) return make_constant(0.0);

    NodePtr da = d(a);
    if (is_const(da, 0.0)) return make_constant(0.0);
    auto times_da = [&](NodePtr outer) { return fold_binary(BinaryOp::mul, std::move(outer), da); };
    switch (n.func) {
      case Func::sin: return times_da(fold_call(Func::cos, {a}));
      case Func::cos: return times_da(fold_negate(fold_call(Func::sin, {a})));
      case Func::tan:
        return fold_binary(BinaryOp::div, da,
                           fold_binary(BinaryOp::pow, fold_call(Func::cos, {a}), make_constant(2.0)));
      case Func::atan:
        return fold_binary(BinaryOp::div, da,
                           fold_binary(BinaryOp::add, make_constant(1.0),
                                       fold_binary(BinaryOp::pow, a, make_constant(2.0))));
      case Func::exp: return times_da(fold_call(Func::exp, {a}));
      case Func::log: return fold_binary(BinaryOp::div, da, a);
      case Func::sqrt:
        return fold_binary(BinaryOp::div, da,
                           fold_binary(BinaryOp::mul, make_constant(2.0), fold_call(Func::sqrt, {a})));
      case Func::abs: {
        require_subgradient("abs");
        // left branch at the kink: step(0) = 0 gives slope -1
        NodePtr sign = fold_binary(BinaryOp::sub,
                                   fold_binary(BinaryOp::mul, make_constant(2.0), make_call(Func::step, {a})),
                                   make_constant(1.0));
        return times_da(sign);
      }
      default: break;
    }
    return make_constant(0.0);
  }

  // min(a,b)' = a' + step(a-b)(b'-a'), max(a,b)' = a' + step(b-a)(b'-a');
  // ties take the first argument's derivative.
  NodePtr minmax(const Node& n) {
    require_subgradient(n.func == Func::min ? "min" : "max");
    const NodePtr& a = n.children[0];
    const NodePtr& b = n.children[1];
    NodePtr da = d(a);
    NodePtr db = d(b);
    NodePtr gap = n.func == Func::min ? make_binary(BinaryOp::sub, a, b) : make_binary(BinaryOp::sub, b, a);
    NodePtr sel = make_call(Func::step, {gap});
    return fold_binary(BinaryOp::add, da,
                       fold_binary(BinaryOp::mul, sel, fold_binary(BinaryOp::sub, db, da)));
  }

  void require_subgradient(const char* name) const {
    if (!opts_.subgradient_at_kinks)
      throw NonSmoothError(std::string("cannot differentiate non-smooth function '") + name +
                           "' (enable the subgradient convention to allow it)");
  }

  std::size_t var_;
  DiffOptions opts_;
};

NodePtr substitute_node(const NodePtr& n, std::span<const Expr> repl) {
  switch (n->kind) {
    case NodeKind::constant: return n;
    case NodeKind::variable: return repl[n->variable].root_ptr();
    case NodeKind::negate: return fold_negate(substitute_node(n->children[0], repl));
    case NodeKind::binary:
      return fold_binary(n->op, substitute_node(n->children[0], repl), substitute_node(n->children[1], repl));
    case NodeKind::call: {
      std::vector<NodePtr> args;
      for (const auto& c : n->children) args.push_back(substitute_node(c, repl));
      return fold_call(n->func, std::move(args));
    }
  }
  return n;
}

void check_same_dim(const Expr& a, const Expr& b) {
  if (a.dimension() != b.dimension())
    throw std::invalid_argument("expression dimension mismatch: " + std::to_string(a.dimension()) +
                                " vs " + std::to_string(b.dimension()));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view function_name(Func f) {
  for (const auto& info : kFunctions)
    if (info.func == f) return info.name;
  return "?";
}

std::size_t function_arity(Func f) {
  for (const auto& info : kFunctions)
    if (info.func == f) return info.arity;
  return 0;
}

ParseError::ParseError(ParseErrorKind kind, int column, const std::string& message)
    : std::runtime_error("column " + std::to_string(column) + ": " + message), kind_(kind), column_(column) {}

Expr::Expr(NodePtr root, std::size_t dimension) : root_(std::move(root)), dimension_(dimension) {
  if (!root_) throw std::invalid_argument("null expression root");
  if (dimension_ == 0) throw std::invalid_argument("expression dimension must be positive");
}

Expr Expr::constant(double value, std::size_t dimension) { return Expr(make_constant(value), dimension); }

Expr Expr::variable(std::size_t index, std::size_t dimension) {
  if (index >= dimension) throw std::invalid_argument("variable index out of range");
  return Expr(make_variable(index), dimension);
}

std::optional<double> Expr::constant_value() const {
  if (is_constant()) return root_->value;
  return std::nullopt;
}

Result<double> Expr::evaluate(std::span<const double> x) const {
  if (x.size() != dimension_)
    throw std::invalid_argument("evaluation point has " + std::to_string(x.size()) +
                                " coordinates, expression expects " + std::to_string(dimension_));
  TreeEvaluator ev{x};
  double out = 0.0;
  if (ev.eval(*root_, out)) return out;
  return DomainFault{ev.why, print_node(*ev.failed), std::vector<double>(x.begin(), x.end())};
}

std::string Expr::to_string() const { return print_node(*root_); }

EvalContext::EvalContext(std::vector<double> v, std::size_t dim) : values(std::move(v)), dimension(dim) {
  if (dimension == 0) throw std::invalid_argument("dimension must be positive");
  if (values.size() != dimension) throw std::invalid_argument("context length does not match dimension");
}

Expr parse(std::string_view source, std::size_t dimension) {
  if (dimension == 0) throw std::invalid_argument("dimension must be positive");
  return Expr(Parser(source, dimension).parse(), dimension);
}

Result<double> evaluate(const Expr& e, const EvalContext& ctx) {
  if (ctx.dimension != e.dimension()) throw std::invalid_argument("context dimension mismatch");
  return e.evaluate(ctx.values);
}

Expr differentiate(const Expr& e, std::size_t variable, DiffOptions options) {
  if (variable >= e.dimension())
    throw std::invalid_argument("differentiation variable index " + std::to_string(variable) +
                                " out of range for dimension " + std::to_string(e.dimension()));
  return Expr(Differentiator(variable, options).d(e.root_ptr()), e.dimension());
}

Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  if (replacements.size() != e.dimension())
    throw std::invalid_argument("substitute needs one replacement per variable");
  for (const auto& r : replacements) check_same_dim(r, replacements.front());
  return Expr(substitute_node(e.root_ptr(), replacements), replacements.front().dimension());
}

std::string to_string(const Expr& e) { return e.to_string(); }

Expr operator+(const Expr& a, const Expr& b) {
  check_same_dim(a, b);
  return Expr(fold_binary(BinaryOp::add, a.root_ptr(), b.root_ptr()), a.dimension());
}
Expr operator-(const Expr& a, const Expr& b) {
  check_same_dim(a, b);
  return Expr(fold_binary(BinaryOp::sub, a.root_ptr(), b.root_ptr()), a.dimension());
}
Expr operator*(const Expr& a, const Expr& b) {
  check_same_dim(a, b);
  return Expr(fold_binary(BinaryOp::mul, a.root_ptr(), b.root_ptr()), a.dimension());
}
Expr operator/(const Expr& a, const Expr& b) {
  check_same_dim(a, b);
  return Expr(fold_binary(BinaryOp::div, a.root_ptr(), b.root_ptr()), a.dimension());
}
Expr operator-(const Expr& a) { return Expr(fold_negate(a.root_ptr()), a.dimension()); }
Expr pow(const Expr& base, const Expr& exponent) {
  check_same_dim(base, exponent);
  return Expr(fold_binary(BinaryOp::pow, base.root_ptr(), exponent.root_ptr()), base.dimension());
}
Expr call(Func f, std::vector<Expr> args) {
  if (args.size() != function_arity(f)) throw std::invalid_argument("function arity mismatch");
  std::vector<NodePtr> nodes;
  for (const auto& a : args) {
    check_same_dim(a, args.front());
    nodes.push_back(a.root_ptr());
  }
  return Expr(fold_call(f, std::move(nodes)), args.front().dimension());
}

// ---------------------------------------------------------------------------

CompiledExpr::CompiledExpr(const Expr& e) : source_(e) { emit(e.root(), 1); }

void CompiledExpr::emit(const Node& n, std::size_t depth) {
  max_depth_ = std::max(max_depth_, depth);
  switch (n.kind) {
    case NodeKind::constant: program_.push_back({OpCode::constant, Func::sin, 0, n.value}); return;
    case NodeKind::variable: program_.push_back({OpCode::variable, Func::sin, n.variable, 0.0}); return;
    case NodeKind::negate:
      emit(*n.children[0], depth);
      program_.push_back({OpCode::negate, Func::sin, 0, 0.0});
      return;
    case NodeKind::binary: {
      emit(*n.children[0], depth);
      emit(*n.children[1], depth + 1);
      static constexpr OpCode codes[] = {OpCode::add, OpCode::sub, OpCode::mul, OpCode::div, OpCode::pow};
      program_.push_back({codes[static_cast<int>(n.op)], Func::sin, 0, 0.0});
      return;
    }
    case NodeKind::call:
      emit(*n.children[0], depth);
      if (n.children.size() > 1) {
        emit(*n.children[1], depth + 1);
        program_.push_back({OpCode::call2, n.func, 0, 0.0});
      } else {
        program_.push_back({OpCode::call1, n.func, 0, 0.0});
      }
      return;
  }
}

namespace {

template <class Stack>
std::optional<double> run_program(const auto& program, std::span<const double> x, Stack& stack) {
  std::size_t top = 0;
  const char* why = nullptr;
  for (const auto& in : program) {
    using Op = std::remove_cvref_t<decltype(in.op)>;
    switch (in.op) {
      case Op::constant: stack[top++] = in.value; break;
      case Op::variable: {
        const double v = x[in.index];
        if (!std::isfinite(v)) return std::nullopt;
        stack[top++] = v;
        break;
      }
      case Op::negate: stack[top - 1] = -stack[top - 1]; break;
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div:
      case Op::pow: {
        static constexpr BinaryOp ops[] = {BinaryOp::add, BinaryOp::sub, BinaryOp::mul, BinaryOp::div,
                                           BinaryOp::pow};
        const auto idx = static_cast<int>(in.op) - static_cast<int>(Op::add);
        double out = 0.0;
        if (!apply_binary(ops[idx], stack[top - 2], stack[top - 1], out, why)) return std::nullopt;
        --top;
        stack[top - 1] = out;
        break;
      }
      case Op::call1: {
        double out = 0.0;
        if (!apply_func(in.func, stack[top - 1], 0.0, out, why)) return std::nullopt;
        stack[top - 1] = out;
        break;
      }
      case Op::call2: {
        double out = 0.0;
        if (!apply_func(in.func, stack[top - 2], stack[top - 1], out, why)) return std::nullopt;
        --top;
        stack[top - 1] = out;
        break;
      }
    }
  }
  return stack[0];
}

}  // namespace

std::optional<double> CompiledExpr::operator()(std::span<const double> x) const {
  if (max_depth_ <= 32) {
    std::array<double, 32> stack;
    return run_program(program_, x, stack);
  }
  std::vector<double> stack(max_depth_);
  return run_program(program_, x, stack);
}

Result<double> CompiledExpr::evaluate(std::span<const double> x) const {
  if (x.size() != dimension()) return source_.evaluate(x);  // throws with a message
  if (auto v = (*this)(x)) return *v;
  return source_.evaluate(x);
}

}  // namespace openstab::expr
