#pragma once

// Scalar expression language used to define vector fields and maps.
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | name | name '(' args ')' | '(' sum ')'
//
// so "-x^2" is -(x^2) and "2^-1" is 0.5. Variables are x1..xn; x, y, z alias
// x1, x2, x3 when n <= 3. Constants: pi, e.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "openstab/result.hpp"

namespace openstab::expr {

enum class NodeKind { constant, variable, negate, binary, call };
enum class BinaryOp { add, sub, mul, div, pow };

// `step` is internal: it only appears in derivatives taken with the
// subgradient convention and cannot be written in source text.
enum class Func { sin, cos, tan, atan, exp, log, sqrt, abs, pow, min, max, step };

std::string_view function_name(Func f);
std::size_t function_arity(Func f);

struct SourceSpan {
  int column = 0;  // 1-based; 0 for synthesized nodes
  int length = 0;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::constant;
  double value = 0.0;
  std::size_t variable = 0;
  BinaryOp op = BinaryOp::add;
  Func func = Func::sin;
  std::vector<NodePtr> children;
  SourceSpan span;
};

enum class ParseErrorKind { syntax, unknown_identifier, arity_mismatch, variable_out_of_range };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, int column, const std::string& message);
  ParseErrorKind kind() const { return kind_; }
  int column() const { return column_; }

 private:
  ParseErrorKind kind_;
  int column_;
};

class NonSmoothError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable expression tree in a fixed number of variables. Copies share
/// the tree.
class Expr {
 public:
  Expr(NodePtr root, std::size_t dimension);

  static Expr constant(double value, std::size_t dimension);
  static Expr variable(std::size_t index, std::size_t dimension);

  std::size_t dimension() const { return dimension_; }
  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }

  bool is_constant() const { return root_->kind == NodeKind::constant; }
  std::optional<double> constant_value() const;

  Result<double> evaluate(std::span<const double> x) const;
  std::string to_string() const;

 private:
  NodePtr root_;
  std::size_t dimension_;
};

struct EvalContext {
  EvalContext(std::vector<double> values, std::size_t dimension);

  std::vector<double> values;
  std::size_t dimension;
};

Expr parse(std::string_view source, std::size_t dimension);

/// Evaluates in IEEE double precision. log/sqrt outside their domain,
/// division by zero and any non-finite intermediate produce a DomainFault
/// naming the offending subexpression.
Result<double> evaluate(const Expr& e, const EvalContext& ctx);

struct DiffOptions {
  /// Differentiate abs/min/max using the left branch at kinks instead of
  /// rejecting them.
  bool subgradient_at_kinks = false;
};

/// Exact partial derivative with respect to x_{variable+1} (0-based index).
/// Only literal arithmetic is folded.
Expr differentiate(const Expr& e, std::size_t variable, DiffOptions options = {});

/// Replaces every variable x_i by replacements[i]; the result lives in the
/// replacements' dimension.
Expr substitute(const Expr& e, std::span<const Expr> replacements);

std::string to_string(const Expr& e);

// Builders. Literal operands are folded; x*0, x*1, x+0 and x^1 collapse.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, const Expr& exponent);
Expr call(Func f, std::vector<Expr> args);

/// Flattened stack program for the hot evaluation path. Produces bit-identical
/// values to Expr::evaluate.
class CompiledExpr {
 public:
  explicit CompiledExpr(const Expr& e);

  /// nullopt on any domain fault.
  std::optional<double> operator()(std::span<const double> x) const;
  /// Same value, with a diagnostic on faults.
  Result<double> evaluate(std::span<const double> x) const;

  std::size_t dimension() const { return source_.dimension(); }
  const Expr& source() const { return source_; }

 private:
  enum class OpCode : unsigned char { constant, variable, negate, add, sub, mul, div, pow, call1, call2 };
  struct Instr {
    OpCode op;
    Func func;
    std::size_t index;
    double value;
  };

  void emit(const Node& n, std::size_t depth);

  Expr source_;
  std::vector<Instr> program_;
  std::size_t max_depth_ = 0;
};

}  // namespace openstab::expr
