#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openstab/expr.hpp"
#include "openstab/result.hpp"

namespace openstab {

using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Open interval (lower, upper); either end may be infinite.
struct Interval {
  double lower = -kInf;
  double upper = kInf;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Open box in R^n.
class DomainSpec {
 public:
  explicit DomainSpec(std::vector<Interval> bounds);
  static DomainSpec whole(std::size_t dimension);

  std::size_t dimension() const { return bounds_.size(); }
  const std::vector<Interval>& bounds() const { return bounds_; }
  const Interval& operator[](std::size_t i) const { return bounds_[i]; }

  bool contains(std::span<const double> x) const;
  bool contains(const State& x) const { return contains(std::span<const double>(x.data(), x.size())); }
  /// Smallest coordinate gap to a finite bound; +inf for R^n.
  double distance_to_boundary(const State& x) const;
  bool is_bounded() const;
  /// True when `inner` is a closed box lying inside this open box.
  bool contains_closed(const DomainSpec& inner) const;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;

 private:
  std::vector<Interval> bounds_;
};

/// Vector-valued expression with compiled evaluators; shared by fields and maps.
class ExprVector {
 public:
  ExprVector(std::vector<expr::Expr> components, std::size_t dimension);

  std::size_t size() const { return components_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<expr::Expr>& components() const { return components_; }

  /// false on a domain fault.
  bool eval_into(std::span<const double> x, std::span<double> out) const;
  Result<State> evaluate(const State& x) const;

 private:
  std::vector<expr::Expr> components_;
  std::vector<expr::CompiledExpr> compiled_;
  std::size_t dimension_;
};

/// Smooth vector field X on an open box M (a dynamical system (M, X)).
class VectorFieldSpec {
 public:
  VectorFieldSpec(std::string name, std::vector<expr::Expr> components, DomainSpec domain,
                  expr::DiffOptions smoothness = {});
  VectorFieldSpec(std::string name, const std::vector<std::string>& components, DomainSpec domain,
                  expr::DiffOptions smoothness = {});

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return field_.dimension(); }
  const DomainSpec& domain() const { return domain_; }
  const std::vector<expr::Expr>& components() const { return field_.components(); }

  bool eval_into(std::span<const double> x, std::span<double> out) const { return field_.eval_into(x, out); }
  Result<State> operator()(const State& x) const { return field_.evaluate(x); }

 private:
  std::string name_;
  ExprVector field_;
  DomainSpec domain_;
};

/// Smooth map f: M -> R^m with its symbolic Jacobian.
class SmoothMapSpec {
 public:
  SmoothMapSpec(std::string name, std::vector<expr::Expr> components, DomainSpec source_domain,
                expr::DiffOptions smoothness = {});
  SmoothMapSpec(std::string name, std::size_t source_dimension, const std::vector<std::string>& components,
                DomainSpec source_domain, expr::DiffOptions smoothness = {});

  static SmoothMapSpec identity(std::size_t dimension, DomainSpec domain, std::string name = "id");

  const std::string& name() const { return name_; }
  std::size_t source_dimension() const { return map_.dimension(); }
  std::size_t target_dimension() const { return map_.size(); }
  const DomainSpec& source_domain() const { return domain_; }
  const std::vector<expr::Expr>& components() const { return map_.components(); }
  /// d f_i / d x_j
  const expr::Expr& partial(std::size_t i, std::size_t j) const { return partials_[i * source_dimension() + j]; }

  bool eval_into(std::span<const double> x, std::span<double> out) const { return map_.eval_into(x, out); }
  Result<State> operator()(const State& x) const { return map_.evaluate(x); }
  /// Jacobian without the domain precondition; used by finite-difference
  /// cross-checks and internal sweeps.
  Result<Matrix> jacobian_unchecked(const State& x) const;

 private:
  std::string name_;
  ExprVector map_;
  DomainSpec domain_;
  std::vector<expr::Expr> partials_;
  ExprVector partials_compiled_;
};

/// g o f, built by symbolic substitution; domain is f's source domain.
SmoothMapSpec compose(const SmoothMapSpec& g, const SmoothMapSpec& f, std::string name = {});

/// Declared (unverified) map of systems f: (M, X) -> (N, Y).
struct MorphismDecl {
  MorphismDecl(SmoothMapSpec map, VectorFieldSpec source, VectorFieldSpec target);

  SmoothMapSpec map;
  VectorFieldSpec source;
  VectorFieldSpec target;
};

enum class MetricKind { euclidean, weighted_euclidean, arctan_compressed };

struct MetricSpec {
  MetricKind kind = MetricKind::euclidean;
  std::vector<double> weights;

  static MetricSpec euclidean() { return {}; }
  static MetricSpec weighted(std::vector<double> w);
  static MetricSpec arctan() { return {MetricKind::arctan_compressed, {}}; }

  std::string label() const;
  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Exact Jacobian of `map` at `point`. Throws std::invalid_argument when the
/// point is not strictly inside the source domain.
Result<Matrix> jacobian(const SmoothMapSpec& map, const State& point);

/// Central-difference Jacobian, used only as an independent cross-check.
Result<Matrix> finite_difference_jacobian(const SmoothMapSpec& map, const State& point, double step = 1e-6);

double metric_distance(const MetricSpec& metric, const State& a, const State& b);

}  // namespace openstab
