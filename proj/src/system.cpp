#include "openstab/system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace openstab {

namespace {

std::vector<expr::Expr> parse_all(const std::vector<std::string>& sources, std::size_t dimension) {
  std::vector<expr::Expr> out;
  out.reserve(sources.size());
  for (const auto& s : sources) out.push_back(expr::parse(s, dimension));
  return out;
}

std::size_t common_dimension(const std::vector<expr::Expr>& components) {
  if (components.empty()) throw std::invalid_argument("at least one component is required");
  const std::size_t d = components.front().dimension();
  for (const auto& c : components)
    if (c.dimension() != d) throw std::invalid_argument("components have different dimensions");
  return d;
}

std::vector<expr::Expr> all_partials(const std::vector<expr::Expr>& components, expr::DiffOptions opts) {
  std::vector<expr::Expr> out;
  for (const auto& c : components)
    for (std::size_t j = 0; j < c.dimension(); ++j) out.push_back(expr::differentiate(c, j, opts));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

DomainSpec::DomainSpec(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
  if (bounds_.empty()) throw std::invalid_argument("domain needs at least one coordinate");
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    const auto& b = bounds_[i];
    if (std::isnan(b.lower) || std::isnan(b.upper) || !(b.lower < b.upper))
      throw std::invalid_argument("domain coordinate " + std::to_string(i + 1) + " needs lower < upper");
  }
}

DomainSpec DomainSpec::whole(std::size_t dimension) {
  return DomainSpec(std::vector<Interval>(dimension, Interval{}));
}

bool DomainSpec::contains(std::span<const double> x) const {
  if (x.size() != bounds_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > bounds_[i].lower && x[i] < bounds_[i].upper)) return false;
  return true;
}

double DomainSpec::distance_to_boundary(const State& x) const {
  double d = kInf;
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    d = std::min(d, x[static_cast<Eigen::Index>(i)] - bounds_[i].lower);
    d = std::min(d, bounds_[i].upper - x[static_cast<Eigen::Index>(i)]);
  }
  return d;
}

bool DomainSpec::is_bounded() const {
  return std::all_of(bounds_.begin(), bounds_.end(),
                     [](const Interval& b) { return std::isfinite(b.lower) && std::isfinite(b.upper); });
}

bool DomainSpec::contains_closed(const DomainSpec& inner) const {
  if (inner.dimension() != dimension() || !inner.is_bounded()) return false;
  for (std::size_t i = 0; i < bounds_.size(); ++i)
    if (!(inner[i].lower > bounds_[i].lower && inner[i].upper < bounds_[i].upper)) return false;
  return true;
}

// ---------------------------------------------------------------------------

ExprVector::ExprVector(std::vector<expr::Expr> components, std::size_t dimension)
    : components_(std::move(components)), dimension_(dimension) {
  compiled_.reserve(components_.size());
  for (const auto& c : components_) {
    if (c.dimension() != dimension_) throw std::invalid_argument("component dimension mismatch");
    compiled_.emplace_back(c);
  }
}

bool ExprVector::eval_into(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < compiled_.size(); ++i) {
    auto v = compiled_[i](x);
    if (!v) return false;
    out[i] = *v;
  }
  return true;
}

Result<State> ExprVector::evaluate(const State& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension_)
    throw std::invalid_argument("point dimension mismatch");
  State out(static_cast<Eigen::Index>(compiled_.size()));
  const std::span<const double> in(x.data(), x.size());
  for (std::size_t i = 0; i < compiled_.size(); ++i) {
    auto v = compiled_[i].evaluate(in);
    if (!v) return v.fault();
    out[static_cast<Eigen::Index>(i)] = *v;
  }
  return out;
}

// ---------------------------------------------------------------------------

VectorFieldSpec::VectorFieldSpec(std::string name, std::vector<expr::Expr> components, DomainSpec domain,
                                 expr::DiffOptions smoothness)
    : name_(std::move(name)),
      field_(components, common_dimension(components)),
      domain_(std::move(domain)) {
  if (field_.size() != field_.dimension())
    throw std::invalid_argument("vector field '" + name_ + "' needs one component per dimension");
  if (domain_.dimension() != field_.dimension())
    throw std::invalid_argument("vector field '" + name_ + "' domain dimension mismatch");
  all_partials(field_.components(), smoothness);
}

VectorFieldSpec::VectorFieldSpec(std::string name, const std::vector<std::string>& components, DomainSpec domain,
                                 expr::DiffOptions smoothness)
    : VectorFieldSpec(std::move(name), parse_all(components, components.size()), std::move(domain), smoothness) {}

SmoothMapSpec::SmoothMapSpec(std::string name, std::vector<expr::Expr> components, DomainSpec source_domain,
                             expr::DiffOptions smoothness)
    : name_(std::move(name)),
      map_(components, common_dimension(components)),
      domain_(std::move(source_domain)),
      partials_(all_partials(map_.components(), smoothness)),
      partials_compiled_(partials_, map_.dimension()) {
  if (domain_.dimension() != map_.dimension())
    throw std::invalid_argument("map '" + name_ + "' domain dimension mismatch");
}

SmoothMapSpec::SmoothMapSpec(std::string name, std::size_t source_dimension,
                             const std::vector<std::string>& components, DomainSpec source_domain,
                             expr::DiffOptions smoothness)
    : SmoothMapSpec(std::move(name), parse_all(components, source_dimension), std::move(source_domain),
                    smoothness) {}

SmoothMapSpec SmoothMapSpec::identity(std::size_t dimension, DomainSpec domain, std::string name) {
  std::vector<expr::Expr> comps;
  for (std::size_t i = 0; i < dimension; ++i) comps.push_back(expr::Expr::variable(i, dimension));
  return SmoothMapSpec(std::move(name), std::move(comps), std::move(domain));
}

Result<Matrix> SmoothMapSpec::jacobian_unchecked(const State& x) const {
  const auto m = static_cast<Eigen::Index>(target_dimension());
  const auto n = static_cast<Eigen::Index>(source_dimension());
  auto flat = partials_compiled_.evaluate(x);
  if (!flat) return flat.fault();
  Matrix j(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < n; ++k) j(i, k) = (*flat)[i * n + k];
  return j;
}

SmoothMapSpec compose(const SmoothMapSpec& g, const SmoothMapSpec& f, std::string name) {
  if (g.source_dimension() != f.target_dimension())
    throw std::invalid_argument("cannot compose: " + g.name() + " expects dimension " +
                                std::to_string(g.source_dimension()));
  std::vector<expr::Expr> comps;
  for (const auto& c : g.components()) comps.push_back(expr::substitute(c, f.components()));
  if (name.empty()) name = g.name() + "_o_" + f.name();
  return SmoothMapSpec(std::move(name), std::move(comps), f.source_domain());
}

MorphismDecl::MorphismDecl(SmoothMapSpec m, VectorFieldSpec src, VectorFieldSpec tgt)
    : map(std::move(m)), source(std::move(src)), target(std::move(tgt)) {
  if (map.source_dimension() != source.dimension())
    throw std::invalid_argument("map '" + map.name() + "' source dimension does not match system '" +
                                source.name() + "'");
  if (map.target_dimension() != target.dimension())
    throw std::invalid_argument("map '" + map.name() + "' target dimension does not match system '" +
                                target.name() + "'");
}

// ---------------------------------------------------------------------------

MetricSpec MetricSpec::weighted(std::vector<double> w) {
  for (double v : w)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("metric weights must be positive");
  return {MetricKind::weighted_euclidean, std::move(w)};
}

std::string MetricSpec::label() const {
  switch (kind) {
    case MetricKind::euclidean: return "euclidean";
    case MetricKind::weighted_euclidean: return "weighted-euclidean";
    case MetricKind::arctan_compressed: return "arctan-compressed";
  }
  return "?";
}

Result<Matrix> jacobian(const SmoothMapSpec& map, const State& point) {
  if (!map.source_domain().contains(point))
    throw std::invalid_argument("jacobian: point outside the open source domain of '" + map.name() + "'");
  return map.jacobian_unchecked(point);
}

Result<Matrix> finite_difference_jacobian(const SmoothMapSpec& map, const State& point, double step) {
  const auto m = static_cast<Eigen::Index>(map.target_dimension());
  const auto n = static_cast<Eigen::Index>(map.source_dimension());
  Matrix j(m, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = step * std::max(1.0, std::abs(point[k]));
    State up = point, down = point;
    up[k] += h;
    down[k] -= h;
    auto fu = map(up);
    if (!fu) return fu.fault();
    auto fd = map(down);
    if (!fd) return fd.fault();
    j.col(k) = (*fu - *fd) / (up[k] - down[k]);
  }
  return j;
}

double metric_distance(const MetricSpec& metric, const State& a, const State& b) {
  if (a.size() != b.size()) throw std::invalid_argument("metric_distance: dimension mismatch");
  switch (metric.kind) {
    case MetricKind::euclidean: return (a - b).norm();
    case MetricKind::weighted_euclidean: {
      if (metric.weights.size() != static_cast<std::size_t>(a.size()))
        throw std::invalid_argument("metric_distance: weight count does not match dimension");
      double s = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += metric.weights[static_cast<std::size_t>(i)] * d * d;
      }
      return std::sqrt(s);
    }
    case MetricKind::arctan_compressed: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = std::atan(a[i]) - std::atan(b[i]);
        s += d * d;
      }
      return std::sqrt(s);
    }
  }
  return 0.0;
}

}  // namespace openstab
