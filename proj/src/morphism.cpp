#include "openstab/morphism.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "openstab/parallel.hpp"

namespace openstab {

namespace {

std::vector<double> axis(const Interval& iv, std::size_t density) {
  if (density == 1) return {0.5 * (iv.lower + iv.upper)};
  std::vector<double> out(density);
  for (std::size_t k = 0; k < density; ++k)
    out[k] = iv.lower + (iv.upper - iv.lower) * static_cast<double>(k) / static_cast<double>(density - 1);
  out.back() = iv.upper;
  return out;
}

void require_inside(const DomainSpec& outer, const DomainSpec& region, const std::string& what) {
  if (!outer.contains_closed(region))
    throw std::invalid_argument("region is not a closed box inside the " + what);
}

std::string box_string(const DomainSpec& box) {
  std::ostringstream os;
  os.precision(10);
  for (std::size_t i = 0; i < box.dimension(); ++i) {
    if (i) os << " x ";
    os << '[' << box[i].lower << ", " << box[i].upper << ']';
  }
  return os.str();
}

std::size_t fitted_density(std::size_t density, std::size_t dimension, std::size_t max_points) {
  std::size_t d = std::max<std::size_t>(2, density);
  while (d > 2 && std::pow(static_cast<double>(d), static_cast<double>(dimension)) > static_cast<double>(max_points))
    --d;
  return d;
}

}  // namespace

std::vector<State> grid_points(const DomainSpec& region, std::size_t density) {
  if (density == 0) throw std::invalid_argument("grid density must be positive");
  if (!region.is_bounded()) throw std::invalid_argument("grid region must be bounded");
  const std::size_t n = region.dimension();
  std::vector<std::vector<double>> axes;
  for (std::size_t i = 0; i < n; ++i) axes.push_back(axis(region[i], density));

  std::vector<State> pts;
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    State p(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) p[static_cast<Eigen::Index>(i)] = axes[i][idx[i]];
    pts.push_back(p);
    std::size_t i = n;
    while (i > 0 && ++idx[i - 1] == density) idx[--i] = 0;
    if (i == 0) break;
  }
  return pts;
}

// ---------------------------------------------------------------------------

RelatednessReport check_related(const MorphismDecl& decl, const DomainSpec& region, std::size_t grid_density,
                                double tol, std::uint64_t seed) {
  require_inside(decl.source.domain(), region, "source domain");
  require_inside(decl.map.source_domain(), region, "map domain");

  RelatednessReport rep;
  rep.tolerance = tol;
  rep.points = grid_points(region, grid_density);
  const std::size_t count = rep.points.size();

  struct PointResult {
    std::optional<double> residual;
    std::optional<DomainFault> fault;
    bool outside = false;
  };
  std::vector<PointResult> results(count);
  parallel_for(0, count, [&](std::size_t k) {
    const State& x = rep.points[k];
    PointResult& r = results[k];
    auto X = decl.source(x);
    if (!X) return void(r.fault = X.fault());
    auto J = decl.map.jacobian_unchecked(x);
    if (!J) return void(r.fault = J.fault());
    auto fx = decl.map(x);
    if (!fx) return void(r.fault = fx.fault());
    if (!decl.target.domain().contains(*fx)) return void(r.outside = true);
    auto Y = decl.target(*fx);
    if (!Y) return void(r.fault = Y.fault());
    r.residual = (*J * *X - *Y).cwiseAbs().maxCoeff();
  });

  std::size_t evaluated = 0;
  for (std::size_t k = 0; k < count; ++k) {
    rep.residuals.push_back(results[k].residual);
    if (results[k].fault) rep.faults.push_back({k, *results[k].fault});
    if (results[k].outside) ++rep.outside_target;
    if (!results[k].residual) continue;
    ++evaluated;
    if (*results[k].residual > rep.max_residual || evaluated == 1) {
      rep.max_residual = *results[k].residual;
      rep.worst_index = k;
    }
  }
  if (!rep.faults.empty())
    rep.warnings.push_back(std::to_string(rep.faults.size()) + " grid point(s) faulted and were excluded; first: " +
                           rep.faults.front().fault.describe());
  if (rep.outside_target > 0)
    rep.warnings.push_back(std::to_string(rep.outside_target) + " grid point(s) map outside the target domain");
  if (evaluated == 0) rep.warnings.push_back("no grid point could be evaluated");
  rep.passed = evaluated > 0 && rep.outside_target == 0 && rep.max_residual <= tol;

  std::mt19937_64 rng(seed);
  const std::size_t n = region.dimension();
  for (int s = 0; s < 5; ++s) {
    State x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      x[static_cast<Eigen::Index>(i)] = std::uniform_real_distribution<double>(region[i].lower, region[i].upper)(rng);
    const double room = decl.map.source_domain().distance_to_boundary(x);
    const double step = std::min(1e-6, 0.25 * room / std::max(1.0, x.cwiseAbs().maxCoeff()));
    auto exact = decl.map.jacobian_unchecked(x);
    auto fd = finite_difference_jacobian(decl.map, x, step);
    if (!exact || !fd) continue;
    const double scale = std::max(1.0, exact->cwiseAbs().maxCoeff());
    rep.fd_max_discrepancy = std::max(rep.fd_max_discrepancy, (*exact - *fd).cwiseAbs().maxCoeff() / scale);
    rep.fd_points.push_back(x);
  }
  rep.fd_agrees = rep.fd_max_discrepancy <= 1e-6;
  if (!rep.fd_agrees)
    rep.warnings.push_back("finite-difference Jacobian disagrees with the symbolic one (relative " +
                           std::to_string(rep.fd_max_discrepancy) + ")");
  return rep;
}

std::string_view to_string(OpennessVerdict v) {
  return v == OpennessVerdict::submersion_on_region ? "submersion-on-region" : "degenerate-points";
}

OpennessReport check_open(const SmoothMapSpec& map, const DomainSpec& region, std::size_t grid_density,
                          double margin) {
  require_inside(map.source_domain(), region, "map domain");
  OpennessReport rep;
  rep.margin = margin;
  const auto m = map.target_dimension();
  const auto n = map.source_dimension();
  if (m > n) {
    rep.reason = "target dimension " + std::to_string(m) + " exceeds source dimension " + std::to_string(n);
    return rep;
  }

  rep.points = grid_points(region, grid_density);
  rep.sigma_min.assign(rep.points.size(), 0.0);
  parallel_for(0, rep.points.size(), [&](std::size_t k) {
    auto J = map.jacobian_unchecked(rep.points[k]);
    if (!J) return;
    Eigen::JacobiSVD<Matrix> svd(*J);
    rep.sigma_min[k] = svd.singularValues()(static_cast<Eigen::Index>(m) - 1);
  });
  rep.min_sigma = *std::min_element(rep.sigma_min.begin(), rep.sigma_min.end());
  for (std::size_t k = 0; k < rep.points.size(); ++k)
    if (!(rep.sigma_min[k] >= margin)) rep.degenerate.push_back(k);
  if (rep.degenerate.empty()) {
    rep.verdict = OpennessVerdict::submersion_on_region;
  } else {
    rep.reason = std::to_string(rep.degenerate.size()) + " grid point(s) with smallest singular value below " +
                 std::to_string(margin);
  }
  return rep;
}

// ---------------------------------------------------------------------------

Trajectory pushforward(const std::shared_ptr<const Trajectory>& traj, const std::shared_ptr<const SmoothMapSpec>& map,
                       std::string target_system, std::size_t per_step) {
  if (traj->dimension() != map->source_dimension())
    throw std::invalid_argument("pushforward: trajectory dimension does not match the map");
  if (target_system.empty()) target_system = map->name() + "_*" + traj->system_name();

  std::vector<double> times;
  std::vector<State> states;
  Termination term = traj->termination();
  for (double t : traj->refined_times(std::max<std::size_t>(1, per_step))) {
    const State x = traj->sample(t);
    auto y = map->source_domain().contains(x) ? (*map)(x) : Result<State>(DomainFault{"outside map domain", "", {}});
    if (!y) {
      if (times.empty())
        throw std::invalid_argument("pushforward: initial state outside the domain of '" + map->name() + "'");
      term = Termination::domain_exit;
      break;
    }
    times.push_back(t);
    states.push_back(*y);
  }
  return Trajectory(std::move(target_system), std::move(times), std::move(states),
                    Trajectory::Pushforward{traj, map}, term);
}

Trajectory pushforward(const Trajectory& traj, const SmoothMapSpec& map, std::string target_system,
                       std::size_t per_step) {
  return pushforward(std::make_shared<const Trajectory>(traj), std::make_shared<const SmoothMapSpec>(map),
                     std::move(target_system), per_step);
}

// ---------------------------------------------------------------------------

ModulusField::ModulusField(double eps, DomainSpec region, std::size_t grid_density, std::vector<double> values)
    : eps_(eps), region_(std::move(region)), density_(grid_density), points_(grid_points(region_, grid_density)),
      values_(std::move(values)) {
  if (values_.size() != points_.size()) throw std::invalid_argument("modulus field needs one value per grid point");
  for (double v : values_)
    if (!(v > 0.0)) throw std::invalid_argument("modulus values must be positive");
}

double ModulusField::operator()(const State& x) const {
  const std::size_t n = region_.dimension();
  if (static_cast<std::size_t>(x.size()) != n) throw std::invalid_argument("modulus field: dimension mismatch");
  std::vector<std::size_t> cell(n, 0);
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[static_cast<Eigen::Index>(i)];
    const Interval& iv = region_[i];
    if (!(xi >= iv.lower && xi <= iv.upper)) throw std::out_of_range("modulus field: point outside the region");
    if (density_ == 1) continue;
    const double u = (xi - iv.lower) / (iv.upper - iv.lower) * static_cast<double>(density_ - 1);
    cell[i] = std::min(static_cast<std::size_t>(u), density_ - 2);
    w[i] = u - static_cast<double>(cell[i]);
  }
  double sum = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool up = (corner >> i) & 1;
      if (density_ == 1 && up) {
        weight = 0.0;
        break;
      }
      weight *= up ? w[i] : 1.0 - w[i];
      flat = flat * density_ + cell[i] + (up ? 1 : 0);
    }
    if (weight != 0.0) sum += weight * values_[flat];
  }
  return sum;
}

ModulusField estimate_modulus(const SmoothMapSpec& map, double eps, const DomainSpec& region,
                              std::size_t grid_density, const ModulusOptions& options) {
  if (!(eps > 0.0)) throw std::invalid_argument("estimate_modulus: eps must be positive");
  require_inside(map.source_domain(), region, "map domain");
  const std::vector<State> pts = grid_points(region, grid_density);
  const double limit = eps * (1.0 - options.safety);
  const double cap = 1e6 * eps;

  std::vector<double> values(pts.size(), options.floor);
  std::vector<char> degenerate(pts.size(), 0);
  parallel_for(0, pts.size(), [&](std::size_t k) {
    const State& x = pts[k];
    auto fx = map(x);
    if (!fx) {
      degenerate[k] = 1;
      return;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    const auto dirs = shell_directions(map.source_dimension(), options.probes, rng);

    auto within = [&](double d) {
      for (const State& dir : dirs) {
        for (double r : {d, 0.5 * d}) {
          auto p = shell_point(options.source_metric, x, dir, r);
          if (!p || !map.source_domain().contains(*p)) continue;
          auto fp = map(*p);
          if (!fp || !(metric_distance(options.target_metric, *fx, *fp) < limit)) return false;
        }
      }
      return true;
    };

    double good = 0.0, bad = kInf, d = eps;
    if (within(d)) {
      good = d;
      while (d < cap) {
        d *= 2.0;
        if (!within(d)) {
          bad = d;
          break;
        }
        good = d;
      }
    } else {
      bad = d;
      while (d >= options.floor) {
        d *= 0.5;
        if (within(d)) {
          good = d;
          break;
        }
        bad = d;
      }
    }
    if (good == 0.0) {
      degenerate[k] = 1;
      return;
    }
    for (std::size_t s = 0; s < options.bisection_steps && std::isfinite(bad) && bad - good > 1e-9 * good; ++s) {
      const double mid = 0.5 * (good + bad);
      (within(mid) ? good : bad) = mid;
    }
    values[k] = std::max(options.floor, options.shrink * good);
    if (values[k] <= options.floor) degenerate[k] = 1;
  });

  ModulusField field(eps, region, grid_density, values);
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (degenerate[k]) field.degenerate.push_back(k);
  if (!field.degenerate.empty())
    field.warnings.push_back(std::to_string(field.degenerate.size()) + " degenerate grid point(s) held at the floor " +
                             std::to_string(options.floor));
  return field;
}

// ---------------------------------------------------------------------------

std::string_view to_string(TransferStatus s) {
  return s == TransferStatus::transferred_stable ? "transferred-stable" : "not-transferable";
}

TransferConclusion conclude(const TransferLedger& l) {
  auto no = [](std::string why) { return TransferConclusion{TransferStatus::not_transferable, std::move(why)}; };
  if (l.source.overall != Verdict::certified)
    return no("source not stable (verdict " + std::string(to_string(l.source.overall)) + ")");
  if (!l.boundedness.bounded) return no("source trajectory not bounded");
  if (!l.tube || !l.tube_covers_hull) return no("verification tube does not cover the trajectory hull");
  if (!l.relatedness.passed) return no("vector fields not f-related on the tube");
  if (!l.openness.submersion()) return no("map not a submersion on the tube");
  return {TransferStatus::transferred_stable, "all hypotheses hold"};
}

TransferCertificate transfer(const MorphismDecl& decl, const State& x0, const TransferConfig& config,
                             std::string morphism_name) {
  if (!decl.source.domain().contains(x0)) throw std::invalid_argument("transfer: x0 outside the source domain");
  if (!decl.map.source_domain().contains(x0)) throw std::invalid_argument("transfer: x0 outside the map domain");

  TransferCertificate cert;
  cert.morphism_name = morphism_name.empty() ? decl.map.name() : std::move(morphism_name);
  cert.source_system = decl.source.name();
  cert.target_system = decl.target.name();
  cert.map_name = decl.map.name();
  cert.x0 = x0;
  cert.config = config;
  auto image = decl.map(x0);
  if (!image) throw std::invalid_argument("transfer: map faults at x0: " + image.fault().describe());
  cert.image = *image;

  auto make_query = [&](const VectorFieldSpec& sys, const State& p) {
    StabilityQuery q(sys, p);
    q.eps_ladder = config.eps_ladder;
    q.delta_min = config.delta_min;
    q.probes = config.probes;
    q.metric = config.metric;
    q.integrator = config.integrator;
    q.plan = config.plan;
    q.radius_cap = config.radius_cap;
    q.seed = config.seed;
    return q;
  };

  TransferLedger& led = cert.ledger;
  led.source = check_stability(make_query(decl.source, x0));
  led.boundedness = led.source.base_boundedness;

  double inflation = 0.0;
  for (const auto& e : led.source.entries)
    if (e.certified_delta) inflation = std::max(inflation, *e.certified_delta);
  led.tube_inflation = inflation;

  const std::size_t n = decl.source.dimension();
  bool finite_hull = led.boundedness.lower.size() == n;
  for (std::size_t i = 0; finite_hull && i < n; ++i)
    finite_hull = std::isfinite(led.boundedness.lower[i]) && std::isfinite(led.boundedness.upper[i]);

  if (finite_hull) {
    std::vector<Interval> box(n);
    bool covers = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double hlo = led.boundedness.lower[i], hhi = led.boundedness.upper[i];
      double lo = hlo - inflation, hi = hhi + inflation;
      for (const DomainSpec* dom : {&decl.source.domain(), &decl.map.source_domain()}) {
        const Interval& iv = (*dom)[i];
        if (std::isfinite(iv.lower)) lo = std::max(lo, iv.lower + 1e-9 * std::max(1.0, std::abs(iv.lower)));
        if (std::isfinite(iv.upper)) hi = std::min(hi, iv.upper - 1e-9 * std::max(1.0, std::abs(iv.upper)));
      }
      if (!(hi > lo)) {
        const double pad = 1e-9 * std::max(1.0, std::abs(lo));
        lo -= pad;
        hi += pad;
      }
      covers = covers && lo <= hlo && hi >= hhi;
      box[i] = {lo, hi};
    }
    DomainSpec tube(box);
    led.tube_covers_hull = covers;
    if (decl.source.domain().contains_closed(tube) && decl.map.source_domain().contains_closed(tube)) {
      led.tube = tube;
      const std::size_t density = fitted_density(config.grid_density, n, config.max_grid_points);
      led.relatedness = check_related(decl, tube, density, config.relatedness_tol, config.seed);
      led.openness = check_open(decl.map, tube, density, config.open_margin);
      cert.scope = "openness and relatedness verified on the tube " + box_string(tube) +
                   " (local submersion criterion, not global openness)";
    } else {
      led.tube_covers_hull = false;
    }
  }
  if (!led.tube) cert.scope = "no verification tube: trajectory hull not inside the source and map domains";

  cert.conclusion = conclude(led);

  if (config.corroborate && decl.target.domain().contains(cert.image)) {
    cert.target_check = check_stability(make_query(decl.target, cert.image));
    cert.target_agrees = (cert.target_check->overall == Verdict::certified) ==
                         (cert.conclusion.status == TransferStatus::transferred_stable);
  }
  return cert;
}

bool check_equilibria_preserved(const MorphismDecl& decl, const State& x_e, double tol) {
  if (!decl.source.domain().contains(x_e) || !decl.map.source_domain().contains(x_e))
    throw std::invalid_argument("check_equilibria_preserved: point outside the source or map domain");
  if (!is_equilibrium(decl.source, x_e, tol))
    throw std::invalid_argument("check_equilibria_preserved: point is not an equilibrium of the source");
  auto J = decl.map.jacobian_unchecked(x_e);
  auto fx = decl.map(x_e);
  if (!J || !fx || !decl.target.domain().contains(*fx)) return false;
  auto Y = decl.target(*fx);
  if (!Y) return false;
  Eigen::JacobiSVD<Matrix> svd(*J);
  const double norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return Y->cwiseAbs().maxCoeff() <= tol * (1.0 + norm);
}

VectorFieldSpec conjugate_field(const VectorFieldSpec& x, const SmoothMapSpec& f, const SmoothMapSpec& f_inverse,
                                DomainSpec target_domain, std::string name) {
  const std::size_t n = x.dimension();
  if (f.source_dimension() != n || f.target_dimension() != n || f_inverse.source_dimension() != n ||
      f_inverse.target_dimension() != n)
    throw std::invalid_argument("conjugate_field: f and its inverse must be maps R^n -> R^n");
  if (name.empty()) name = f.name() + "_*" + x.name();

  const auto& inv = f_inverse.components();
  std::vector<expr::Expr> comps;
  for (std::size_t i = 0; i < n; ++i) {
    expr::Expr yi = expr::Expr::constant(0.0, n);
    for (std::size_t j = 0; j < n; ++j)
      yi = yi + expr::substitute(f.partial(i, j), inv) * expr::substitute(x.components()[j], inv);
    comps.push_back(yi);
  }
  return VectorFieldSpec(std::move(name), std::move(comps), std::move(target_domain));
}

}  // namespace openstab
