#include "openstab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace openstab {

namespace {

struct Profile {
  double best = -1.0;
  double best_t = 0.0;
  double head = 0.0;
  double tail = 0.0;
};

class DistanceSampler {
 public:
  DistanceSampler(const Trajectory& a, const Trajectory& b, const MetricSpec& metric, double T, double tail_start)
      : a_(a), b_(b), metric_(metric), tail_start_(tail_start), T_(T) {}

  double at(double t, Profile& p) const {
    const double d = metric_distance(metric_, a_.sample(t), b_.sample(t));
    if (d > p.best) {
      p.best = d;
      p.best_t = t;
    }
    if (t >= tail_start_)
      p.tail = std::max(p.tail, d);
    else
      p.head = std::max(p.head, d);
    return d;
  }

  double horizon() const { return T_; }

 private:
  const Trajectory& a_;
  const Trajectory& b_;
  const MetricSpec& metric_;
  double tail_start_;
  double T_;
};

std::vector<double> base_grid(const Trajectory& a, const Trajectory& b, double T, const SamplingPlan& plan) {
  std::vector<double> ts;
  const std::size_t n = std::max<std::size_t>(2, plan.uniform_points);
  ts.reserve(n + (plan.include_nodes ? a.times().size() + b.times().size() : 0));
  for (std::size_t i = 0; i < n; ++i) ts.push_back(T * static_cast<double>(i) / static_cast<double>(n - 1));
  ts.back() = T;
  if (plan.include_nodes) {
    for (const auto* tr : {&a, &b})
      for (double t : tr->times())
        if (t <= T) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

double common_span(const Trajectory& a, const Trajectory& b) {
  if (a.system_name() != b.system_name())
    throw std::invalid_argument("trajectory_distance: trajectories of different systems ('" + a.system_name() +
                                "' vs '" + b.system_name() + "')");
  if (a.dimension() != b.dimension()) throw std::invalid_argument("trajectory_distance: dimension mismatch");
  const double T = std::min(a.end_time(), b.end_time());
  if (!(T > 0.0)) throw std::invalid_argument("trajectory_distance: no common time span");
  return T;
}

}  // namespace

std::string_view to_string(DistanceStatus s) {
  switch (s) {
    case DistanceStatus::converged: return "converged";
    case DistanceStatus::lower_bound_only: return "lower-bound-only";
    case DistanceStatus::divergent: return "divergent";
  }
  return "?";
}

TrajectoryDistance trajectory_distance(const Trajectory& a, const Trajectory& b, const MetricSpec& metric,
                                       const SamplingPlan& plan) {
  const double T = common_span(a, b);
  const double tail_start = (1.0 - plan.tail_fraction) * T;
  DistanceSampler sampler(a, b, metric, T, tail_start);
  Profile p;

  const std::vector<double> grid = base_grid(a, b, T, plan);
  std::size_t imax = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double before = p.best;
    sampler.at(grid[i], p);
    if (p.best > before) imax = i;
  }

  // Local refinement around the running maximum.
  double lo = grid[imax == 0 ? 0 : imax - 1];
  double hi = grid[std::min(imax + 1, grid.size() - 1)];
  std::size_t rounds = 0;
  const double width_floor = 1e-10 * std::max(1.0, T);
  std::vector<double> local;
  while (rounds < plan.max_refinements && hi - lo > width_floor) {
    local.clear();
    local.push_back(lo);
    const std::size_t m = std::max<std::size_t>(2, plan.refine_points);
    for (std::size_t k = 1; k <= m; ++k)
      local.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(m + 1));
    local.push_back(hi);
    for (std::size_t k = 1; k <= m; ++k) sampler.at(local[k], p);
    local.push_back(p.best_t);
    std::sort(local.begin(), local.end());
    local.erase(std::unique(local.begin(), local.end()), local.end());
    const auto at = std::find(local.begin(), local.end(), p.best_t);
    const auto idx = static_cast<std::size_t>(std::distance(local.begin(), at));
    if (idx == local.size()) break;  // running max lies outside the bracket
    lo = local[idx == 0 ? 0 : idx - 1];
    hi = local[std::min(idx + 1, local.size() - 1)];
    ++rounds;
  }

  TrajectoryDistance out;
  out.metric = metric;
  out.observed_sup = p.best;
  out.achieved_at = p.best_t;
  out.common_horizon = T;
  out.refinements = rounds;

  if (a.termination() == Termination::blow_up || b.termination() == Termination::blow_up) {
    out.status = DistanceStatus::divergent;
    return out;
  }
  out.value = p.best;
  out.status = p.tail <= p.head * (1.0 + plan.saturation_tolerance) ? DistanceStatus::converged
                                                                     : DistanceStatus::lower_bound_only;
  return out;
}

std::optional<double> first_exceedance(const Trajectory& a, const Trajectory& b, const MetricSpec& metric,
                                       double level, const SamplingPlan& plan) {
  const double T = common_span(a, b);
  for (double t : base_grid(a, b, T, plan))
    if (metric_distance(metric, a.sample(t), b.sample(t)) > level) return t;
  return std::nullopt;
}

BoundednessReport is_bounded(const Trajectory& traj, double radius_cap, std::size_t samples_per_step) {
  BoundednessReport r;
  r.radius_cap = radius_cap;
  r.evidence_horizon = traj.end_time();
  r.termination = traj.termination();
  const auto n = traj.dimension();
  r.lower.assign(n, kInf);
  r.upper.assign(n, -kInf);
  for (double t : traj.refined_times(std::max<std::size_t>(10, samples_per_step))) {
    const State s = traj.sample(t);
    r.hull_radius = std::max(r.hull_radius, s.norm());
    for (std::size_t i = 0; i < n; ++i) {
      r.lower[i] = std::min(r.lower[i], s[static_cast<Eigen::Index>(i)]);
      r.upper[i] = std::max(r.upper[i], s[static_cast<Eigen::Index>(i)]);
    }
  }
  r.bounded = traj.termination() == Termination::reached_horizon && r.hull_radius <= radius_cap;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<State> shell_directions(std::size_t dimension, std::size_t count, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(dimension);
  std::vector<State> dirs;
  dirs.reserve(count);
  if (dimension == 1) {
    for (std::size_t k = 0; k < count; ++k) dirs.push_back(State::Constant(1, k % 2 == 0 ? 1.0 : -1.0));
    return dirs;
  }
  if (dimension == 2) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double p0 = phase(rng);
    for (std::size_t k = 0; k < count; ++k) {
      const double th = p0 + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
      State d(2);
      d << std::cos(th), std::sin(th);
      dirs.push_back(d);
    }
    return dirs;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    State d(n);
    do {
      for (Eigen::Index i = 0; i < n; ++i) d[i] = gauss(rng);
    } while (d.norm() < 1e-12);
    dirs.push_back(d / d.norm());
  }
  return dirs;
}

std::optional<State> shell_point(const MetricSpec& metric, const State& center, const State& direction,
                                 double radius) {
  switch (metric.kind) {
    case MetricKind::euclidean: return State(center + radius * direction);
    case MetricKind::weighted_euclidean: {
      State p = center;
      for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] += radius * direction[i] / std::sqrt(metric.weights.at(static_cast<std::size_t>(i)));
      return p;
    }
    case MetricKind::arctan_compressed: {
      State p = center;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double angle = std::atan(center[i]) + radius * direction[i];
        if (std::abs(angle) >= std::numbers::pi / 2) return std::nullopt;
        p[i] = std::tan(angle);
      }
      return p;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

MetricEquivalenceReport check_metric_equivalence(const VectorFieldSpec& system, const State& x0,
                                                 const MetricSpec& ball_metric, const MetricSpec& target_metric,
                                                 std::span<const double> eps_values,
                                                 const MetricEquivalenceOptions& options) {
  MetricEquivalenceReport report;
  report.ball_metric = ball_metric;
  report.target_metric = target_metric;

  const Trajectory base = integrate(system, x0, options.integrator);
  report.base_bounded = is_bounded(base, options.integrator.blowup_norm).bounded;

  double eps_max = 0.0;
  for (double e : eps_values) eps_max = std::max(eps_max, e);

  struct Probe {
    TrajectoryDistance ball, target;
  };
  std::vector<Probe> probes;
  std::mt19937_64 rng(options.seed);
  for (std::size_t s = 0; s < options.shells; ++s) {
    const double r = 2.0 * eps_max * std::pow(0.5, static_cast<double>(s));
    for (const State& dir : shell_directions(system.dimension(), options.probes_per_shell, rng)) {
      auto p = shell_point(ball_metric, x0, dir, r);
      if (!p || !system.domain().contains(*p)) continue;
      const Trajectory tr = integrate(system, *p, options.integrator);
      probes.push_back({trajectory_distance(base, tr, ball_metric, options.plan),
                        trajectory_distance(base, tr, target_metric, options.plan)});
    }
  }

  report.passed = report.base_bounded;
  for (double eps : eps_values) {
    MetricEquivalenceEntry entry;
    entry.eps = eps;
    for (std::size_t step = 0; step <= options.max_bisection_steps; ++step) {
      const double delta = eps * std::pow(0.5, static_cast<double>(step));
      std::size_t inside = 0;
      double worst = 0.0;
      bool ok = true;
      for (const auto& p : probes) {
        if (p.ball.status != DistanceStatus::converged || !(*p.ball.value < delta)) continue;
        ++inside;
        if (p.target.status != DistanceStatus::converged || !(*p.target.value < eps)) {
          ok = false;
          break;
        }
        worst = std::max(worst, *p.target.value);
      }
      if (ok && inside > 0) {
        entry.delta_prime = delta;
        entry.bisection_steps = step;
        entry.probes_inside = inside;
        entry.worst_target_distance = worst;
        break;
      }
    }
    report.passed = report.passed && entry.delta_prime.has_value();
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace openstab
