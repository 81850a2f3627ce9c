#pragma once

#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "openstab/integrate.hpp"
#include "openstab/system.hpp"

namespace openstab {

/// How the sup over t is approximated on the common span [0, T].
struct SamplingPlan {
  std::size_t uniform_points = 1001;
  bool include_nodes = true;         // add both trajectories' step times
  std::size_t refine_points = 8;     // interior samples per refinement round
  std::size_t max_refinements = 40;
  double tail_fraction = 0.1;        // tail window is [(1 - f) T, T]
  double saturation_tolerance = 1e-3;
};

enum class DistanceStatus { converged, lower_bound_only, divergent };

std::string_view to_string(DistanceStatus s);

/// Estimate of sup_{t>=0} d(a(t), b(t)). An empty `value` is the infinity
/// marker; `observed_sup` always holds the largest finite sample seen.
struct TrajectoryDistance {
  std::optional<double> value;
  double observed_sup = 0.0;
  double achieved_at = 0.0;
  double common_horizon = 0.0;
  std::size_t refinements = 0;
  DistanceStatus status = DistanceStatus::converged;
  MetricSpec metric;

  bool infinite() const { return !value.has_value(); }
};

/// Throws std::invalid_argument for trajectories of different systems or
/// without a common span beyond t = 0.
TrajectoryDistance trajectory_distance(const Trajectory& a, const Trajectory& b, const MetricSpec& metric,
                                       const SamplingPlan& plan = {});

/// First sampled time at which d(a(t), b(t)) > level.
std::optional<double> first_exceedance(const Trajectory& a, const Trajectory& b, const MetricSpec& metric,
                                       double level, const SamplingPlan& plan = {});

struct BoundednessReport {
  bool bounded = false;
  double hull_radius = 0.0;           // sup |x(t)| over dense samples
  double evidence_horizon = 0.0;
  double radius_cap = 0.0;
  Termination termination = Termination::reached_horizon;
  std::vector<double> lower, upper;   // coordinate-wise excursion
};

/// Hull radius from samples at `samples_per_step` points per step (>= 10).
BoundednessReport is_bounded(const Trajectory& traj, double radius_cap, std::size_t samples_per_step = 10);

// Probe placement on metric spheres.

/// `count` unit directions in R^n: alternating +-1 for n = 1, equally spaced
/// angles with a random phase for n = 2, normalized Gaussians otherwise.
std::vector<State> shell_directions(std::size_t dimension, std::size_t count, std::mt19937_64& rng);

/// Point at metric distance `radius` from `center` along a unit direction;
/// nullopt when the metric cannot reach that far (bounded arctan range).
std::optional<State> shell_point(const MetricSpec& metric, const State& center, const State& direction,
                                 double radius);

/// Nested-ball comparison of two trajectory pseudo-metrics at a base point:
/// for each eps, halve delta' from eps until every probe trajectory within
/// delta' of the base in `ball_metric` is within eps in `target_metric`.
struct MetricEquivalenceOptions {
  std::size_t shells = 16;             // nested probe shells, radius halves each shell
  std::size_t probes_per_shell = 8;
  std::size_t max_bisection_steps = 8;
  std::uint64_t seed = 1;
  IntegratorConfig integrator;
  SamplingPlan plan;
};

struct MetricEquivalenceEntry {
  double eps = 0.0;
  std::optional<double> delta_prime;
  std::size_t bisection_steps = 0;
  std::size_t probes_inside = 0;
  double worst_target_distance = 0.0;  // among probes inside the accepted ball
};

struct MetricEquivalenceReport {
  MetricSpec ball_metric;
  MetricSpec target_metric;
  bool base_bounded = false;
  std::vector<MetricEquivalenceEntry> entries;
  bool passed = false;
};

MetricEquivalenceReport check_metric_equivalence(const VectorFieldSpec& system, const State& x0,
                                                 const MetricSpec& ball_metric, const MetricSpec& target_metric,
                                                 std::span<const double> eps_values,
                                                 const MetricEquivalenceOptions& options = {});

}  // namespace openstab
