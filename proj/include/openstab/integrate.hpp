#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openstab/system.hpp"

namespace openstab {

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-12;
  std::optional<double> initial_step;  // automatic when unset
  std::optional<double> max_step;      // horizon when unset
  double horizon = 100.0;
  double blowup_norm = 1e8;
  double domain_margin = 1e-12;

  void validate() const;
  friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

enum class Termination { reached_horizon, blow_up, domain_exit, step_underflow };

std::string_view to_string(Termination t);

/// Sampled solution phi_{X,x0} on [0, end_time()] with dense output.
///
/// Integrated trajectories carry the Dormand-Prince quartic continuous
/// extension per step. Pushforward trajectories carry the source trajectory
/// and the map, and sample as f(source(t)).
class Trajectory {
 public:
  struct Pushforward {
    std::shared_ptr<const Trajectory> source;
    std::shared_ptr<const SmoothMapSpec> map;
  };

  Trajectory(std::string system_name, std::vector<double> times, std::vector<State> states,
             std::vector<double> dense, Termination termination);
  Trajectory(std::string system_name, std::vector<double> times, std::vector<State> states, Pushforward origin,
             Termination termination);

  const std::string& system_name() const { return system_name_; }
  std::size_t dimension() const { return static_cast<std::size_t>(states_.front().size()); }
  const State& initial_condition() const { return states_.front(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<State>& states() const { return states_; }
  std::size_t step_count() const { return times_.size() - 1; }
  double end_time() const { return times_.back(); }
  Termination termination() const { return termination_; }
  bool is_pushforward() const { return origin_.has_value(); }

  /// Dense-output value; stored nodes are returned exactly. Throws
  /// std::out_of_range outside [0, end_time()].
  State sample(double t) const;

  /// Node times plus `per_step - 1` equally spaced interior points per step.
  std::vector<double> refined_times(std::size_t per_step) const;

 private:
  std::string system_name_;
  std::vector<double> times_;
  std::vector<State> states_;
  std::vector<double> dense_;  // 4*n coefficients per step
  std::optional<Pushforward> origin_;
  Termination termination_;
};

/// Embedded Runge-Kutta 5(4) (Dormand-Prince) with PI step control. Throws
/// std::invalid_argument when x0 is not strictly inside the domain.
Trajectory integrate(const VectorFieldSpec& system, const State& x0, const IntegratorConfig& config = {});

std::vector<Trajectory> integrate_batch(const VectorFieldSpec& system, const std::vector<State>& initial,
                                        const IntegratorConfig& config = {});

State sample(const Trajectory& traj, double t);

/// max-norm of X(x) <= tol. A faulting field is not at equilibrium.
bool is_equilibrium(const VectorFieldSpec& system, const State& x, double tol);

/// Header "t,x1,...,xn", one row per stored node, 17 significant digits, LF.
void write_csv(const Trajectory& traj, std::ostream& out);
std::string to_csv(const Trajectory& traj);

}  // namespace openstab
