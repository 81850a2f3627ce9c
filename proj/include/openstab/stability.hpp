#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "openstab/integrate.hpp"
#include "openstab/metric.hpp"
#include "openstab/system.hpp"

namespace openstab {

/// Sampled delta-epsilon search at a base point x0.
struct StabilityQuery {
  StabilityQuery(VectorFieldSpec system, State x0);

  VectorFieldSpec system;
  State x0;
  std::vector<double> eps_ladder{1.0, 0.1, 0.01};
  double delta_min = 1e-6;
  std::size_t probes = 32;  // K, probes per shell
  MetricSpec metric;
  IntegratorConfig integrator;
  SamplingPlan plan;
  double radius_cap = 1e6;
  /// Probe distances within eps * (1 + slack) count as inside the eps-ball.
  /// Absorbs rounding of the shell placement and integrator error.
  double acceptance_slack = 1e-6;
  std::uint64_t seed = 0x5eed;

  void validate() const;
};

enum class Verdict { certified, falsified, inconclusive };
std::string_view to_string(Verdict v);

struct ProbeRecord {
  std::size_t index = 0;
  State initial;
  double radius = 0.0;  // metric distance of the initial condition from x0
  TrajectoryDistance distance;
  std::optional<double> first_exceed_time;  // first time the distance passed eps
  Termination termination = Termination::reached_horizon;
};

struct DeltaLevel {
  double delta = 0.0;            // nominal ladder value
  double effective_delta = 0.0;  // after shrinking to fit the domain
  bool shrunk = false;
  std::size_t reprojected = 0;
  std::size_t evaluated = 0;
  std::size_t unresolved = 0;  // within eps but without a converged sup
  bool accepted = false;
  std::optional<ProbeRecord> witness;
};

struct EpsilonResult {
  double eps = 0.0;
  Verdict outcome = Verdict::inconclusive;
  bool skipped = false;  // not evaluated because an earlier eps already falsified
  std::optional<double> certified_delta;
  std::vector<double> probe_distances;  // at the certified level; all <= eps (with slack)
  std::optional<ProbeRecord> counterexample;
  std::vector<DeltaLevel> ladder;
};

struct StabilityVerdict {
  Verdict overall = Verdict::inconclusive;
  std::vector<EpsilonResult> entries;
  BoundednessReport base_boundedness;
  Termination base_termination = Termination::reached_horizon;
  double base_end_time = 0.0;
  std::string note;

  // settings recorded for replay
  std::string system_name;
  State x0;
  double delta_min = 0.0;
  std::size_t probes = 0;
  MetricSpec metric;
  double horizon = 0.0;
  double acceptance_slack = 0.0;
  std::uint64_t seed = 0;

  const EpsilonResult* entry(double eps) const;
};

StabilityVerdict check_stability(const StabilityQuery& query);

/// Runs one shell: K probes at metric radius `delta` (clipped to the domain)
/// against the base trajectory, stopping at the first probe farther than
/// eps. Exposed for replay and tests.
DeltaLevel probe_shell(const StabilityQuery& query, const Trajectory& base, double eps, double delta,
                       std::uint64_t shell_seed, std::vector<double>* distances = nullptr);

// ---------------------------------------------------------------------------
// Linear systems x' = A x.

struct LinearSystem {
  Matrix A;

  VectorFieldSpec to_field(std::string name = "linear") const;
};

enum class LinearClass { stable, unstable, marginal_stable, marginal_unstable };
std::string_view to_string(LinearClass c);

struct LinearOracleReport {
  LinearClass verdict = LinearClass::stable;
  std::vector<std::complex<double>> eigenvalues;
  double max_real_part = 0.0;
  /// sup over sampled t in [0, horizon] of the spectral norm of exp(A t).
  double flow_norm_sup = 0.0;
  double flow_horizon = 0.0;
};

/// Eigenvalue criterion. Throws std::runtime_error when the eigensolver fails.
LinearOracleReport linear_stability_oracle(const LinearSystem& sys, double horizon = 10.0,
                                           std::size_t time_samples = 201);

struct CrossValidationReport {
  LinearOracleReport oracle;
  std::optional<Verdict> expected;  // none for marginal-unstable
  std::vector<State> points;
  std::vector<Verdict> outcomes;
  std::size_t certified = 0;
  std::size_t falsified = 0;
  std::size_t inconclusive = 0;
  std::size_t agreements = 0;
  double horizon = 0.0;

  double agreement_rate() const;
};

struct CrossValidationOptions {
  std::vector<double> eps_ladder{1.0, 0.1, 0.01};
  double delta_min = 1e-6;
  std::size_t probes = 32;
  double point_box = 1.0;  // sample points uniformly in [-box, box]^n
  IntegratorConfig integrator;
  std::uint64_t seed = 7;
};

/// check_stability at `samples` random points compared against the oracle.
/// For unstable spectra the horizon is lengthened so that the slowest
/// unstable mode can amplify delta_min past the largest eps.
CrossValidationReport cross_validate(const LinearSystem& sys, std::size_t samples,
                                     const CrossValidationOptions& options = {});

}  // namespace openstab
