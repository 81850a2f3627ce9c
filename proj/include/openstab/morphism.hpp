#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openstab/integrate.hpp"
#include "openstab/metric.hpp"
#include "openstab/stability.hpp"
#include "openstab/system.hpp"

namespace openstab {

/// Tensor grid over a closed box: `density` points per axis including both
/// ends (the midpoint when density is 1). Row-major, first axis slowest.
std::vector<State> grid_points(const DomainSpec& region, std::size_t density);

struct PointFault {
  std::size_t index = 0;
  DomainFault fault;
};

struct RelatednessReport {
  std::vector<State> points;
  std::vector<std::optional<double>> residuals;  // empty where the point faulted
  std::vector<PointFault> faults;
  std::size_t outside_target = 0;  // grid points with f(x) outside the target domain
  double max_residual = 0.0;
  std::size_t worst_index = 0;
  double tolerance = 0.0;
  bool passed = false;

  // finite-difference cross-check of the symbolic Jacobian
  std::vector<State> fd_points;
  double fd_max_discrepancy = 0.0;
  bool fd_agrees = true;

  std::vector<std::string> warnings;
};

/// Residual max_i |(Jf(x) X(x) - Y(f(x)))_i| over a grid on `region`.
/// Throws std::invalid_argument when `region` is not a closed box inside
/// both the source domain and the map's domain.
RelatednessReport check_related(const MorphismDecl& decl, const DomainSpec& region, std::size_t grid_density,
                                double tol, std::uint64_t seed = 11);

enum class OpennessVerdict { submersion_on_region, degenerate_points };
std::string_view to_string(OpennessVerdict v);

struct OpennessReport {
  std::vector<State> points;
  std::vector<double> sigma_min;  // smallest singular value of Jf; 0 where the point faulted
  double min_sigma = 0.0;
  double margin = 0.0;
  OpennessVerdict verdict = OpennessVerdict::degenerate_points;
  std::vector<std::size_t> degenerate;  // grid indices below the margin
  std::string reason;

  bool submersion() const { return verdict == OpennessVerdict::submersion_on_region; }
};

/// Submersion test: m <= n and sigma_min(Jf) >= margin at every grid point.
OpennessReport check_open(const SmoothMapSpec& map, const DomainSpec& region, std::size_t grid_density,
                          double margin);

/// f o traj, sampled through the source's dense output. Nodes are the images
/// of the source nodes refined `per_step` times. A fault of f truncates the
/// result at the last good node with domain-exit status. Throws
/// std::invalid_argument when the initial state is outside the map's domain.
Trajectory pushforward(const std::shared_ptr<const Trajectory>& traj, const std::shared_ptr<const SmoothMapSpec>& map,
                       std::string target_system = {}, std::size_t per_step = 4);
Trajectory pushforward(const Trajectory& traj, const SmoothMapSpec& map, std::string target_system = {},
                       std::size_t per_step = 4);

struct ModulusOptions {
  std::size_t probes = 16;
  double safety = 0.1;      // images must stay within eps * (1 - safety)
  double shrink = 0.5;      // applied to every grid value
  double floor = 1e-12;
  std::size_t bisection_steps = 40;
  MetricSpec source_metric;
  MetricSpec target_metric;
  std::uint64_t seed = 3;
};

/// Positive continuous delta_eps(x) on a compact box: grid estimates joined
/// by multilinear interpolation.
class ModulusField {
 public:
  ModulusField(double eps, DomainSpec region, std::size_t grid_density, std::vector<double> values);

  double eps() const { return eps_; }
  const DomainSpec& region() const { return region_; }
  std::size_t grid_density() const { return density_; }
  const std::vector<State>& points() const { return points_; }
  const std::vector<double>& values() const { return values_; }

  /// Multilinear interpolation; throws std::out_of_range outside the region.
  double operator()(const State& x) const;

  std::vector<std::size_t> degenerate;  // grid indices that hit the floor
  std::vector<std::string> warnings;

 private:
  double eps_;
  DomainSpec region_;
  std::size_t density_;
  std::vector<State> points_;
  std::vector<double> values_;
};

ModulusField estimate_modulus(const SmoothMapSpec& map, double eps, const DomainSpec& region,
                              std::size_t grid_density, const ModulusOptions& options = {});

// ---------------------------------------------------------------------------
// Stability transfer along an open morphism.

struct TransferConfig {
  std::vector<double> eps_ladder{1.0, 0.1, 0.01};
  double delta_min = 1e-6;
  std::size_t probes = 32;
  MetricSpec metric;
  IntegratorConfig integrator = [] {
    IntegratorConfig c;
    c.horizon = 20.0;
    return c;
  }();
  SamplingPlan plan;
  double radius_cap = 1e6;
  std::uint64_t seed = 0x5eed;
  double relatedness_tol = 1e-8;
  std::size_t grid_density = 41;
  std::size_t max_grid_points = 20000;  // per-axis density is reduced to fit
  double open_margin = 1e-6;
  bool corroborate = true;  // direct check on the target at f(x0)
};

enum class TransferStatus { transferred_stable, not_transferable };
std::string_view to_string(TransferStatus s);

struct TransferLedger {
  StabilityVerdict source;
  BoundednessReport boundedness;
  std::optional<DomainSpec> tube;  // closed box checked for relatedness and openness
  double tube_inflation = 0.0;
  bool tube_covers_hull = false;
  RelatednessReport relatedness;
  OpennessReport openness;
};

struct TransferConclusion {
  TransferStatus status = TransferStatus::not_transferable;
  std::string reason;  // names the failing hypothesis
};

/// Decision rule over the recorded hypotheses; pure, so reports can be
/// mutated and re-judged.
TransferConclusion conclude(const TransferLedger& ledger);

struct TransferCertificate {
  std::string morphism_name;
  std::string source_system;
  std::string target_system;
  std::string map_name;
  State x0;
  State image;  // f(x0)
  TransferLedger ledger;
  TransferConclusion conclusion;
  std::optional<StabilityVerdict> target_check;
  std::optional<bool> target_agrees;
  TransferConfig config;
  std::string scope;  // region the openness claim covers
};

/// Throws std::invalid_argument when x0 is outside the source or map domain.
TransferCertificate transfer(const MorphismDecl& decl, const State& x0, const TransferConfig& config = {},
                             std::string morphism_name = {});

/// |Y(f(x_e))| <= tol * (1 + ||Jf(x_e)||_2). Throws std::invalid_argument
/// unless x_e is an equilibrium of the source inside both domains.
bool check_equilibria_preserved(const MorphismDecl& decl, const State& x_e, double tol);

/// Y = (Tf . X) o f^{-1}, built symbolically; X and Y are f-related by construction.
VectorFieldSpec conjugate_field(const VectorFieldSpec& x, const SmoothMapSpec& f, const SmoothMapSpec& f_inverse,
                                DomainSpec target_domain, std::string name = {});

}  // namespace openstab
