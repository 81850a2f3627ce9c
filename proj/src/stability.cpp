#include "openstab/stability.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "openstab/parallel.hpp"

namespace openstab {

namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

bool usable(const StabilityQuery& q, const std::optional<State>& p) {
  return p && q.system.domain().contains(*p) &&
         q.system.domain().distance_to_boundary(*p) > q.integrator.domain_margin;
}

// Largest radius along `dir` whose shell point stays inside the domain.
double max_radius(const StabilityQuery& q, const State& dir, double upper) {
  double lo = 0.0, hi = upper;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (usable(q, shell_point(q.metric, q.x0, dir, mid)))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

StabilityQuery::StabilityQuery(VectorFieldSpec sys, State x) : system(std::move(sys)), x0(std::move(x)) {}

void StabilityQuery::validate() const {
  if (eps_ladder.empty()) throw std::invalid_argument("eps ladder is empty");
  for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
    if (!(eps_ladder[i] > 0.0)) throw std::invalid_argument("eps ladder entries must be positive");
    if (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))
      throw std::invalid_argument("eps ladder must be strictly decreasing");
  }
  if (!(delta_min > 0.0)) throw std::invalid_argument("delta_min must be positive");
  if (probes < 8) throw std::invalid_argument("at least 8 probes per shell are required");
  if (static_cast<std::size_t>(x0.size()) != system.dimension())
    throw std::invalid_argument("base point dimension mismatch");
  if (!system.domain().contains(x0)) throw std::invalid_argument("base point outside the domain");
  if (metric.kind == MetricKind::weighted_euclidean && metric.weights.size() != system.dimension())
    throw std::invalid_argument("metric weight count does not match dimension");
  integrator.validate();
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::certified: return "certified";
    case Verdict::falsified: return "falsified";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

const EpsilonResult* StabilityVerdict::entry(double eps) const {
  for (const auto& e : entries)
    if (e.eps == eps) return &e;
  return nullptr;
}

DeltaLevel probe_shell(const StabilityQuery& q, const Trajectory& base, double eps, double delta,
                       std::uint64_t shell_seed, std::vector<double>* distances) {
  DeltaLevel level;
  level.delta = delta;
  level.effective_delta = delta;

  std::mt19937_64 rng(shell_seed);
  const std::vector<State> dirs = shell_directions(q.system.dimension(), q.probes, rng);

  std::vector<double> radii(dirs.size(), delta);
  std::size_t outside = 0;
  for (const auto& d : dirs)
    if (!usable(q, shell_point(q.metric, q.x0, d, delta))) ++outside;
  if (2 * outside > dirs.size()) {
    // most of the shell is outside: shrink the whole shell to fit
    double r = delta;
    for (const auto& d : dirs) r = std::min(r, 0.99 * max_radius(q, d, delta));
    std::fill(radii.begin(), radii.end(), r);
    level.shrunk = true;
    level.effective_delta = r;
  } else if (outside > 0) {
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      if (usable(q, shell_point(q.metric, q.x0, dirs[k], delta))) continue;
      radii[k] = 0.99 * max_radius(q, dirs[k], delta);
      ++level.reprojected;
    }
  }

  const double limit = eps * (1.0 + q.acceptance_slack);
  const std::size_t chunk = resolved_workers();
  std::vector<std::optional<ProbeRecord>> records(dirs.size());

  for (std::size_t start = 0; start < dirs.size(); start += chunk) {
    const std::size_t stop = std::min(dirs.size(), start + chunk);
    parallel_for(start, stop, [&](std::size_t k) {
      ProbeRecord rec;
      rec.index = k;
      auto p = shell_point(q.metric, q.x0, dirs[k], radii[k]);
      if (!usable(q, p)) return;  // radius collapsed to 0 on this ray
      rec.initial = *p;
      rec.radius = metric_distance(q.metric, q.x0, *p);
      const Trajectory tr = integrate(q.system, *p, q.integrator);
      rec.termination = tr.termination();
      rec.distance = trajectory_distance(base, tr, q.metric, q.plan);
      if (rec.distance.observed_sup > limit) rec.first_exceed_time = first_exceedance(base, tr, q.metric, eps, q.plan);
      records[k] = std::move(rec);
    });
    for (std::size_t k = start; k < stop; ++k) {
      if (!records[k]) continue;
      ++level.evaluated;
      const ProbeRecord& rec = *records[k];
      if (rec.distance.observed_sup > limit) {
        level.witness = rec;
        return level;
      }
      if (rec.distance.status != DistanceStatus::converged) ++level.unresolved;
      if (distances) distances->push_back(rec.distance.observed_sup);
    }
  }
  level.accepted = level.unresolved == 0 && level.evaluated > 0;
  return level;
}

StabilityVerdict check_stability(const StabilityQuery& q) {
  q.validate();
  StabilityVerdict v;
  v.system_name = q.system.name();
  v.x0 = q.x0;
  v.delta_min = q.delta_min;
  v.probes = q.probes;
  v.metric = q.metric;
  v.horizon = q.integrator.horizon;
  v.acceptance_slack = q.acceptance_slack;
  v.seed = q.seed;

  const Trajectory base = integrate(q.system, q.x0, q.integrator);
  v.base_termination = base.termination();
  v.base_end_time = base.end_time();
  v.base_boundedness = is_bounded(base, q.radius_cap);

  if (base.termination() == Termination::blow_up) {
    v.overall = Verdict::falsified;
    v.note = "base trajectory blew up at t=" + std::to_string(base.end_time());
    return v;
  }
  if (!(base.end_time() > 0.0)) {
    v.overall = Verdict::inconclusive;
    v.note = "base trajectory has no forward span";
    return v;
  }

  bool any_falsified = false;
  bool all_certified = true;
  for (std::size_t ei = 0; ei < q.eps_ladder.size(); ++ei) {
    EpsilonResult res;
    res.eps = q.eps_ladder[ei];
    if (any_falsified) {
      res.skipped = true;
      v.entries.push_back(std::move(res));
      continue;
    }

    std::vector<double> deltas;
    for (double d = res.eps; d >= q.delta_min || deltas.empty(); d *= 0.5) deltas.push_back(d);

    for (std::size_t li = 0; li < deltas.size(); ++li) {
      std::vector<double> dist;
      const std::uint64_t shell_seed = derived_rng(q.seed, ei, li)();
      DeltaLevel level = probe_shell(q, base, res.eps, deltas[li], shell_seed, &dist);
      const bool last = li + 1 == deltas.size();
      if (level.accepted) {
        res.outcome = Verdict::certified;
        res.certified_delta = level.effective_delta;
        res.probe_distances = std::move(dist);
      } else if (last) {
        res.outcome = level.witness ? Verdict::falsified : Verdict::inconclusive;
        res.counterexample = level.witness;
      }
      res.ladder.push_back(std::move(level));
      if (res.outcome == Verdict::certified || last) break;
    }

    any_falsified = any_falsified || res.outcome == Verdict::falsified;
    all_certified = all_certified && res.outcome == Verdict::certified;
    v.entries.push_back(std::move(res));
  }

  v.overall = any_falsified ? Verdict::falsified : all_certified ? Verdict::certified : Verdict::inconclusive;
  return v;
}

// ---------------------------------------------------------------------------

VectorFieldSpec LinearSystem::to_field(std::string name) const {
  if (A.rows() != A.cols() || A.rows() == 0) throw std::invalid_argument("linear system matrix must be square");
  const auto n = static_cast<std::size_t>(A.rows());
  std::vector<expr::Expr> comps;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    expr::Expr row = expr::Expr::constant(0.0, n);
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      row = row + expr::Expr::constant(A(i, j), n) * expr::Expr::variable(static_cast<std::size_t>(j), n);
    comps.push_back(row);
  }
  return VectorFieldSpec(std::move(name), std::move(comps), DomainSpec::whole(n));
}

std::string_view to_string(LinearClass c) {
  switch (c) {
    case LinearClass::stable: return "stable";
    case LinearClass::unstable: return "unstable";
    case LinearClass::marginal_stable: return "marginal-stable";
    case LinearClass::marginal_unstable: return "marginal-unstable";
  }
  return "?";
}

LinearOracleReport linear_stability_oracle(const LinearSystem& sys, double horizon, std::size_t time_samples) {
  const Matrix& A = sys.A;
  if (A.rows() != A.cols() || A.rows() == 0) throw std::invalid_argument("linear system matrix must be square");
  const auto n = A.rows();

  Eigen::EigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue solver failed");

  LinearOracleReport r;
  const Eigen::VectorXcd ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) r.eigenvalues.push_back(ev[i]);
  r.max_real_part = ev.real().maxCoeff();

  const double scale = std::max(1.0, A.norm());
  const double tol = 1e-9 * scale;
  if (r.max_real_part > tol) {
    r.verdict = LinearClass::unstable;
  } else if (r.max_real_part < -tol) {
    r.verdict = LinearClass::stable;
  } else {
    // eigenvalues on the imaginary axis must be semisimple
    bool semisimple = true;
    const Eigen::MatrixXcd Ac = A.cast<std::complex<double>>();
    for (Eigen::Index i = 0; i < n && semisimple; ++i) {
      if (std::abs(ev[i].real()) > tol) continue;
      Eigen::Index algebraic = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(ev[j] - ev[i]) <= 1e-6 * scale) ++algebraic;
      Eigen::FullPivLU<Eigen::MatrixXcd> lu(Ac - ev[i] * Eigen::MatrixXcd::Identity(n, n));
      lu.setThreshold(1e-8);
      const Eigen::Index geometric = n - lu.rank();
      semisimple = geometric == algebraic;
    }
    r.verdict = semisimple ? LinearClass::marginal_stable : LinearClass::marginal_unstable;
  }

  r.flow_horizon = horizon;
  const std::size_t m = std::max<std::size_t>(2, time_samples);
  for (std::size_t k = 0; k < m; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(m - 1);
    const Matrix flow = (A * t).exp();
    Eigen::JacobiSVD<Matrix> svd(flow);
    r.flow_norm_sup = std::max(r.flow_norm_sup, svd.singularValues()(0));
  }
  return r;
}

double CrossValidationReport::agreement_rate() const {
  if (outcomes.empty()) return 0.0;
  return static_cast<double>(agreements) / static_cast<double>(outcomes.size());
}

CrossValidationReport cross_validate(const LinearSystem& sys, std::size_t samples,
                                     const CrossValidationOptions& options) {
  CrossValidationReport rep;
  rep.oracle = linear_stability_oracle(sys);
  switch (rep.oracle.verdict) {
    case LinearClass::stable:
    case LinearClass::marginal_stable: rep.expected = Verdict::certified; break;
    case LinearClass::unstable: rep.expected = Verdict::falsified; break;
    case LinearClass::marginal_unstable: break;
  }

  IntegratorConfig cfg = options.integrator;
  if (rep.oracle.verdict == LinearClass::unstable) {
    const double eps_max = *std::max_element(options.eps_ladder.begin(), options.eps_ladder.end());
    const double growth = std::log(eps_max / options.delta_min) + std::log(1e3);
    cfg.horizon = std::max(cfg.horizon, growth / rep.oracle.max_real_part);
  }
  rep.horizon = cfg.horizon;

  const VectorFieldSpec field = sys.to_field();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> coord(-options.point_box, options.point_box);
  for (std::size_t s = 0; s < samples; ++s) {
    State p(sys.A.rows());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = coord(rng);
    StabilityQuery q(field, p);
    q.eps_ladder = options.eps_ladder;
    q.delta_min = options.delta_min;
    q.probes = options.probes;
    q.integrator = cfg;
    q.seed = options.seed + s + 1;
    const Verdict out = check_stability(q).overall;
    rep.points.push_back(p);
    rep.outcomes.push_back(out);
    if (out == Verdict::certified) ++rep.certified;
    if (out == Verdict::falsified) ++rep.falsified;
    if (out == Verdict::inconclusive) ++rep.inconclusive;
    if (rep.expected && out == *rep.expected) ++rep.agreements;
  }
  return rep;
}

}  // namespace openstab
