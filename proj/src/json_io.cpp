#include "openstab/json_io.hpp"

#include <cmath>
#include <stdexcept>

namespace openstab {

const char* tool_version() { return OPENSTAB_VERSION; }

Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v == 0.0 ? 0.0 : v;  // drop the sign of -0
}

namespace {

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

Json points_json(const std::vector<State>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(to_json(p));
  return a;
}

}  // namespace

Json to_json(const State& x) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(number(x[i]));
  return a;
}

Json to_json(const DomainSpec& d) {
  Json a = Json::array();
  for (const auto& iv : d.bounds()) a.push_back({number(iv.lower), number(iv.upper)});
  return a;
}

Json to_json(const MetricSpec& m) {
  Json j{{"kind", m.label()}};
  if (m.kind == MetricKind::weighted_euclidean) j["weights"] = numbers(m.weights);
  return j;
}

Json to_json(const IntegratorConfig& c) {
  return {{"rtol", c.rtol},
          {"atol", c.atol},
          {"initial_step", optional_number(c.initial_step)},
          {"max_step", optional_number(c.max_step)},
          {"horizon", number(c.horizon)},
          {"blowup_norm", number(c.blowup_norm)},
          {"domain_margin", c.domain_margin},
          {"method", "dormand-prince-5(4)"}};
}

Json to_json(const SamplingPlan& p) {
  return {{"uniform_points", p.uniform_points},   {"include_nodes", p.include_nodes},
          {"refine_points", p.refine_points},     {"max_refinements", p.max_refinements},
          {"tail_fraction", p.tail_fraction},     {"saturation_tolerance", p.saturation_tolerance}};
}

Json to_json(const TrajectoryDistance& d) {
  return {{"value", d.value ? number(*d.value) : Json("infinite")},
          {"observed_sup", number(d.observed_sup)},
          {"achieved_at", number(d.achieved_at)},
          {"common_horizon", number(d.common_horizon)},
          {"refinements", d.refinements},
          {"status", to_string(d.status)},
          {"metric", to_json(d.metric)}};
}

Json to_json(const BoundednessReport& b) {
  return {{"bounded", b.bounded},
          {"hull_radius", number(b.hull_radius)},
          {"evidence_horizon", number(b.evidence_horizon)},
          {"radius_cap", number(b.radius_cap)},
          {"termination", to_string(b.termination)},
          {"lower", numbers(b.lower)},
          {"upper", numbers(b.upper)}};
}

Json to_json(const ProbeRecord& p) {
  return {{"index", p.index},
          {"initial", to_json(p.initial)},
          {"radius", number(p.radius)},
          {"distance", to_json(p.distance)},
          {"first_exceed_time", optional_number(p.first_exceed_time)},
          {"termination", to_string(p.termination)}};
}

Json to_json(const StabilityVerdict& v) {
  Json entries = Json::array();
  for (const auto& e : v.entries) {
    Json ladder = Json::array();
    for (const auto& l : e.ladder)
      ladder.push_back({{"delta", number(l.delta)},
                        {"effective_delta", number(l.effective_delta)},
                        {"shrunk", l.shrunk},
                        {"reprojected", l.reprojected},
                        {"evaluated", l.evaluated},
                        {"unresolved", l.unresolved},
                        {"accepted", l.accepted},
                        {"witness", l.witness.has_value()}});
    entries.push_back({{"eps", number(e.eps)},
                       {"outcome", e.skipped ? "skipped" : to_string(e.outcome)},
                       {"certified_delta", optional_number(e.certified_delta)},
                       {"max_probe_distance", e.probe_distances.empty()
                                                  ? Json(nullptr)
                                                  : number(*std::max_element(e.probe_distances.begin(),
                                                                             e.probe_distances.end()))},
                       {"counterexample", e.counterexample ? to_json(*e.counterexample) : Json(nullptr)},
                       {"ladder", ladder}});
  }
  return {{"system", v.system_name},
          {"x0", to_json(v.x0)},
          {"verdict", to_string(v.overall)},
          {"note", v.note},
          {"entries", entries},
          {"base",
           {{"termination", to_string(v.base_termination)},
            {"end_time", number(v.base_end_time)},
            {"boundedness", to_json(v.base_boundedness)}}},
          {"settings",
           {{"delta_min", number(v.delta_min)},
            {"probes", v.probes},
            {"metric", to_json(v.metric)},
            {"horizon", number(v.horizon)},
            {"acceptance_slack", v.acceptance_slack},
            {"seed", v.seed}}}};
}

Json to_json(const RelatednessReport& r) {
  Json faults = Json::array();
  for (const auto& f : r.faults) faults.push_back({{"index", f.index}, {"fault", f.fault.describe()}});
  return {{"grid_points", r.points.size()},
          {"max_residual", number(r.max_residual)},
          {"worst_point", r.points.empty() ? Json(nullptr) : to_json(r.points[r.worst_index])},
          {"tolerance", number(r.tolerance)},
          {"passed", r.passed},
          {"faults", faults},
          {"outside_target", r.outside_target},
          {"finite_difference", {{"points", points_json(r.fd_points)},
                                 {"max_relative_discrepancy", number(r.fd_max_discrepancy)},
                                 {"agrees", r.fd_agrees}}},
          {"warnings", r.warnings}};
}

Json to_json(const OpennessReport& r) {
  Json degenerate = Json::array();
  for (auto k : r.degenerate) degenerate.push_back(to_json(r.points[k]));
  return {{"grid_points", r.points.size()},
          {"min_singular_value", number(r.min_sigma)},
          {"margin", number(r.margin)},
          {"verdict", to_string(r.verdict)},
          {"degenerate_points", degenerate},
          {"reason", r.reason}};
}

Json to_json(const ModulusField& m) {
  return {{"eps", number(m.eps())},
          {"region", to_json(m.region())},
          {"grid_density", m.grid_density()},
          {"interpolation", "multilinear"},
          {"points", points_json(m.points())},
          {"delta", numbers(m.values())},
          {"degenerate", m.degenerate},
          {"warnings", m.warnings}};
}

Json to_json(const TransferCertificate& c) {
  const auto& l = c.ledger;
  const auto& cfg = c.config;
  return {{"tool_version", tool_version()},
          {"morphism", c.morphism_name},
          {"map", c.map_name},
          {"source_system", c.source_system},
          {"target_system", c.target_system},
          {"x0", to_json(c.x0)},
          {"image", to_json(c.image)},
          {"conclusion", {{"status", to_string(c.conclusion.status)}, {"reason", c.conclusion.reason}}},
          {"scope", c.scope},
          {"hypotheses",
           {{"source_stability", to_json(l.source)},
            {"boundedness", to_json(l.boundedness)},
            {"tube", l.tube ? to_json(*l.tube) : Json(nullptr)},
            {"tube_inflation", number(l.tube_inflation)},
            {"tube_covers_hull", l.tube_covers_hull},
            {"relatedness", to_json(l.relatedness)},
            {"openness", to_json(l.openness)}}},
          {"target_check", c.target_check ? to_json(*c.target_check) : Json(nullptr)},
          {"target_agrees", c.target_agrees ? Json(*c.target_agrees) : Json(nullptr)},
          {"config",
           {{"eps_ladder", numbers(cfg.eps_ladder)},
            {"delta_min", number(cfg.delta_min)},
            {"probes", cfg.probes},
            {"metric", to_json(cfg.metric)},
            {"integrator", to_json(cfg.integrator)},
            {"sampling", to_json(cfg.plan)},
            {"radius_cap", number(cfg.radius_cap)},
            {"seed", cfg.seed},
            {"relatedness_tol", number(cfg.relatedness_tol)},
            {"grid_density", cfg.grid_density},
            {"max_grid_points", cfg.max_grid_points},
            {"open_margin", number(cfg.open_margin)},
            {"openness_criterion", "submersion (full-rank Jacobian) on the tube"},
            {"tube_rule", "trajectory hull inflated by the largest certified delta, clipped to the domains"}}}};
}

Json to_json(const LinearOracleReport& r) {
  Json eig = Json::array();
  for (const auto& z : r.eigenvalues) eig.push_back({number(z.real()), number(z.imag())});
  return {{"verdict", to_string(r.verdict)},
          {"eigenvalues", eig},
          {"max_real_part", number(r.max_real_part)},
          {"flow_norm_sup", number(r.flow_norm_sup)},
          {"flow_horizon", number(r.flow_horizon)}};
}

Json to_json(const CrossValidationReport& r) {
  Json outcomes = Json::array();
  for (std::size_t k = 0; k < r.outcomes.size(); ++k)
    outcomes.push_back({{"x0", to_json(r.points[k])}, {"verdict", to_string(r.outcomes[k])}});
  return {{"oracle", to_json(r.oracle)},
          {"expected", r.expected ? Json(to_string(*r.expected)) : Json(nullptr)},
          {"outcomes", outcomes},
          {"agreements", r.agreements},
          {"horizon", number(r.horizon)}};
}

Json to_json(const MetricEquivalenceReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"eps", number(e.eps)},
                       {"delta_prime", optional_number(e.delta_prime)},
                       {"bisection_steps", e.bisection_steps},
                       {"probes_inside", e.probes_inside},
                       {"worst_target_distance", number(e.worst_target_distance)}});
  return {{"ball_metric", to_json(r.ball_metric)},
          {"target_metric", to_json(r.target_metric)},
          {"base_bounded", r.base_bounded},
          {"entries", entries},
          {"passed", r.passed}};
}

Json summary_json(const Trajectory& t) {
  return {{"system", t.system_name()},
          {"initial_condition", to_json(t.initial_condition())},
          {"steps", t.step_count()},
          {"end_time", number(t.end_time())},
          {"final_state", to_json(t.states().back())},
          {"termination", to_string(t.termination())},
          {"pushforward", t.is_pushforward()}};
}

double parse_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw std::invalid_argument("expected a number or \"inf\"/\"-inf\", got " + j.dump());
}

DomainSpec domain_from_json(const Json& j, std::size_t dimension) {
  if (j.is_null()) return DomainSpec::whole(dimension);
  if (!j.is_array() || j.size() != dimension)
    throw std::invalid_argument("domain must list one [lo, hi] pair per coordinate (" + std::to_string(dimension) +
                                ")");
  std::vector<Interval> b;
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2) throw std::invalid_argument("domain entries must be [lo, hi] pairs");
    b.push_back({parse_number(iv[0]), parse_number(iv[1])});
  }
  return DomainSpec(std::move(b));
}

MetricSpec metric_from_json(const Json& j) {
  if (j.is_null()) return MetricSpec::euclidean();
  const std::string kind = j.is_string() ? j.get<std::string>() : j.value("kind", std::string("euclidean"));
  if (kind == "euclidean") return MetricSpec::euclidean();
  if (kind == "arctan" || kind == "arctan_compressed" || kind == "arctan-compressed") return MetricSpec::arctan();
  if (kind == "weighted" || kind == "weighted_euclidean" || kind == "weighted-euclidean") {
    if (!j.is_object() || !j.contains("weights")) throw std::invalid_argument("weighted metric needs \"weights\"");
    return MetricSpec::weighted(j.at("weights").get<std::vector<double>>());
  }
  throw std::invalid_argument("unknown metric kind '" + kind + "'");
}

}  // namespace openstab
