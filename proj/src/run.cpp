#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "openstab/config.hpp"
#include "openstab/parallel.hpp"

namespace openstab {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 0x5eed;

State state_from(const Json& j) {
  State x(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) x[static_cast<Eigen::Index>(i)] = parse_number(j[i]);
  return x;
}

std::vector<double> eps_from(const Json& a, std::vector<double> fallback) {
  if (!a.contains("eps")) return fallback;
  const Json& e = a.at("eps");
  if (e.is_number()) return {e.get<double>()};
  return e.get<std::vector<double>>();
}

template <class T>
T get_or(const Json& a, const char* key, T fallback) {
  return a.contains(key) ? a.at(key).get<T>() : fallback;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::vector<State> sweep_points(const Json& a, std::size_t dim) {
  std::vector<State> pts;
  if (a.contains("points")) {
    for (const auto& p : a.at("points")) {
      if (p.size() != dim) throw std::invalid_argument("sweep point has the wrong dimension");
      pts.push_back(state_from(p));
    }
  } else if (a.contains("grid")) {
    const Json& g = a.at("grid");
    const State lo = state_from(g.at("lower")), hi = state_from(g.at("upper"));
    const auto density = g.at("density").get<std::size_t>();
    if (static_cast<std::size_t>(lo.size()) != dim || static_cast<std::size_t>(hi.size()) != dim)
      throw std::invalid_argument("sweep grid bounds have the wrong dimension");
    if (density == 0) return pts;
    std::vector<Interval> box;
    for (std::size_t i = 0; i < dim; ++i)
      box.push_back({lo[static_cast<Eigen::Index>(i)], hi[static_cast<Eigen::Index>(i)]});
    pts = grid_points(DomainSpec(box), density);
  } else {
    throw std::invalid_argument("sweep needs \"points\" or \"grid\"");
  }
  return pts;
}

struct Context {
  const ProjectConfig& config;
  const RunOptions& options;
  fs::path out;
};

std::uint64_t seed_for(const Context& ctx, const Json& a) {
  if (ctx.options.seed) return *ctx.options.seed;
  if (a.contains("seed")) return a.at("seed").get<std::uint64_t>();
  return ctx.config.seed.value_or(kDefaultSeed);
}

void write_artifact(const Context& ctx, AnalysisOutcome& o, const std::string& rel, const std::string& content) {
  atomic_write(ctx.out / rel, content);
  o.artifacts.push_back(rel);
}

void run_one(const Context& ctx, const AnalysisDef& def, AnalysisOutcome& o) {
  const Json& a = def.params;
  const ProjectConfig& cfg = ctx.config;

  switch (def.kind) {
    case AnalysisKind::simulate: {
      const auto& sys = cfg.system(a.at("system").get<std::string>());
      std::vector<State> ics;
      if (a.contains("x0")) ics.push_back(state_from(a.at("x0")));
      if (a.contains("initial_conditions"))
        for (const auto& p : a.at("initial_conditions")) ics.push_back(state_from(p));
      if (ics.empty()) throw std::invalid_argument("simulate needs \"x0\" or \"initial_conditions\"");
      const auto trajs = integrate_batch(sys, ics, cfg.integrator_for(a));
      Json summary = Json::array();
      for (std::size_t k = 0; k < trajs.size(); ++k) {
        const std::string csv = def.name + (trajs.size() > 1 ? "_" + std::to_string(k) : "") + ".csv";
        write_artifact(ctx, o, csv, to_csv(trajs[k]));
        Json s = summary_json(trajs[k]);
        s["csv"] = csv;
        summary.push_back(s);
      }
      write_artifact(ctx, o, def.name + ".json", dump({{"analysis", def.name}, {"trajectories", summary}}));
      o.result = std::string(to_string(trajs.front().termination()));
      break;
    }
    case AnalysisKind::distance: {
      const auto& sys = cfg.system(a.at("system").get<std::string>());
      const auto ic = cfg.integrator_for(a);
      const Trajectory ta = integrate(sys, state_from(a.at("x0")), ic);
      const Trajectory tb = integrate(sys, state_from(a.at("y0")), ic);
      const auto d = trajectory_distance(ta, tb, metric_from_json(a.value("metric", Json(nullptr))));
      write_artifact(ctx, o, def.name + ".json", dump({{"analysis", def.name}, {"distance", to_json(d)}}));
      o.result = std::string(to_string(d.status));
      break;
    }
    case AnalysisKind::stability: {
      StabilityQuery q(cfg.system(a.at("system").get<std::string>()), state_from(a.at("x0")));
      q.eps_ladder = eps_from(a, q.eps_ladder);
      q.delta_min = get_or(a, "delta_min", q.delta_min);
      q.probes = get_or(a, "probes", q.probes);
      q.radius_cap = get_or(a, "radius_cap", q.radius_cap);
      q.metric = metric_from_json(a.value("metric", Json(nullptr)));
      q.integrator = cfg.integrator_for(a);
      q.seed = seed_for(ctx, a);
      o.seed = q.seed;
      const auto v = check_stability(q);
      write_artifact(ctx, o, def.name + ".json", dump({{"analysis", def.name}, {"verdict", to_json(v)}}));
      o.result = std::string(to_string(v.overall));
      break;
    }
    case AnalysisKind::morphism: {
      const MorphismDecl decl = cfg.morphism(a.at("morphism").get<std::string>());
      const DomainSpec region = domain_from_json(a.at("region"), decl.source.dimension());
      const auto grid = get_or<std::size_t>(a, "grid", 41);
      o.seed = seed_for(ctx, a);
      const auto rel = check_related(decl, region, grid, get_or(a, "tol", 1e-8), *o.seed);
      const auto open = check_open(decl.map, region, grid, get_or(a, "margin", 1e-6));
      Json j{{"analysis", def.name},
             {"morphism", a.at("morphism")},
             {"region", to_json(region)},
             {"relatedness", to_json(rel)},
             {"openness", to_json(open)}};
      if (a.contains("modulus_eps")) {
        ModulusOptions mo;
        mo.seed = *o.seed;
        const auto field = estimate_modulus(decl.map, a.at("modulus_eps").get<double>(), region,
                                            get_or<std::size_t>(a, "modulus_grid", 11), mo);
        j["modulus"] = to_json(field);
        o.warnings.insert(o.warnings.end(), field.warnings.begin(), field.warnings.end());
      }
      write_artifact(ctx, o, def.name + ".json", dump(j));
      o.warnings.insert(o.warnings.end(), rel.warnings.begin(), rel.warnings.end());
      o.result = std::string(rel.passed ? "related" : "not-related") + ", " + std::string(to_string(open.verdict));
      break;
    }
    case AnalysisKind::transfer: {
      const MorphismDecl decl = cfg.morphism(a.at("morphism").get<std::string>());
      TransferConfig tc;
      tc.eps_ladder = eps_from(a, tc.eps_ladder);
      tc.delta_min = get_or(a, "delta_min", tc.delta_min);
      tc.probes = get_or(a, "probes", tc.probes);
      tc.metric = metric_from_json(a.value("metric", Json(nullptr)));
      tc.integrator = cfg.integrator_for(a, tc.integrator);
      tc.seed = seed_for(ctx, a);
      tc.relatedness_tol = get_or(a, "tol", tc.relatedness_tol);
      tc.grid_density = get_or(a, "grid", tc.grid_density);
      tc.open_margin = get_or(a, "margin", tc.open_margin);
      tc.corroborate = get_or(a, "corroborate", tc.corroborate);
      o.seed = tc.seed;
      const auto cert = transfer(decl, state_from(a.at("x0")), tc, a.at("morphism").get<std::string>());
      write_artifact(ctx, o, def.name + ".json", dump(to_json(cert)));
      o.result = std::string(to_string(cert.conclusion.status));
      if (cert.target_agrees && !*cert.target_agrees)
        o.warnings.push_back("direct check on the target disagrees with the transferred conclusion");
      break;
    }
    case AnalysisKind::sweep: {
      const auto& sys = cfg.system(a.at("system").get<std::string>());
      const auto pts = sweep_points(a, sys.dimension());
      const auto bundle = emit_sweep_plot_data(sys, pts, cfg.integrator_for(a), ctx.out / def.name);
      for (const auto& f : bundle.files) o.artifacts.push_back(fs::relative(f, ctx.out).generic_string());
      o.artifacts.push_back(fs::relative(bundle.index, ctx.out).generic_string());
      o.warnings.insert(o.warnings.end(), bundle.warnings.begin(), bundle.warnings.end());
      o.result = std::to_string(bundle.files.size()) + " trajectories";
      break;
    }
  }
  o.completed = true;
}

}  // namespace

bool RunReport::all_completed() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.completed; });
}

Json RunReport::to_json() const {
  Json analyses = Json::array();
  for (const auto& o : outcomes) {
    analyses.push_back({{"name", o.name},
                        {"kind", openstab::to_string(o.kind)},
                        {"status", o.completed ? "completed" : "failed"},
                        {"result", o.result},
                        {"seed", o.seed ? Json(*o.seed) : Json(nullptr)},
                        {"artifacts", o.artifacts},
                        {"warnings", o.warnings},
                        {"error", o.error}});
  }
  return {{"tool_version", tool_version},
          {"config_hash", config_hash},
          {"analyses", analyses},
          {"completed", all_completed()}};
}

Json RunReport::metadata_json() const {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  Json wall = Json::object();
  double total = 0.0;
  for (const auto& o : outcomes) {
    wall[o.name] = o.wall_seconds;
    total += o.wall_seconds;
  }
  return {{"finished_at", ts.str()}, {"wall_seconds", wall}, {"total_wall_seconds", total}};
}

RunReport run(const ProjectConfig& config, const RunOptions& options, const std::string& config_hash) {
  RunReport report;
  report.tool_version = tool_version();
  report.config_hash = config_hash;
  const Context ctx{config, options, options.out_dir.value_or(fs::path(config.output))};
  fs::create_directories(ctx.out);

  std::vector<const AnalysisDef*> selected;
  for (const auto& a : config.analyses)
    if (!options.only || a.kind == *options.only) selected.push_back(&a);
  report.outcomes.resize(selected.size());

  auto body = [&](std::size_t k) {
    AnalysisOutcome& o = report.outcomes[k];
    o.name = selected[k]->name;
    o.kind = selected[k]->kind;
    const auto start = std::chrono::steady_clock::now();
    try {
      run_one(ctx, *selected[k], o);
    } catch (const std::exception& e) {
      o.completed = false;
      o.error = e.what();
    }
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  if (options.parallel) {
    parallel_for(0, selected.size(), body);
  } else {
    for (std::size_t k = 0; k < selected.size(); ++k) body(k);
  }

  atomic_write(ctx.out / "report.json", report.to_json().dump(2) + "\n");
  atomic_write(ctx.out / "metadata.json", report.metadata_json().dump(2) + "\n");
  return report;
}

SweepBundle emit_sweep_plot_data(const VectorFieldSpec& system, const std::vector<State>& initial_conditions,
                                 const IntegratorConfig& config, const fs::path& dir) {
  SweepBundle b;
  fs::create_directories(dir);
  b.index = dir / "index.csv";
  std::ostringstream index;
  index << "file";
  for (std::size_t i = 1; i <= system.dimension(); ++i) index << ",x" << i;
  index << ",termination,end_time\n";
  if (initial_conditions.empty()) b.warnings.push_back("empty grid of initial conditions; index is empty");

  const auto trajs = integrate_batch(system, initial_conditions, config);
  const int width = static_cast<int>(std::to_string(trajs.size()).size());
  char buf[64];
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    std::ostringstream name;
    name << "traj_" << std::setw(width) << std::setfill('0') << k << ".csv";
    const fs::path file = dir / name.str();
    atomic_write(file, to_csv(trajs[k]));
    b.files.push_back(file);
    index << name.str();
    for (Eigen::Index i = 0; i < trajs[k].initial_condition().size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", trajs[k].initial_condition()[i]);
      index << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", trajs[k].end_time());
    index << ',' << to_string(trajs[k].termination()) << ',' << buf << '\n';
  }
  atomic_write(b.index, index.str());
  return b;
}

}  // namespace openstab
