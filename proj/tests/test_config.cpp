#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "openstab/config.hpp"

using namespace openstab;
namespace fs = std::filesystem;

namespace {

const char* kExample = R"cfg({
  "systems": [
    {"name": "decay", "dim": 1, "components": ["-x"], "domain": [[0, "inf"]]},
    {"name": "cubic", "dim": 1, "components": ["-x^3"]},
    {"name": "grow", "dim": 1, "components": ["x"]},
    {"name": "drift", "dim": 1, "components": ["1"]},
    {"name": "oscillator", "dim": 2, "components": ["y", "-x"]}
  ],
  "maps": [
    {"name": "f", "source": "decay", "components": ["1/sqrt(log(1/x^2)+1)"], "domain": [[0, 1.6487212707]]}
  ],
  "morphisms": [{"name": "example1", "map": "f", "source": "decay", "target": "cubic"}],
  "integrator": {"rtol": 1e-9},
  "seed": 7,
  "analyses": [
    {"kind": "transfer", "name": "ex1_transfer", "morphism": "example1", "x0": [1]},
    {"kind": "morphism", "name": "ex1_check", "morphism": "example1", "region": [[0.5, 1.5]]},
    {"kind": "stability", "name": "grow_at_0", "system": "grow", "x0": [0], "eps": [1]},
    {"kind": "simulate", "name": "decay_sim", "system": "decay", "x0": [1], "horizon": 10},
    {"kind": "distance", "name": "osc_dist", "system": "oscillator", "x0": [1, 0], "y0": [1.1, 0]},
    {"kind": "sweep", "name": "line", "system": "drift", "points": [[-1], [0], [1]], "horizon": 5},
    {"kind": "sweep", "name": "osc_sweep", "system": "oscillator",
     "grid": {"lower": [-1, -1], "upper": [1, 1], "density": 8}, "horizon": 7}
  ]
})cfg";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("openstab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ConfigErrorKind error_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.kind();
  }
  FAIL("expected a config error");
  return ConfigErrorKind::io;
}

const AnalysisOutcome& outcome(const RunReport& r, const std::string& name) {
  for (const auto& o : r.outcomes)
    if (o.name == name) return o;
  throw std::out_of_range(name);
}

}  // namespace

TEST_CASE("the example project parses and resolves") {
  const ProjectConfig c = parse_config(kExample);
  CHECK(c.systems.size() == 5);
  CHECK(c.analyses.size() == 7);
  CHECK(c.seed == 7u);
  CHECK(c.system("oscillator").dimension() == 2);
  CHECK(c.morphism("example1").source.name() == "decay");
  CHECK(c.integrator_for(Json{{"horizon", 3.0}}).horizon == 3.0);
  CHECK(c.integrator_for(Json::object()).rtol == 1e-9);
  CHECK_THROWS(c.system("missing"));
}

TEST_CASE("configuration errors are classified") {
  CHECK(error_kind(R"({"systems": [{"name": "a", "dim": 1, "components": ["-x"]}], "analyses": []})") ==
        ConfigErrorKind::invalid);
  CHECK(error_kind(R"({"systems": [{"name": "a", "dim": 1, "components": ["-x"]}],
                       "analyses": [{"kind": "simulate", "system": "b", "x0": [1]}]})") ==
        ConfigErrorKind::dangling_reference);
  CHECK(error_kind(R"({"systems": [{"name": "a", "dim": 2, "components": ["-x"]}],
                       "analyses": [{"kind": "simulate", "system": "a", "x0": [1, 1]}]})") ==
        ConfigErrorKind::dimension_mismatch);
  CHECK(error_kind(R"({"systems": [{"name": "a", "dim": 1, "components": ["-x"]}],
                       "analyses": [{"kind": "simulate", "system": "a", "x0": [1, 1]}]})") ==
        ConfigErrorKind::dimension_mismatch);
  CHECK(error_kind(R"({"systems": [{"name": "a", "dim": 1, "components": ["-x"]}],
                       "analyses": [{"kind": "dance", "system": "a"}]})") == ConfigErrorKind::invalid);
  CHECK(error_kind(R"({"systems": [], "analyses": [], "colour": 1})") == ConfigErrorKind::invalid);
  CHECK(error_kind(R"({"systems": [{"name": "a", "dim": 1, "components": ["-x +"]}],
                       "analyses": [{"kind": "simulate", "system": "a", "x0": [1]}]})") ==
        ConfigErrorKind::invalid);
  try {
    parse_config("{\n  \"systems\": [\n    {\"name\": \"a\",,}\n  ]\n}");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(e.kind() == ConfigErrorKind::parse);
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/openstab.json"), ConfigError);
}

TEST_CASE("serialize and parse round trip") {
  const ProjectConfig c = parse_config(kExample);
  const ProjectConfig back = parse_config(serialize_config(c).dump(2));
  CHECK(back.same_as(c));
  CHECK(serialize_config(back) == serialize_config(c));
  ProjectConfig other = parse_config(kExample);
  other.output = "elsewhere";
  CHECK_FALSE(other.same_as(c));
}

TEST_CASE("SHA-256 of known inputs") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("runs are reproducible and write their artifacts") {
  const ProjectConfig c = parse_config(kExample);
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  RunOptions oa, ob;
  oa.out_dir = a;
  ob.out_dir = b;
  const RunReport ra = run(c, oa, sha256_hex(kExample));
  const RunReport rb = run(c, ob, sha256_hex(kExample));
  CHECK(ra.all_completed());
  for (const auto* f : {"report.json", "ex1_transfer.json", "ex1_check.json", "grow_at_0.json", "osc_dist.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  CHECK(fs::exists(a / "metadata.json"));

  CHECK(outcome(ra, "ex1_transfer").result == "transferred-stable");
  CHECK(outcome(ra, "grow_at_0").result == "falsified");
  CHECK(outcome(ra, "osc_dist").result == "converged");

  const Json verdict = Json::parse(slurp(a / "grow_at_0.json"));
  CHECK(verdict.at("verdict").at("verdict") == "falsified");

  // straight-line sweep: one file per initial condition, y = x0 + t
  const auto& line = outcome(ra, "line");
  CHECK(line.result == "3 trajectories");
  for (int k = 0; k < 3; ++k) {
    std::ifstream in(a / "line" / ("traj_" + std::to_string(k) + ".csv"));
    REQUIRE(in);
    std::string row;
    std::getline(in, row);
    CHECK(row == "t,x1");
    while (std::getline(in, row)) {
      const auto comma = row.find(',');
      const double t = std::stod(row.substr(0, comma)), x = std::stod(row.substr(comma + 1));
      CHECK(x == doctest::Approx(t + (k - 1)).epsilon(1e-12));
    }
  }
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(a / "osc_sweep"))
    if (e.path().filename().string().rfind("traj_", 0) == 0) ++csvs;
  CHECK(csvs == 64);
  std::ifstream index(a / "osc_sweep" / "index.csv");
  std::string header;
  std::getline(index, header);
  CHECK(header == "file,x1,x2,termination,end_time");
}

TEST_CASE("an empty sweep grid warns and writes only the index") {
  const fs::path dir = scratch("empty_sweep");
  const VectorFieldSpec drift("drift", std::vector<std::string>{"1"}, DomainSpec::whole(1));
  const auto bundle = emit_sweep_plot_data(drift, {}, {}, dir);
  CHECK(bundle.files.empty());
  CHECK_FALSE(bundle.warnings.empty());
  CHECK(fs::exists(bundle.index));
}

TEST_CASE("the seed override reaches every stochastic analysis") {
  const ProjectConfig c = parse_config(kExample);
  RunOptions o;
  o.out_dir = scratch("seeded");
  o.seed = 99;
  o.only = AnalysisKind::stability;
  const RunReport r = run(c, o);
  REQUIRE(r.outcomes.size() == 1);
  CHECK(r.outcomes[0].seed == 99u);
}

#ifdef OPENSTAB_CLI
namespace {
int cli(const std::string& args) {
  const std::string cmd = std::string(OPENSTAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "good.json") << kExample;
    std::ofstream(dir / "bad.json") << R"({"systems": [], "analyses": []})";
  }
  CHECK(cli("--help") == 0);
  CHECK(cli("frobnicate") == 64);
  CHECK(cli("run") == 64);
  CHECK(cli("validate-config --config " + (dir / "bad.json").string()) == 65);
  CHECK(cli("validate-config --config " + (dir / "missing.json").string()) == 65);
  CHECK(cli("validate-config --config " + (dir / "good.json").string()) == 0);
  CHECK(cli("stability --config " + (dir / "good.json").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "grow_at_0.json"));
  CHECK(cli("run --config " + (dir / "good.json").string() + " --out " + (dir / "all").string()) == 0);
  CHECK(fs::exists(dir / "all" / "report.json"));
}
#endif
