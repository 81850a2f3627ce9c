// openstab: run stability analyses described in a JSON project file.
//
//   openstab <simulate|distance|stability|morphism|transfer|sweep|run> --config FILE
//            [--out DIR] [--seed N] [--parallel]
//   openstab validate-config --config FILE
//
// Exit codes: 0 all selected analyses completed, 2 an analysis crashed,
// 64 usage error, 65 invalid configuration.
// OPENSTAB_LOG_LEVEL selects the stderr log level (trace..critical, off).

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "openstab/config.hpp"

namespace {

constexpr int kExitCrash = 2;
constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool parallel = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("openstab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("OPENSTAB_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));
}

int execute(const std::string& command, const Flags& flags, const CLI::App& sub) {
  std::ifstream in(flags.config, std::ios::binary);
  if (!in) {
    spdlog::error("{}: cannot open config file", flags.config);
    return kExitConfig;
  }
  std::ostringstream bytes;
  bytes << in.rdbuf();

  openstab::ProjectConfig config;
  try {
    config = openstab::parse_config(bytes.str(), flags.config);
  } catch (const openstab::ConfigError& e) {
    spdlog::error("invalid config: {}", e.what());
    return kExitConfig;
  }

  if (command == "validate-config") {
    std::cout << "config ok: " << config.systems.size() << " system(s), " << config.maps.size() << " map(s), "
              << config.morphisms.size() << " morphism(s), " << config.analyses.size() << " analysis(es)\n";
    return 0;
  }

  openstab::RunOptions options;
  options.parallel = flags.parallel;
  if (!flags.out.empty()) options.out_dir = flags.out;
  if (sub.count("--seed")) options.seed = flags.seed;
  if (command != "run") options.only = openstab::analysis_kind(command);

  const auto report = openstab::run(config, options, openstab::sha256_hex(bytes.str()));
  if (report.outcomes.empty()) spdlog::warn("no '{}' analyses in {}", command, flags.config);
  for (const auto& o : report.outcomes) {
    for (const auto& w : o.warnings) spdlog::warn("{}: {}", o.name, w);
    if (o.completed) {
      spdlog::debug("{} finished in {:.3f} s", o.name, o.wall_seconds);
      std::cout << o.name << ": " << o.result << "\n";
    } else {
      spdlog::error("{} failed: {}", o.name, o.error);
      std::cout << o.name << ": FAILED\n";
    }
  }
  return report.all_completed() ? 0 : kExitCrash;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Numerical stability analysis and stability transfer along morphisms of ODE systems"};
  app.set_version_flag("--version", std::string(openstab::tool_version()));
  app.require_subcommand(1);

  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "integrate trajectories and write CSV"},
      {"distance", "estimate the trajectory distance between two solutions"},
      {"stability", "sampled delta-epsilon stability check"},
      {"morphism", "check relatedness and openness of declared morphisms"},
      {"transfer", "transfer stability along a morphism and write a certificate"},
      {"sweep", "write trajectory CSVs for a grid of initial conditions"},
      {"run", "run every analysis in the config"},
      {"validate-config", "parse and cross-check the config only"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "project file (JSON)")->required();
    if (name != "validate-config") {
      sub->add_option("--out", flags.out, "output directory (overrides the config)");
      sub->add_option("--seed", flags.seed, "seed for every stochastic analysis");
      sub->add_flag("--parallel", flags.parallel, "run independent analyses concurrently");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    for (const auto* sub : app.get_subcommands()) return execute(sub->get_name(), flags, *sub);
  } catch (const std::exception& e) {
    spdlog::critical("{}", e.what());
    return kExitCrash;
  }
  return kExitUsage;
}
