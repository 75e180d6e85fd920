// metasurf: response-surface and literature-synthesis meta-analysis CLI.
//
//   metasurf analyze  --config analyze.json [--out dir] [--plots]
//   metasurf simulate [--config sim.json] [--seed S] [--out dir] [--plots]
//   metasurf sweep    [--config sweep.json] [--seed S] [--threads N] [--out dir] [--plots]
//   metasurf fixtures [--seed S] [--out dir]
//
// Exit status is 0 iff no operation errored.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "metasurf/io/commands.hpp"

namespace {

using namespace metasurf;
using namespace metasurf::io;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool plots = false;
  std::optional<unsigned> threads;
  bool json_errors = false;
};

void report_error(const Flags& f, const std::exception& e) {
  if (!f.json_errors) {
    std::cerr << "metasurf: " << e.what() << '\n';
    return;
  }
  nlohmann::ordered_json j;
  j["error"]["message"] = e.what();
  if (const auto* me = dynamic_cast<const Error*>(&e)) j["error"]["code"] = to_string(me->code());
  else j["error"]["code"] = "Internal";
  if (const auto* le = dynamic_cast<const LocatedError*>(&e)) {
    j["error"]["line"] = le->line();
    j["error"]["column"] = le->column();
  }
  std::cerr << j.dump() << '\n';
}

unsigned resolve_threads(const Flags& f, unsigned from_config) {
  if (f.threads) return *f.threads;
  if (const char* env = std::getenv("METASURF_THREADS")) {
    char* end = nullptr;
    const auto v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw Error(ErrorCode::ConfigError, std::string("METASURF_THREADS is not a positive integer: '") + env + "'");
  }
  return from_config;
}

RunConfig config_for(const Flags& f, Mode mode) {
  RunConfig c;
  if (!f.config.empty()) {
    c = load_config(f.config);
    if (c.mode != mode)
      throw Error(ErrorCode::ConfigError, std::string("config mode '") + to_string(c.mode) + "' does not match subcommand '" +
                                              to_string(mode) + "'");
  } else if (mode == Mode::Analyze) {
    throw Error(ErrorCode::ConfigError, "analyze needs --config");
  } else {
    c.mode = mode;
  }
  if (f.out) c.output = *f.out;
  if (f.plots) c.plots = true;
  if (f.seed) {
    c.simulate.master_seed = *f.seed;
    c.sweep.spec.master_seed = *f.seed;
  }
  return c;
}

int run(const std::string& cmd, const Flags& f) {
  if (cmd == "analyze") {
    const auto c = config_for(f, Mode::Analyze);
    const auto r = cmd_analyze(c.analyze, c.output, c.plots);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "wrote " << (fs::path(c.output) / "report.json").string() << '\n';
  } else if (cmd == "simulate") {
    const auto c = config_for(f, Mode::Simulate);
    const auto r = cmd_simulate(c.simulate, c.output, c.plots);
    for (const auto& o : r.comparison.outcomes) {
      if (o.ok())
        std::cout << o.label << ' ' << *o.estimate << " (" << o.ci->lower << ", " << o.ci->upper << ")\n";
      else
        std::cout << o.label << " failed: " << o.failure->message << '\n';
    }
  } else if (cmd == "sweep") {
    const auto c = config_for(f, Mode::Sweep);
    const auto g = cmd_sweep(c.sweep, c.output, c.plots, resolve_threads(f, c.sweep.threads));
    std::cout << "wrote " << g.cells.size() << " cells to " << (fs::path(c.output) / "sweep.csv").string() << '\n';
  } else if (cmd == "fixtures") {
    for (const auto& p : cmd_fixtures(f.out.value_or("fixtures"), f.seed.value_or(1)))
      std::cout << "wrote " << p.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Response-surface meta-analysis"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "master seed (overrides config)");
  app.add_option("--out", f.out, "output directory");
  app.add_flag("--plots", f.plots, "emit SVG plots");
  app.add_option("--threads", f.threads, "sweep worker threads (env METASURF_THREADS)")->check(CLI::PositiveNumber);
  app.add_flag("--json-errors", f.json_errors, "print errors as JSON on stderr");

  std::string cmd;
  for (const char* name : {"analyze", "simulate", "sweep", "fixtures"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&cmd, name] { cmd = name; });
  }
  static const char* descriptions[] = {"analyze a study table", "simulate one table and compare methods",
                                       "run the factorial Monte-Carlo sweep", "write bundled fixture tables"};
  for (std::size_t i = 0; i < app.get_subcommands({}).size(); ++i)
    app.get_subcommands({})[i]->description(descriptions[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return run(cmd, f);
  } catch (const std::exception& e) {
    report_error(f, e);
    return 1;
  }
}
