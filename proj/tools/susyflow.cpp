#include <iostream>

#include "CLI11.hpp"

#include "susyflow/app.hpp"

using namespace susyflow;

int main(int argc, char** argv) {
  CLI::App app{"Topological-supersymmetry analysis of stochastic flows and torus maps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  RunOptions ro;
  std::uint64_t seed = 0;
  std::string level = "fast";
  std::string mutate;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ro.config_path, "experiment config (YAML)")->required();
    sub->add_option("--out", ro.out_dir, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "random seed (overrides config)");
    sub->add_option("--threads", ro.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(Experiment&, std::ostream&);
  };
  const Cmd cmds[] = {{"spectrum", "sector spectra, BF links and operator statistics", cmd_spectrum},
                      {"classify", "chaos classification report", cmd_classify},
                      {"witten", "Witten index and partition function", cmd_witten},
                      {"simulate", "SDE ensemble, histogram and trajectory", cmd_simulate},
                      {"orbits", "periodic-point counts of a torus map", cmd_orbits}};
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs.push_back(sub);
  }
  CLI::App* check = app.add_subcommand("check", "invariant suites");
  check->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  check->add_option("--config", ro.config_path, "ignored; accepted for a uniform interface");
  check->add_option("--out", ro.out_dir, "ignored");
  check->add_option("--seed", seed, "ignored");
  check->add_option("--threads", ro.threads, "ignored");
  check->add_option("--mutate", mutate, "test hook: flip one sign term, op:mask:axis with op in {d, iota}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ExitConfig;
  }

  if (check->parsed()) {
    return run_guarded([&] { return cmd_check(level == "full" ? CheckLevel::Full : CheckLevel::Fast, parse_mutation(mutate), std::cout); },
                       std::cerr);
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    if (subs[i]->count("--seed")) ro.seed = seed;
    return run_guarded(
        [&] {
          Experiment ex(load_config(ro.config_path), ro);
          return cmds[i].fn(ex, std::cout);
        },
        std::cerr);
  }
  return ExitConfig;
}
