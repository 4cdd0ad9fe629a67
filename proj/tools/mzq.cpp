#include <CLI11.hpp>
#include <iostream>
#include <utility>

#include "mzq/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mzq: Mach-Zehnder qubit spectroscopy toolkit"};
  app.require_subcommand(1);

  mzq::cli::RunOptions opt;
  std::uint64_t seed = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "sweep one circuit and write a trace"},
      {"synth", "synthesize noisy traces over a flux range"},
      {"fit-spectrum", "fit traces, write per-trace fits and rates.csv"},
      {"fit-rates", "fit gamma1 and dephasing models to rates.csv"},
      {"classify", "report the lineshape regime of a trace"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed") > 0) opt.seed = seed;
  return mzq::cli::run(sub->get_name(), opt, std::cout, std::cerr);
}
