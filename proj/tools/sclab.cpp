#include <iostream>

#include "CLI11.hpp"
#include "sclab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Observability and control lab for the Schrodinger equation on closed surfaces"};
  app.require_subcommand(1);
  sclab::cli::Options opt;
  std::string config, out;
  std::uint64_t seed = 0;
  const std::pair<const char*, const char*> subcommands[] = {
      {"mesh", "build and export the surface mesh"},
      {"spectrum", "compute the Laplace eigenbasis and Weyl report"},
      {"gramian", "assemble observability Gramians and constants"},
      {"control", "synthesize and verify a HUM null control"},
      {"sweep", "windowed and wave constants over k / h grids"},
      {"check", "run the invariant suite"}};
  for (const auto& [name, help] : subcommands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "experiment root directory");
    sub->add_option("--seed", seed, "seed override (hum.seed)");
    sub->add_flag("--force", opt.force, "overwrite existing outputs");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
    sub->callback([&opt, name = std::string(name)] { opt.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sclab::cli::ConfigFailure;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--config")) opt.config = config;
    if (sub->count("--out")) opt.out = out;
    if (sub->count("--seed")) opt.seed = seed;
  }
  return sclab::cli::run(opt, std::cout, std::cerr);
}
