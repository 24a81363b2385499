#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include <bcm/error.hpp>
#include <bcm/runtime.hpp>

#include "bcmlab/commands.hpp"
#include "bcmlab/config.hpp"

int main(int argc, char** argv) {
  bcm::tune_allocator();

  CLI::App app{"bcmlab: boundary control experiments driven by a YAML config"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  app.allow_extras();

  std::string config_path;
  std::optional<std::string> out;
  int threads = 0;
  bool verbose = false;
  bool print_config = false;
  app.add_option("--config", config_path, "experiment config (YAML)")->required();
  app.add_option("--out", out, "output directory (overrides run.out)");
  app.add_option("--threads", threads, "worker threads for parallel loops")->check(CLI::NonNegativeNumber);
  app.add_flag("--verbose", verbose, "progress on stderr");
  app.add_flag("--print-config", print_config, "print the canonical form of the config before running");

  const std::vector<std::pair<const char*, const char*>> subs{
      {"forward", "forward solve and field dump"},
      {"lambda-norm", "||L1 - L2|| by power iteration for every potential against the reference"},
      {"blago-check", "adjoint and inner product identities over random data pairs"},
      {"control", "Tikhonov control path, L-curve knee and Gamma estimate"},
      {"cost", "cost of control table"},
      {"go-check", "geometric optics remainder decay and probe lower bound"},
      {"reconstruct", "potential reconstruction on K"},
      {"sweep", "stability sweep over potential pairs"},
      {"check", "invariant suite"},
  };
  for (auto [name, help] : subs) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bcmlab::exit_validation;
  }
  if (!app.remaining().empty() || app.get_subcommands().empty()) {
    std::string names;
    for (auto [name, help] : subs) names += std::string(names.empty() ? "" : ", ") + name;
    if (!app.remaining().empty())
      std::cerr << "unknown subcommand or argument '" << app.remaining().front() << "'; expected one of " << names << '\n';
    else
      std::cerr << "a subcommand is required: " << names << '\n';
    return bcmlab::exit_validation;
  }

  bcmlab::ExperimentConfig cfg;
  try {
    cfg = bcmlab::load_config(config_path);
  } catch (const bcm::Error& e) {
    std::cerr << e.what() << '\n';
    return bcmlab::exit_validation;
  }
  if (print_config) std::cout << bcmlab::emit_canonical(cfg);
  bcm::set_threads(threads);

  bcmlab::RunOptions opt;
  opt.out = out ? *out : cfg.out;
  opt.verbose = verbose;
  return bcmlab::run_command(app.get_subcommands().front()->get_name(), cfg, opt);
}
