#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "regen/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Regenerative jump-semigroup experiments"};
  app.require_subcommand(1);

  regen::CommandOptions opts;
  const char* commands[][2] = {
      {"validate", "check the drift condition and driver moments"},
      {"semigroup-check", "residuals of the semigroup axioms and extinction law"},
      {"kappa-fit", "fit the extinction rate from decay curves"},
      {"slln", "cycle-ratio estimate vs long-run time average"},
      {"clt", "replicate CLT statistics and KS tests"},
      {"anscombe", "random-index CLT over renewal counts"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", opts.config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory")->required();
    sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--force", opts.force, "run even if the drift condition fails");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : regen::kExitParse;
  }
  return regen::run_command(app.get_subcommands().front()->get_name(), opts, std::cerr);
}
