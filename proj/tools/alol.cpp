// Command-line front end: gen-data, simulate, probe-mrr, report.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alol/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Active-learning oracle lab"};
  app.require_subcommand(1);

  alol::cli::Options opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "experiment JSON file")->required();
    cmd->add_option("--out", opt.out, "output path")->required();
    cmd->add_flag("--force", opt.force, "overwrite existing outputs");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen);

  CLI::App* sim = app.add_subcommand("simulate", "run active-learning simulations");
  add_common(sim);
  sim->add_option("--jobs", opt.jobs, "worker threads (output-invariant)")->check(CLI::PositiveNumber);
  sim->add_flag("--log-oracle-scores", opt.log_oracle_scores,
                "also compute oracle scores for non-oracle policies");

  CLI::App* probe = app.add_subcommand("probe-mrr", "measure oracle ranking consistency across seeds");
  add_common(probe);
  probe->add_option("--jobs", opt.jobs, "worker threads (output-invariant)")->check(CLI::PositiveNumber);

  std::vector<std::string> curves;
  std::string baseline;
  CLI::App* report = app.add_subcommand("report", "relative improvement over a baseline curve");
  report->add_option("curves", curves, "policy curve CSVs")->required();
  report->add_option("--baseline", baseline, "baseline (random) curve CSV")->required();
  report->add_option("--out", opt.out, "output CSV")->required();
  report->add_flag("--force", opt.force, "overwrite existing output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : alol::cli::kSchema;
  }

  if (*gen) return alol::cli::cmd_gen_data(opt, std::cerr);
  if (*sim) return alol::cli::cmd_simulate(opt, std::cerr);
  if (*probe) return alol::cli::cmd_probe_mrr(opt, std::cerr);
  return alol::cli::cmd_report(curves, baseline, opt.out, opt.force, std::cerr);
}
