#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sppb/config.hpp"
#include "sppb/errors.hpp"
#include "sppb/parallel.hpp"
#include "sppb/pipeline.hpp"
#include "sppb/sppb_score.hpp"

namespace {

struct SubcommandDef {
  const char* name;
  const char* description;
};

constexpr SubcommandDef kSubcommands[] = {
    {"synth", "Generate a synthetic cohort extract"},
    {"build", "Assemble the supervised future-score dataset"},
    {"train", "Cross-validate and fit the configured model"},
    {"sweep", "Grid-search the configured model family"},
    {"explain", "Compute per-feature attributions and the importance ranking"},
    {"simplify", "Retrain on the top-ranked feature subsets"},
    {"replicate", "Run the full pipeline: data, sweeps, training, attributions"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Future physical performance score prediction toolkit"};
  app.require_subcommand(1);
  // pure introspection, exits before any pipeline work
  app.add_flag_callback(
      "--show-cutoffs",
      [] {
        std::cout << sppb::describe(sppb::CutoffTable{});
        throw CLI::Success{};
      },
      "Print the compiled-in scoring cutoff table and exit");

  std::string config_path;
  int threads = 1;
  bool verbose = false;
  for (const SubcommandDef& def : kSubcommands) {
    CLI::App* sub = app.add_subcommand(def.name, def.description);
    sub->add_option("--config,-c", config_path, "Run configuration file (JSON)")
        ->required();
    sub->add_option("--threads", threads,
                    "Worker thread cap; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--verbose,-v", verbose, "Log pipeline stages to stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    sppb::set_max_threads(threads);
    const sppb::RunConfig config = sppb::load_run_config(config_path);
    sppb::run_subcommand(app.get_subcommands().front()->get_name(), config,
                         verbose);
    return 0;
  } catch (const sppb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sppb::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const sppb::FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
