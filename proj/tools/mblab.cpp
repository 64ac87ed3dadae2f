// mblab: run family tables, concentration curves, lower bounds and
// Track-and-Stop batches from a JSON config.
//
//   mblab <mode> --config PATH [--seed N] [--reps N] [--out DIR] [--trace]
//
// Exit status: 0 success, 2 invalid config or arguments, 3 runtime failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mblab/error.hpp"
#include "mblab/experiment.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Best-arm identification for Markovian bandits"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int reps = 0;
  bool trace = false;

  for (const char* name : {"family", "concentration", "lower-bound", "run"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--reps", reps, "override the replication count")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_flag("--trace", trace, "write per-step trace.csv (run mode)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    mblab::ExperimentConfig config = mblab::load_config(config_path);
    const mblab::Mode requested = mblab::parse_mode(sub->get_name());
    if (config.mode != requested) {
      std::fprintf(stderr, "mblab: note: config mode '%s' overridden by subcommand '%s'\n",
                   std::string(mblab::to_string(config.mode)).c_str(), sub->get_name().c_str());
      config.mode = requested;
    }
    if (sub->count("--seed")) config.seed = seed;
    if (sub->count("--reps")) config.replications = reps;
    if (config.alpha > 2.0) {
      std::fprintf(stderr, "mblab: warning: alpha = %g is unusually large; the threshold grows as t^alpha\n",
                   config.alpha);
    }
    mblab::execute(config, out_dir, trace);
    std::printf("wrote %s\n", out_dir.c_str());
    return 0;
  } catch (const mblab::Error& e) {
    const bool invalid = e.code() == mblab::ErrorCode::kValidation ||
                         e.code() == mblab::ErrorCode::kParse;
    std::fprintf(stderr, "mblab: %s: %s\n", std::string(mblab::to_string(e.code())).c_str(), e.what());
    return invalid ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mblab: %s\n", e.what());
    return kExitRuntime;
  }
}
