#include <CLI11.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Core>
#include <cstdlib>
#include <iostream>

#include "strandsim/scenario.hpp"

namespace {

int run_one(const std::string& command, const std::string& file, const std::string& out_dir,
            bool strict, unsigned seed) {
  try {
    const strand::Scenario sc = strand::Scenario::load(file, strict);
    for (const auto& w : sc.warnings()) std::cerr << "warning: " << w << "\n";
    std::string dir = out_dir;
    if (dir.empty()) dir = "out_" + sc.name() + "_" + command;
    const int code = strand::run_command(command, sc, dir, seed);
    if (code == 0)
      std::cout << sc.name() << ": ok (" << dir << ")\n";
    else
      std::cerr << sc.name() << ": solver failure (code " << code << ")\n";
    return code;
  } catch (const strand::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strandsim - statics, dynamics and control of hybrid rigid-soft rod robots"};
  app.require_subcommand(1);

  std::vector<std::string> files;
  std::string out_dir;
  bool strict = false;
  unsigned seed = 0;
  int jobs = 1;

  if (const char* env = std::getenv("STRANDSIM_THREADS")) Eigen::setNbThreads(std::atoi(env));

  const std::vector<std::string> commands = {"validate", "static", "dyn",
                                             "energy",   "control", "optimize"};
  std::string chosen;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd);
    sub->add_option("scenario", files, "scenario file(s)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (single scenario only)");
    sub->add_flag("--strict", strict, "reject unknown keys");
    sub->add_option("--seed", seed, "seed for randomized validation probes");
    sub->add_option("--jobs", jobs, "parallel scenario processes")->check(CLI::PositiveNumber);
    sub->callback([&chosen, cmd] { chosen = cmd; });
  }
  CLI11_PARSE(app, argc, argv);

  if (files.size() == 1) return run_one(chosen, files[0], out_dir, strict, seed);

  // batch mode: one process per scenario, at most `jobs` in flight
  int running = 0, failures = 0;
  for (const auto& file : files) {
    if (running >= jobs) {
      int status = 0;
      wait(&status);
      --running;
      if (status != 0) ++failures;
    }
    const pid_t pid = fork();
    if (pid == 0) _exit(run_one(chosen, file, "", strict, seed));
    ++running;
  }
  while (running > 0) {
    int status = 0;
    wait(&status);
    --running;
    if (status != 0) ++failures;
  }
  return failures == 0 ? 0 : 3;
}
