#pragma once

#include <bcm/source_to_solution.hpp>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bcmlab/config.hpp"

namespace bcmlab {

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_numerical = 3 };

struct RunOptions {
  std::filesystem::path out = "out";
  bool verbose = false;
};

/// Grid, regions, potentials and maps built from a config.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const bcm::GridPtr& grid() const { return grid_; }
  const bcm::TimeGrid& time() const { return time_; }
  const bcm::RegionPtr& omega() const { return omega_; }
  const bcm::RegionPtr& k() const { return k_; }
  bcm::PotentialPtr potential(const std::string& id) const;
  bcm::MapPtr map(const std::string& id) const;
  /// cos^4 pulse in time and space from run.source, restricted to omega.
  bcm::BoundaryData pulse() const;
  double pulse_value(double t, bcm::Point x) const;

 private:
  ExperimentConfig cfg_;
  bcm::TimeGrid time_;
  bcm::GridPtr grid_;
  bcm::RegionPtr omega_, k_;
  std::map<std::string, bcm::PotentialPtr> potentials_;
  mutable std::map<std::string, bcm::MapPtr> maps_;
};

struct CheckRow {
  std::string name;
  double value = 0;
  double threshold = 0;
  bool pass = false;
};

/// Invariant suite behind `check`.
std::vector<CheckRow> invariant_suite(const Experiment& ex, bool verbose = false);

const std::vector<std::string>& command_names();

/// Runs one subcommand, writing CSV and SVG into opt.out. Returns an exit
/// code; validation and numerical errors are reported on stderr.
int run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opt);

}  // namespace bcmlab
