#pragma once

#include <bcm/reconstruction.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bcmlab {

struct RegionSpec {
  enum class Shape { box, ball };
  Shape shape = Shape::box;
  bcm::Point lo, hi;      // box
  bcm::Point center;      // ball
  double radius = 0;
};

struct PotentialSpec {
  std::string id;
  std::vector<bcm::GaussianBump> bumps;
  std::optional<double> bound;  // M in ||q||_{C^m} <= M
  int smoothness = 2;           // m
};

struct SourceSpec {  // cos^4 pulse in space and time on omega
  bcm::Point center;
  double radius = 0.3;
  double t_center = 0.4;
  double t_width = 0.3;
};

struct ExperimentConfig {
  std::string path;  // file the config was read from
  std::uint64_t seed = 20240611;

  // geometry
  int dim = 1;
  RegionSpec omega;
  RegionSpec k;  // always a box
  std::optional<double> padding;

  // time
  double T = 0;
  double cfl = 1.0;
  std::optional<int> steps;

  // solver
  double h = 0;
  bcm::Storage storage = bcm::Storage::none;

  std::vector<PotentialSpec> potentials;
  std::string reference;  // id of q1
  std::string data;       // id of q2
  std::string out = "out";

  SourceSpec source;

  // control
  std::vector<double> alphas;
  std::vector<double> eps;
  int max_iters = 2000;
  double eval_time = 0;
  double influence = 0;
  double cap_eta = 0.1;
  double ball_r = 0.25;

  // probe
  std::vector<double> sigmas;
  int order = 1;
  double delta = 0;  // 0 picks the default
  double eta = 0.1;
  std::optional<bcm::Point> x0;
  double f_eta = 0.15;
  double f_delta = 0.4;

  // reconstruction
  bcm::RecoveryMode mode = bcm::RecoveryMode::self_modulus;
  int stride = 2;
  int time_spacing = 2;
  double recon_alpha = 1e-7;
  double guard_tol = 0.05;
  double max_reject = 0.25;

  // sweep
  std::vector<std::pair<std::string, std::string>> pairs;  // empty: reference against every other id
  bool sweep_reconstruct = false;

  // checks
  int random_pairs = 20;
  int power_iters = 200;
  double power_tol = 1e-6;
};

/// Parses and validates a config file. Throws bcm::Error (validation) with
/// "path:line:col: key: message".
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& name = "<string>");

/// Canonical YAML: every key present, fixed order, shortest round-trip reals.
std::string emit_canonical(const ExperimentConfig& cfg);

}  // namespace bcmlab
