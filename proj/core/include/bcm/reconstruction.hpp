#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "bcm/boundary_control.hpp"
#include "bcm/geometric_optics.hpp"
#include "bcm/stats.hpp"

namespace bcm {

enum class RecoveryMode {
  self_modulus,  // u2 from the data-only modulus |u2^f|^2 with matched cap averaging
  go_probe,      // u2^f conj(u2^h) with a geometric optics probe h per node
};

struct ReconstructionConfig {
  MapPtr reference;  // Lambda_1, potential q1 known
  MapPtr data;       // Lambda_2, only apply/adjoint calls
  RegionPtr target;  // K
  ProbeParams probe;        // source f; x0 is chosen per ray, sigma 0 gives a real pulse
  ProbeParams point_probe;  // h in go_probe mode; x0 set per node
  RecoveryMode mode = RecoveryMode::self_modulus;
  int stride = 2;        // K-node spacing of the difference stencil
  int time_spacing = 2;  // steps between evaluation times
  double cap_eta = 0.1;
  double ball_r = 0.25;
  double alpha = 1e-9;
  double guard_tol = 0.05;
  double max_reject_fraction = 0.25;
  PotentialPtr truth;  // optional q2 for oracle diagnostics and error
};

struct DifferenceSample {
  Point x;
  std::size_t node = 0;
  int step = 0;
  int ray = 0;
  double u1 = 0;     // matched cap value of the reference field
  double d_hat = 0;  // recovered u1 - u2
  double divisor = 0;
  double d_direct = std::numeric_limits<double>::quiet_NaN();  // oracle (truth only)
  int iterations = 0;
  double residual = 0;
  bool converged = true;
};

struct ReconstructionNode {
  Point x;
  std::size_t node = 0;
  double q_hat = 0;
  double q_ref = 0;
  double q_true = std::numeric_limits<double>::quiet_NaN();
  double divisor = 0;  // smallest divisor magnitude over the stencil times
  bool accepted = false;
};

struct ReconstructionResult {
  std::vector<ReconstructionNode> nodes;
  std::vector<DifferenceSample> samples;
  double accepted_fraction = 0;
  double abs_error = std::numeric_limits<double>::quiet_NaN();  // ||q_hat - q2||_{L2(K)}
  double rel_error = std::numeric_limits<double>::quiet_NaN();  // divided by ||q2 - q1||
  double d_error = std::numeric_limits<double>::quiet_NaN();    // max |d_hat - d_direct| / max |d_direct|
  double max_residual = 0;
  int cg_iterations = 0;
  double probe_margin = 0;  // smallest |u1^f| over the samples minus 1/2
};

struct SampleRequest {
  std::size_t node = 0;
  int step = 0;
  int ray = 0;
};

/// Source f and evaluation geometry for one ray of target nodes.
struct RayProbe {
  ProbeParams params;
  BoundaryData source;
  double s_delta = 0;
  Point normal;
};

/// Groups the stride-selected K-nodes by the ray from omega that passes
/// through them and builds one probe source per ray.
std::vector<RayProbe> plan_rays(const ReconstructionConfig& cfg, std::vector<std::size_t>& targets,
                                std::vector<int>& ray_of);

/// d_hat ~ (u1^f - u2^f)(t, x) at the requested (node, step) pairs.
std::vector<DifferenceSample> recover_difference_field(const ReconstructionConfig& cfg,
                                                       const std::vector<RayProbe>& rays,
                                                       const std::vector<SampleRequest>& requests);

/// q2_hat = q1 + [box d_hat + q1 d_hat] / (u1 - d_hat) on the stride grid of K.
ReconstructionResult reconstruct_potential(const ReconstructionConfig& cfg);

void write_reconstruction_csv(std::ostream& os, const ReconstructionResult& r);

// ------------------------------------------------------------ stability sweep

struct PotentialPair {
  std::string id;
  PotentialPtr q1;
  PotentialPtr q2;
};

struct SweepConfig {
  RegionPtr omega;
  RegionPtr target;
  TimeGrid time{1.0, 2};
  ReconstructionConfig recon;  // maps and target are filled per row
  bool reconstruct = true;
  PowerOptions power;
  std::vector<double> eps_schedule{0.3, 0.1, 0.03};
};

struct SweepRow {
  std::string id;
  double lambda_diff = 0;
  double q_diff = 0;
  double recon_error = std::numeric_limits<double>::quiet_NaN();
  double a_hat = std::numeric_limits<double>::quiet_NaN();
  double ell = std::numeric_limits<double>::quiet_NaN();
  double alpha_hat = std::numeric_limits<double>::quiet_NaN();
  bool ok = true;
  std::string note;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  CostTable table;
  bool table_monotone = false;
  double spearman = std::numeric_limits<double>::quiet_NaN();
  DoubleLogFit fit;
  double ell = std::numeric_limits<double>::quiet_NaN();
  double ell_rms = std::numeric_limits<double>::quiet_NaN();
};

/// ||q1 - q2||_{L2(K)} with trapezoid weights.
double potential_difference(const Potential& a, const Potential& b, const Region& k);

SweepReport stability_sweep(const std::vector<PotentialPair>& pairs, const SweepConfig& cfg);

void write_sweep_csv(std::ostream& os, const SweepReport& r);
void write_cost_csv(std::ostream& os, const CostTable& t);

}  // namespace bcm
