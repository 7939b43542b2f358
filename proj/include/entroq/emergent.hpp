#pragma once

#include <deque>
#include <string>
#include <vector>

#include <json.hpp>

#include "entroq/configspace.hpp"
#include "entroq/madelung.hpp"

namespace entroq {

struct BackgroundOptions {
  double a0 = 1.0;
  /// +1 expanding, -1 contracting
  int direction = 1;
  double t_max = 1.0;
  /// momentum of the homogeneous scalar, sources the rate equation through kinetic_phi
  double p_phi = 0.0;
  int samples = 201;
  double rtol = 1e-11;
  double atol = 1e-13;
};

struct BackgroundTrajectory {
  std::vector<double> times;
  std::vector<double> a;
  std::vector<double> adot;
  /// S0 on the a-axis nodes, zero at a0; NaN where the branch is imaginary
  Field S0;
  int direction = 1;
  double p_phi = 0.0;
  bool truncated = false;
  std::string reason;

  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  /// Cubic Hermite interpolation through (a, adot).
  double a_at(double t) const;
  double adot_at(double t) const;
};

/// dS0/da on the branch selected by `direction`; NaN in the forbidden region.
double background_momentum(double a, const ConfigSpace& space, const PhysicalConstants& constants, double p_phi,
                           int direction);

BackgroundTrajectory solve_background(const ConfigSpace& space, const PhysicalConstants& constants,
                                      const BackgroundOptions& opt);

/// max_k |adot_k - 2 N kinetic_aa(a_k) dS0/da(a_k)|
double rate_residual(const BackgroundTrajectory& bg, const ConfigSpace& space, const PhysicalConstants& constants);

struct EmergentOptions {
  bool corrections_on = true;
  /// scales the amplitude correction as the quantum potential is scaled
  double alpha = 1.0;
};

struct EmergentSlice {
  double t = 0.0;
  double a = 0.0;
  CField psi;
};

struct EmergentStepRecord {
  double t = 0.0;
  double a = 0.0;
  double norm = 0.0;
  double gamma_cl_max = 0.0;
  double gamma_q_max = 0.0;
};

/// Matter wave function on the scalar axis of a coupled space, with the last three a-slices kept
/// for the backward a-derivatives.
struct EmergentRun {
  ConfigSpace space;
  EmergentOptions options;
  std::deque<EmergentSlice> history;
  Field gamma_cl;
  Field gamma_q;
  std::vector<EmergentStepRecord> log;

  const EmergentSlice& current() const { return history.back(); }
};

EmergentRun make_emergent_run(const ConfigSpace& coupled, const CField& psi_phi, double t0, double a0,
                              const EmergentOptions& opt = {});

struct GammaTerms {
  Field gamma_cl;
  Field gamma_q;
};

/// gamma_cl = -kinetic_aa (hbar Im(d_a psi / psi))^2,
/// gamma_q = -hbar^2 (kinetic_aa R'' + kinetic_aa' R') / R with R = |psi|^(1/2),
/// a-derivatives from the three stored slices.  Masked nodes get 0.
GammaTerms gamma_terms(const EmergentRun& run, const PhysicalConstants& constants);

/// Crank-Nicolson in t with the scalar kinetic coefficient at a(t + dt/2) and Gamma lagged from the
/// stored slices (zero until three slices exist).
void evolve_emergent(EmergentRun& run, const BackgroundTrajectory& bg, const PhysicalConstants& constants, double dt,
                     int steps);

struct SuppressionReport {
  std::vector<double> grav;
  std::vector<double> ratio_grav;
  double slope_grav = 0.0;
  std::vector<double> hbar;
  std::vector<double> ratio_hbar;
  double slope_hbar = 0.0;
};

/// max |Gamma psi| / max |K psi| on the current slice.  The kinetic denominator uses the constants
/// passed in, so only the correction terms vary along each sweep.
double suppression_ratio(const EmergentRun& run, const PhysicalConstants& base, const PhysicalConstants& varied);
SuppressionReport suppression_scan(const EmergentRun& run, const PhysicalConstants& base,
                                   const std::vector<double>& grav_list, const std::vector<double>& hbar_list);

struct AnsatzReport {
  double ratio_rho = 0.0;
  double ratio_S = 0.0;
  double threshold = 0.1;
  bool valid = true;
};

/// Compares a-gradients of the matter factor against those of the gravitational factor psi0 given
/// on the a-axis of `frw`.
AnsatzReport ansatz_diagnostics(const EmergentRun& run, const WaveState& psi0, const ConfigSpace& frw,
                                const PhysicalConstants& constants, double threshold = 0.1);

void write_emergent_log_csv(const EmergentRun& run, const std::string& path);
nlohmann::ordered_json to_json(const SuppressionReport& r);
nlohmann::ordered_json to_json(const AnsatzReport& r);

}  // namespace entroq
