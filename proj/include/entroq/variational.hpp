#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "entroq/configspace.hpp"
#include "entroq/madelung.hpp"

namespace entroq {

struct GibbsResult {
  Field p;
  int iterations = 0;
  double kkt = 0.0;
  /// (iteration, KKT residual)
  std::vector<std::pair<int, double>> trace;
};

/// Minimizes sum_w p E + (hbar/2) p ln(p / prior) over the simplex by entropic mirror descent
/// with Armijo backtracking.  The KKT residual is max_i |g_i - <g>_p| for the objective gradient g.
GibbsResult gibbs_minimize(const Field& energy, double hbar, const Field& prior, double tol, int max_iter = 10000);

void write_gibbs_trace_csv(const GibbsResult& r, const std::string& path);

/// Homogeneous models: the vector multipliers carry one value per node.
struct MultiplierSet {
  double lam1 = 0.0;
  Field lam2;
  double lam3 = 0.0;
  Field lam4;

  /// lam2 = 2 N_i (zero shift), lam4 = sqrt(h) M with sqrt(h) the space's measure.
  static MultiplierSet defaults(const ConfigSpace& space, const PhysicalConstants& constants, double m = 0.0);
};

struct ResidualEntry {
  double residual_norm = 0.0;
  long grid_points = 0;
};

/// Name-to-residual map that keeps insertion order.
struct ResidualReport {
  std::vector<std::pair<std::string, ResidualEntry>> entries;

  void set(const std::string& name, double norm, long points);
  const ResidualEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  void merge(const ResidualReport& other);
};

nlohmann::ordered_json to_json(const ResidualReport& r);

/// A trajectory of ensembles on `times` (same length).  Per interval t:
///   sum_q w rho_t (S_{t+1} - S_t) + dt_t N sum_q w rho_t (sum_A kinetic_A (d_A S_t)^2 + U)
///   + dt_t (hbar^2 / 8) F[rho_t]
/// with F the Fisher functional of the entropy module.  The last time level only enters through S.
double total_action(const std::vector<EnsembleState>& trajectory, const ConfigSpace& space,
                    const PhysicalConstants& constants, const std::vector<double>& times);

struct ActionGradient {
  double value = 0.0;
  std::vector<Field> d_rho;
  std::vector<Field> d_S;
};

/// Exact derivative of the same discrete sum with respect to every nodal rho and S.  Densities need
/// not be normalized here.
ActionGradient total_action_gradient(const std::vector<EnsembleState>& trajectory, const ConfigSpace& space,
                                     const PhysicalConstants& constants, const std::vector<double>& times);

/// var1..var12 from two snapshots; spatial terms use the midpoint state.  RMS over interior nodes,
/// with var6 a global (integrated) residual.
ResidualReport stationarity_residuals(const EnsembleState& before, const EnsembleState& after,
                                      const MultiplierSet& multipliers, const ConfigSpace& space,
                                      const PhysicalConstants& constants);

/// C1..C4: <d_t S>, momentum constraint, <d_t rho>, its momentum analogue.
ResidualReport constraint_residuals(const EnsembleState& before, const EnsembleState& after, const ConfigSpace& space);

/// -N sum_q w rho H(q, dS); with `quantum` the Fisher term -(hbar^2/8) F[rho] is included.
double hamiltonian_ensemble(const EnsembleState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                            bool quantum = false);

/// sum_A kinetic_A (d_A S)^2 + U at every node.
Field hamilton_density(const Field& S, const ConfigSpace& space);

}  // namespace entroq
