#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <json.hpp>

#include "entroq/configspace.hpp"

namespace entroq {

struct EnsembleState {
  Field rho;
  Field S;
  double time = 0.0;
};

struct WaveState {
  CField psi;
  double time = 0.0;
};

/// Q = -(hbar^2 / sqrt(rho)) sum_A d_A(kinetic_A d_A sqrt(rho)).  Boundary nodes and nodes under the
/// density floor are set to 0; `mask` (if given) gets 1 where Q was evaluated.
Field bohm_potential(const Field& rho, const ConfigSpace& space, const PhysicalConstants& constants,
                     std::vector<char>* mask = nullptr);

struct MadelungOptions {
  bool quantum = true;
  /// 0 keeps only the initial and final states.
  int snapshot_every = 0;
};

struct MadelungRun {
  std::vector<EnsembleState> trajectory;
  std::vector<double> renorm_factors;
  double advective_ratio = 0.0;
  double dispersive_ratio = 0.0;
};

/// RK4 on (ln rho, S) with centered differences.  Boundary nodes follow by quadratic extrapolation
/// and rho is reported as 0 there.
MadelungRun evolve_madelung(const EnsembleState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                            double dt, int steps, const MadelungOptions& opt = {});

/// Limits checked by evolve_madelung.
inline constexpr double kAdvectiveLimit = 1.0;
inline constexpr double kDispersiveLimit = 2.5;

enum class Stencil { Fd2, Sinc };
std::string to_string(Stencil s);
Stencil stencil_from_string(const std::string& s);

/// Interior nodes in grid order; boundary values are held at 0.
std::vector<std::size_t> interior_nodes(const ConfigSpace& space);

/// -hbar^2 sum_A d_A(kinetic_A d_A) + potential restricted to interior nodes.
Eigen::SparseMatrix<double> hamiltonian_matrix(const ConfigSpace& space, const PhysicalConstants& constants,
                                               Stencil stencil = Stencil::Fd2);

/// (I + i dt H / 2hbar) psi' = (I - i dt H / 2hbar) psi with a factorized left side.
class CrankNicolson {
 public:
  CrankNicolson(const Eigen::SparseMatrix<double>& h, double dt, double hbar);
  void step(Eigen::VectorXcd& psi) const;

 private:
  Eigen::SparseMatrix<Complex> rhs_;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu_;
};

struct SchrodingerOptions {
  int snapshot_every = 0;
};

struct SchrodingerRun {
  std::vector<WaveState> trajectory;
  /// max over steps of | ||psi_{n+1}||^2 - ||psi_n||^2 |
  double max_norm_drift = 0.0;
};

SchrodingerRun evolve_schrodinger(const WaveState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                                  double dt, int steps, const SchrodingerOptions& opt = {});

/// psi = sqrt(rho) exp(i S / (sqrt(alpha) hbar)).
WaveState wave_from_ensemble(const EnsembleState& state, const PhysicalConstants& constants);

/// Inverse map.  Phase is unwrapped axis-major: each node is referenced to its predecessor along
/// the last axis, falling back to slower axes on the first row.  The first node picks the branch
/// closest to `phase_origin` (in units of S).  `flagged` gets 1 on nodes under the density floor.
EnsembleState ensemble_from_wave(const WaveState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                                 double phase_origin = 0.0, std::vector<char>* flagged = nullptr);

struct GroundState {
  double energy = 0.0;
  WaveState state;
  int iterations = 0;
  double residual = 0.0;
};

/// Lowest eigenpair by shifted inverse iteration with conjugate-gradient inner solves.
GroundState ground_state(const ConfigSpace& space, const PhysicalConstants& constants, double tol,
                         Stencil stencil = Stencil::Sinc, int max_iter = 200);

double wave_norm(const CField& psi, const ConfigSpace& space);
double energy_expectation(const CField& psi, const ConfigSpace& space, const PhysicalConstants& constants,
                          Stencil stencil = Stencil::Fd2);

/// Columns: coordinates, rho, S, Re psi, Im psi.
void write_trajectory_csv(const std::vector<EnsembleState>& states, const ConfigSpace& space,
                          const PhysicalConstants& constants, const std::string& path);

}  // namespace entroq
