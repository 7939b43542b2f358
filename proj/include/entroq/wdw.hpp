#pragma once

#include <string>

#include <Eigen/Sparse>

#include "entroq/configspace.hpp"
#include "entroq/madelung.hpp"
#include "entroq/variational.hpp"

namespace entroq {

enum class Ordering { Paper, Naive };
std::string to_string(Ordering o);
Ordering ordering_from_string(const std::string& s);

/// Full-grid operator alpha*K + V.  Rows of K at boundary nodes are empty; V is diagonal.
struct WdwOperator {
  Eigen::SparseMatrix<double> matrix;
  Eigen::SparseMatrix<double> kinetic;
  Eigen::SparseMatrix<double> kinetic_unit;
  Eigen::SparseMatrix<double> potential;
  Ordering ordering = Ordering::Paper;
  double alpha = 1.0;
  PhysicalConstants constants;
  ConfigSpace space;
};

/// K_unit = -hbar^2 sum_A d_A(c_A d_A) with c at half nodes (divergence form) or c_i d_A d_A (naive).
WdwOperator build_wdw_operator(const ConfigSpace& space, const PhysicalConstants& constants,
                               Ordering ordering = Ordering::Paper);

/// 1-DOF: left/right are the values at the ends of the axis.
/// 2-DOF: value and a-derivative on the first slice of axis 0; the solution is marched in a.
struct WdwBoundary {
  Complex left{0.0, 0.0};
  Complex right{1.0, 0.0};
  CField slice_value;
  CField slice_derivative;
};

struct WdwSolution {
  /// unit measure-weighted norm on the grid
  WaveState state;
  /// as solved, before normalization
  CField raw;
  double residual = 0.0;
};

WdwSolution solve_wdw(const WdwOperator& op, const WdwBoundary& boundary, double tol);

/// ||Op psi|| / ||psi|| over interior nodes.
double wdw_residual(const WdwOperator& op, const CField& psi);

/// Divergence-form split of (Op psi)/psi into var12 (real part) and the scaled continuity term
/// -(sqrt(alpha) hbar / rho) var11 (imaginary part).  Reports wdw_real, wdw_imag, var11, var12 and
/// gap_real / gap_imag, the RMS differences between the two routes.
ResidualReport madelung_split_residual(const WaveState& psi, const ConfigSpace& space,
                                       const PhysicalConstants& constants, double phase_origin = 0.0);

void write_operator_coo(const WdwOperator& op, const std::string& path);
void write_wave_csv(const WaveState& psi, const ConfigSpace& space, const std::string& path);

}  // namespace entroq
