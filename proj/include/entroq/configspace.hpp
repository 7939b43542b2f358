#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "entroq/common.hpp"

namespace entroq {

enum class SpaceKind { ScalarLattice, Frw, Coupled };

std::string to_string(SpaceKind k);
SpaceKind space_kind_from_string(const std::string& s);

struct LatticeSpec {
  int sites = 1;
  double spacing = 1.0;
};

/// Tensor-product grid over configuration space.  Node index is row-major: axis 0 varies slowest.
///
/// The Hamiltonian convention is H = sum_A kinetic[A] * p_A^2 + potential with p_A conjugate to
/// q^A.  Every implemented model has a diagonal kinetic form, so only the diagonal is stored,
/// one nodal table per axis.
struct ConfigSpace {
  SpaceKind kind = SpaceKind::ScalarLattice;
  std::vector<Axis> axes;
  Field measure;
  std::vector<Field> kinetic;
  Field potential;

  // model parameters, kept for reductions that need the analytic coefficients
  LatticeSpec lattice;
  double mass = 0.0;
  int curvature = 0;
  double fiducial_volume = 1.0;
  PhysicalConstants constants;

  std::size_t dims() const { return axes.size(); }
  std::size_t size() const;
  std::size_t stride(std::size_t axis) const;
  int index(std::size_t node, std::size_t axis) const;
  double coord(std::size_t node, std::size_t axis) const { return axes[axis].at(index(node, axis)); }
  bool on_boundary(std::size_t node) const;
  /// Product trapezoid weights.
  Field quadrature() const;
  void validate() const;
};

ConfigSpace build_scalar_lattice_space(const LatticeSpec& spec, double mass, const GridBounds& axis,
                                       const PhysicalConstants& constants);
ConfigSpace build_frw_space(int curvature, double fiducial_volume, const GridBounds& a_axis,
                            const PhysicalConstants& constants);
ConfigSpace build_coupled_space(const ConfigSpace& frw, const GridBounds& phi_axis, const PhysicalConstants& constants);

/// Direct construction for tests and operator experiments.  Kinetic tables are per axis.
ConfigSpace make_custom_space(SpaceKind kind, std::vector<Axis> axes, std::vector<Field> kinetic, Field potential,
                              Field measure, const PhysicalConstants& constants);

/// Reduced minisuperspace coefficients, evaluated from the generated table.
namespace frw {
double kinetic_aa(double a, double fiducial_volume, double grav);
double potential(double a, int curvature, double fiducial_volume, double grav);
double kinetic_phi(double a, double fiducial_volume);
double measure(double a);
double ricci(double a, int curvature);
}  // namespace frw

/// Rank-4 tensor over 3 dimensions, index (i,j,k,l) -> ((i*3+j)*3+k)*3+l.
using Tensor4 = std::array<double, 81>;
inline int t4(int i, int j, int k, int l) { return ((i * 3 + j) * 3 + k) * 3 + l; }

struct SuperMetricSample {
  Tensor4 lower{};
  Tensor4 upper{};
  Eigen::Matrix3d h;
  Eigen::Matrix3d h_inv;
  double sqrt_det = 1.0;
};

SuperMetricSample dewitt_supermetric(const Eigen::Matrix3d& h);

// Stencils on a ConfigSpace grid.  All are second order.

/// Central first derivative along `axis`; one-sided second order at the ends.
Field gradient(const ConfigSpace& s, const Field& f, std::size_t axis);
/// d/dq (c df/dq) along `axis` in flux form with half-node averaged c; boundary nodes are left 0.
Field flux_divergence(const ConfigSpace& s, const Field& c, const Field& f, std::size_t axis);
/// Sparse matrix of `gradient` along one axis.
Eigen::SparseMatrix<double> derivative_matrix(const ConfigSpace& s, std::size_t axis);

nlohmann::ordered_json to_json(const ConfigSpace& s);
ConfigSpace space_from_json(const nlohmann::json& j);

}  // namespace entroq
