#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "entroq/configspace.hpp"

namespace entroq {

enum class KernelSector { Scalar, GravityTraceless, Conformal };
std::string to_string(KernelSector s);

/// Gaussian fluctuation law p(w) ~ exp(-w^T omega_bar w / 2), covariance theoretical_cov.
struct FluctuationKernel {
  Eigen::MatrixXd omega_bar;
  Eigen::MatrixXd theoretical_cov;
  double dt = 0.0;
  PhysicalConstants constants;
  KernelSector sector = KernelSector::Scalar;
  /// Quadrature weight per sampled coordinate, used for the smeared inner product.
  Eigen::VectorXd site_weight;
  /// Gravity sector only: columns map traceless coordinates to (w11, w22, w33, w12, w13, w23).
  Eigen::MatrixXd basis;
  /// w = sampler * xi with xi standard normal.
  Eigen::MatrixXd sampler;

  Eigen::Index dim() const { return omega_bar.rows(); }
  /// Conjugate momentum of a fluctuation, (hbar/2) * omega_bar * w.
  Eigen::VectorXd momentum(const Eigen::VectorXd& w) const;
  /// Covariance of the six lower metric components (gravity sector).
  Eigen::MatrixXd component_covariance() const;
};

/// Scalar lattice: one coordinate per site.  FRW: one conformal-mode coordinate whose scale is
/// frozen at `reference_a` (defaults to the middle of the axis).
FluctuationKernel build_fluctuation_kernel(const ConfigSpace& space, double dt, const PhysicalConstants& constants,
                                           double reference_a = 0.0);

/// Traceless sector of the supermetric quadratic form at metric point h.
FluctuationKernel build_gravity_kernel(const Eigen::Matrix3d& h, double dt, const PhysicalConstants& constants);

/// Kernel with an explicit covariance (may be singular or zero); for detector checks.
FluctuationKernel kernel_from_covariance(const Eigen::MatrixXd& cov, double dt, const PhysicalConstants& constants);

struct SampleBatch {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> samples;
  std::uint64_t seed = 0;
  std::shared_ptr<const FluctuationKernel> kernel;
};

SampleBatch sample(std::shared_ptr<const FluctuationKernel> kernel, std::int64_t n_samples, std::uint64_t seed);
inline SampleBatch sample(const FluctuationKernel& kernel, std::int64_t n, std::uint64_t seed) {
  return sample(std::make_shared<const FluctuationKernel>(kernel), n, seed);
}

struct CovarianceReport {
  Eigen::MatrixXd estimated_cov;
  Eigen::MatrixXd stderr_cov;
  /// max |C_est - C*| / sqrt(C*_ii C*_jj)
  double max_rel_err = 0.0;
  /// max |C_est - C*| in units of its standard error
  double max_z = 0.0;
  bool consistent = false;
};

CovarianceReport covariance_check(const SampleBatch& batch, double z_tolerance = 5.0);

struct UncertaintyReport {
  double cross_cov_estimate = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  /// |estimate - bound| / stderr
  double margin = 0.0;
};

/// Smeared cross-covariance <dq(f) dpi(g)> against (hbar/2) <f|g>.
UncertaintyReport uncertainty_check(const SampleBatch& batch, const Eigen::VectorXd& f, const Eigen::VectorXd& g);

void write_samples_csv(const SampleBatch& batch, const std::string& path);
nlohmann::ordered_json to_json(const CovarianceReport& r);
nlohmann::ordered_json to_json(const UncertaintyReport& r);

}  // namespace entroq
