#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "entroq/configspace.hpp"
#include "entroq/fluctuation.hpp"

namespace entroq {

struct DivergenceEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  double alpha = 1.0;
};

struct DivergenceOptions {
  /// Wrap shifted evaluation around each axis instead of requiring padding.
  bool periodic = false;
};

/// Normalization on the grid's trapezoid quadrature.
double total_mass(const Field& rho, const ConfigSpace& space);

/// sum_q w_q sum_A W^A (d_A rho)^2 / rho with W = 2 N kinetic.  Nodes below the density floor
/// are skipped.  If `grad` is non-null it receives the exact derivative with respect to nodal rho.
/// Variations leave the normalized set, so the normalization check can be switched off.
double fisher_functional(const Field& rho, const ConfigSpace& space, const PhysicalConstants& constants,
                         Field* grad = nullptr, bool require_normalized = true);

/// <KL(rho(q) || rho(q + w))>_w with antithetic pairs (w, -w).
DivergenceEstimate kl_mc(const Field& rho, const ConfigSpace& space, const FluctuationKernel& kernel, std::int64_t n,
                         std::uint64_t seed, const DivergenceOptions& opt = {});

/// <Tsallis_alpha(rho(q) || rho(q + w))>_w, same sampling as kl_mc.
DivergenceEstimate tsallis_mc(const Field& rho, double alpha, const ConfigSpace& space, const FluctuationKernel& kernel,
                              std::int64_t n, std::uint64_t seed, const DivergenceOptions& opt = {});

struct SmallDtReport {
  std::vector<double> dt;
  std::vector<DivergenceEstimate> kl;
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual = 0.0;
  double fisher = 0.0;
  double fisher_prediction = 0.0;
  /// | |slope| - |prediction| | / |prediction|; absolute |slope| when the prediction is 0
  double relative_error = 0.0;
};

/// Kernels for every dt come from build_fluctuation_kernel(space, dt, constants, reference_a), all
/// sampled with the same seed so the fit sees common random numbers.
SmallDtReport small_dt_limit_report(const Field& rho, const ConfigSpace& space, const PhysicalConstants& constants,
                                    const std::vector<double>& dt_list, std::int64_t n, std::uint64_t seed,
                                    double reference_a = 0.0, const DivergenceOptions& opt = {});

/// Cubic (4-point Lagrange, tensor product) interpolation of a nodal field.
double interpolate_cubic(const ConfigSpace& space, const Field& f, const std::vector<double>& q);

nlohmann::ordered_json to_json(const DivergenceEstimate& d);
nlohmann::ordered_json to_json(const SmallDtReport& r);

}  // namespace entroq
