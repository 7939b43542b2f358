#include "entroq/fluctuation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "entroq/rng.hpp"

namespace entroq {

std::string to_string(KernelSector s) {
  switch (s) {
    case KernelSector::Scalar: return "scalar";
    case KernelSector::GravityTraceless: return "gravity-traceless";
    case KernelSector::Conformal: return "conformal";
  }
  return "?";
}

namespace {

Eigen::MatrixXd sampler_from_precision(const Eigen::MatrixXd& omega) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
    throw NumericalError("fluctuation form is not positive definite on its sector");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal();
}

void finish(FluctuationKernel& k) {
  Eigen::LLT<Eigen::MatrixXd> llt(k.omega_bar);
  if (llt.info() != Eigen::Success) throw NumericalError("fluctuation form is not positive definite on its sector");
  k.theoretical_cov = llt.solve(Eigen::MatrixXd::Identity(k.dim(), k.dim()));
  k.theoretical_cov = 0.5 * (k.theoretical_cov + k.theoretical_cov.transpose());
  k.sampler = sampler_from_precision(k.omega_bar);
}

void check_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
}

// symmetric 3x3 basis matrices for (w11, w22, w33, w12, w13, w23)
constexpr int kPairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};

Eigen::Matrix3d unit_component(int a) {
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
  e(kPairs[a][0], kPairs[a][1]) = 1.0;
  e(kPairs[a][1], kPairs[a][0]) = 1.0;
  return e;
}

}  // namespace

Eigen::VectorXd FluctuationKernel::momentum(const Eigen::VectorXd& w) const {
  return 0.5 * constants.hbar * (omega_bar * w);
}

Eigen::MatrixXd FluctuationKernel::component_covariance() const {
  if (sector != KernelSector::GravityTraceless) return theoretical_cov;
  return basis * theoretical_cov * basis.transpose();
}

FluctuationKernel build_fluctuation_kernel(const ConfigSpace& space, double dt, const PhysicalConstants& constants,
                                           double reference_a) {
  check_dt(dt);
  constants.validate(space.kind != SpaceKind::ScalarLattice);
  FluctuationKernel k;
  k.dt = dt;
  k.constants = constants;
  const double scale = constants.lapse * constants.hbar * dt;
  if (space.kind == SpaceKind::ScalarLattice) {
    auto d = static_cast<Eigen::Index>(space.dims());
    double dx = space.lattice.spacing;
    k.sector = KernelSector::Scalar;
    // kinetic coefficient is 1/(2 dx), so the variance is N hbar dt / (2 dx)
    k.omega_bar = (2.0 * dx / scale) * Eigen::MatrixXd::Identity(d, d);
    k.site_weight = Eigen::VectorXd::Constant(d, dx);
  } else if (space.kind == SpaceKind::Frw) {
    double a = reference_a > 0.0 ? reference_a : 0.5 * (space.axes[0].min + space.axes[0].max);
    double g = std::abs(frw::kinetic_aa(a, space.fiducial_volume, constants.grav));
    if (!(g > 0.0)) throw ValidationError("conformal kernel needs grav > 0");
    k.sector = KernelSector::Conformal;
    k.omega_bar = Eigen::MatrixXd::Constant(1, 1, 1.0 / (scale * g));
    k.site_weight = Eigen::VectorXd::Ones(1);
  } else {
    throw ValidationError("fluctuation kernels are defined for scalar-lattice and frw spaces");
  }
  finish(k);
  return k;
}

FluctuationKernel build_gravity_kernel(const Eigen::Matrix3d& h, double dt, const PhysicalConstants& constants) {
  check_dt(dt);
  constants.validate();
  auto g = dewitt_supermetric(h);
  const double c = g.sqrt_det / (16.0 * kPi * constants.grav * constants.lapse * constants.hbar * dt);

  Eigen::Matrix<double, 6, 6> m;
  Eigen::Matrix<double, 6, 1> trace_row;
  for (int a = 0; a < 6; ++a) {
    Eigen::Matrix3d ea = unit_component(a);
    trace_row(a) = (g.h_inv.cwiseProduct(ea)).sum();
    for (int b = 0; b < 6; ++b) {
      Eigen::Matrix3d eb = unit_component(b);
      double s = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int kk = 0; kk < 3; ++kk)
            for (int l = 0; l < 3; ++l) s += ea(i, j) * g.upper[t4(i, j, kk, l)] * eb(kk, l);
      m(a, b) = c * s;
    }
  }
  // orthonormal basis of {w : h^{ij} w_ij = 0}
  Eigen::HouseholderQR<Eigen::Matrix<double, 6, 1>> qr(trace_row);
  Eigen::Matrix<double, 6, 6> q = qr.householderQ();

  FluctuationKernel k;
  k.dt = dt;
  k.constants = constants;
  k.sector = KernelSector::GravityTraceless;
  k.basis = q.rightCols(5);
  k.omega_bar = k.basis.transpose() * m * k.basis;
  k.omega_bar = 0.5 * (k.omega_bar + k.omega_bar.transpose());
  k.site_weight = Eigen::VectorXd::Ones(5);
  finish(k);
  return k;
}

FluctuationKernel kernel_from_covariance(const Eigen::MatrixXd& cov, double dt, const PhysicalConstants& constants) {
  check_dt(dt);
  if (cov.rows() != cov.cols() || cov.rows() == 0) throw ValidationError("covariance must be square and nonempty");
  FluctuationKernel k;
  k.dt = dt;
  k.constants = constants;
  k.sector = KernelSector::Scalar;
  k.theoretical_cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.theoretical_cov);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  k.sampler = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  Eigen::VectorXd inv = lam.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 0.0; });
  k.omega_bar = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  k.site_weight = Eigen::VectorXd::Ones(cov.rows());
  return k;
}

SampleBatch sample(std::shared_ptr<const FluctuationKernel> kernel, std::int64_t n_samples, std::uint64_t seed) {
  if (!kernel) throw ValidationError("sample needs a kernel");
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
  SampleBatch b;
  b.seed = seed;
  b.kernel = kernel;
  const Eigen::Index d = kernel->dim();
  b.samples.resize(n_samples, d);
  NormalStream stream(seed);
  const Eigen::MatrixXd& L = kernel->sampler;
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd xi(d);
    for (std::size_t s = begin; s < end; ++s) {
      for (Eigen::Index j = 0; j < d; ++j) xi(j) = stream(s, static_cast<std::uint32_t>(j));
      b.samples.row(static_cast<Eigen::Index>(s)) = (L * xi).transpose();
    }
  });
  return b;
}

CovarianceReport covariance_check(const SampleBatch& batch, double z_tolerance) {
  const Eigen::Index n = batch.samples.rows(), d = batch.samples.cols();
  if (n == 0) throw ValidationError("covariance check needs a nonempty batch");
  const Eigen::MatrixXd& c = batch.kernel->theoretical_cov;
  CovarianceReport r;
  r.estimated_cov.resize(d, d);
  r.stderr_cov.resize(d, d);
  std::vector<double> prod(static_cast<std::size_t>(n));
  bool any_nonzero = false;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      for (Eigen::Index s = 0; s < n; ++s) prod[s] = batch.samples(s, i) * batch.samples(s, j);
      double est = pairwise_sum(prod) / static_cast<double>(n);
      r.estimated_cov(i, j) = r.estimated_cov(j, i) = est;
      double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / static_cast<double>(n));
      r.stderr_cov(i, j) = r.stderr_cov(j, i) = se;
      if (est != 0.0) any_nonzero = true;
      double dev = std::abs(est - c(i, j));
      double norm = std::sqrt(c(i, i) * c(j, j));
      if (norm > 0.0) r.max_rel_err = std::max(r.max_rel_err, dev / norm);
      if (se > 0.0)
        r.max_z = std::max(r.max_z, dev / se);
      else if (dev > 0.0)
        r.max_z = INFINITY;
    }
  }
  bool theory_nonzero = c.cwiseAbs().maxCoeff() > 0.0;
  r.consistent = r.max_z <= z_tolerance && (any_nonzero || !theory_nonzero);
  return r;
}

UncertaintyReport uncertainty_check(const SampleBatch& batch, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  const FluctuationKernel& k = *batch.kernel;
  const Eigen::Index d = batch.samples.cols();
  if (f.size() != d || g.size() != d) throw ValidationError("test functions must match the sample dimension");
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(f(i) >= 0.0) || !(g(i) >= 0.0)) throw ValidationError("test functions must be non-negative");
  if (!(f.maxCoeff() > 0.0) || !(g.maxCoeff() > 0.0)) throw ValidationError("test functions must not vanish");

  Eigen::VectorXd a = k.site_weight.cwiseProduct(f);
  Eigen::VectorXd b = 0.5 * k.constants.hbar * (k.omega_bar * g);
  const Eigen::Index n = batch.samples.rows();
  std::vector<double> prod(static_cast<std::size_t>(n)), sq(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    double dq = batch.samples.row(s).dot(a);
    double dp = batch.samples.row(s).dot(b);
    prod[s] = dq * dp;
  }
  UncertaintyReport r;
  double mean = pairwise_sum(prod) / static_cast<double>(n);
  for (Eigen::Index s = 0; s < n; ++s) sq[s] = (prod[s] - mean) * (prod[s] - mean);
  double var = n > 1 ? pairwise_sum(sq) / static_cast<double>(n - 1) : 0.0;
  r.cross_cov_estimate = mean;
  r.std_error = std::sqrt(var / static_cast<double>(n));
  r.bound = 0.5 * k.constants.hbar * a.dot(g);
  double dev = std::abs(mean - r.bound);
  r.margin = r.std_error > 0.0 ? dev / r.std_error : (dev == 0.0 ? 0.0 : INFINITY);
  return r;
}

void write_samples_csv(const SampleBatch& batch, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw ValidationError("cannot write " + path);
  for (Eigen::Index j = 0; j < batch.samples.cols(); ++j) std::fprintf(fp, j ? ",w%ld" : "w%ld", static_cast<long>(j));
  std::fputc('\n', fp);
  for (Eigen::Index s = 0; s < batch.samples.rows(); ++s) {
    for (Eigen::Index j = 0; j < batch.samples.cols(); ++j) std::fprintf(fp, j ? ",%.17g" : "%.17g", batch.samples(s, j));
    std::fputc('\n', fp);
  }
  std::fclose(fp);
}

nlohmann::ordered_json to_json(const CovarianceReport& r) {
  nlohmann::ordered_json j;
  std::vector<std::vector<double>> est, se;
  for (Eigen::Index i = 0; i < r.estimated_cov.rows(); ++i) {
    est.emplace_back(r.estimated_cov.row(i).begin(), r.estimated_cov.row(i).end());
    se.emplace_back(r.stderr_cov.row(i).begin(), r.stderr_cov.row(i).end());
  }
  j["estimated_cov"] = est;
  j["stderr"] = se;
  j["max_rel_err"] = r.max_rel_err;
  j["max_z"] = r.max_z;
  j["consistent"] = r.consistent;
  return j;
}

nlohmann::ordered_json to_json(const UncertaintyReport& r) {
  return {{"cross_cov_estimate", r.cross_cov_estimate}, {"stderr", r.std_error}, {"bound", r.bound}, {"margin", r.margin}};
}

}  // namespace entroq
