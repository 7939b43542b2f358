#include "entroq/entropy.hpp"

#include <array>
#include <cmath>

#include "entroq/rng.hpp"

namespace entroq {

namespace {

void check_density(const Field& rho, const ConfigSpace& space) {
  if (rho.size() != space.size()) throw ValidationError("density does not match the grid");
  for (double v : rho)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("density must be finite and non-negative");
  double m = total_mass(rho, space);
  if (std::abs(m - 1.0) > 1e-8) throw ValidationError("density is not normalized (mass " + std::to_string(m) + ")");
}

// Lagrange weights on nodes -1, 0, 1, 2 at offset x
std::array<double, 4> lagrange4(double x) {
  return {-x * (x - 1.0) * (x - 2.0) / 6.0, (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
          -(x + 1.0) * x * (x - 2.0) / 2.0, (x + 1.0) * x * (x - 1.0) / 6.0};
}

struct AxisShift {
  std::vector<std::array<int, 4>> idx;
  std::vector<std::array<double, 4>> w;
  std::vector<char> inside;
};

AxisShift make_shift(const Axis& ax, double shift, bool periodic) {
  const int m = ax.points;
  const double s = shift / ax.step();
  AxisShift r;
  r.idx.resize(m);
  r.w.resize(m);
  r.inside.assign(m, 1);
  for (int i = 0; i < m; ++i) {
    double t = i + s;
    double fl = std::floor(t);
    int base = static_cast<int>(fl) - 1;
    if (periodic) {
      r.w[i] = lagrange4(t - fl);
      for (int k = 0; k < 4; ++k) r.idx[i][k] = ((base + k) % m + m) % m;
    } else {
      if (t < 0.0 || t > m - 1) r.inside[i] = 0;
      base = std::clamp(base, 0, m - 4);
      r.w[i] = lagrange4(t - base - 1.0);
      for (int k = 0; k < 4; ++k) r.idx[i][k] = base + k;
    }
  }
  return r;
}

struct Prepared {
  std::vector<std::size_t> nodes;
  std::vector<std::vector<int>> index;  // per support node, per axis
  Field log_rho, mass;                  // per support node
  Field rho;                            // normalized, all nodes
};

Prepared prepare(const Field& rho, const ConfigSpace& space, const FluctuationKernel& kernel, const DivergenceOptions& opt) {
  check_density(rho, space);
  if (kernel.dim() != static_cast<Eigen::Index>(space.dims()))
    throw ValidationError("kernel dimension does not match the number of axes");
  Prepared p;
  double m = total_mass(rho, space);
  p.rho.resize(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) p.rho[i] = rho[i] / m;
  Field w = space.quadrature();
  const std::size_t d = space.dims();
  std::vector<int> lo(d, 1 << 30), hi(d, -1);
  for (std::size_t node = 0; node < rho.size(); ++node) {
    if (p.rho[node] < kDensityFloor) continue;
    p.nodes.push_back(node);
    std::vector<int> ix(d);
    for (std::size_t a = 0; a < d; ++a) {
      ix[a] = space.index(node, a);
      lo[a] = std::min(lo[a], ix[a]);
      hi[a] = std::max(hi[a], ix[a]);
    }
    p.index.push_back(std::move(ix));
    p.log_rho.push_back(std::log(p.rho[node]));
    p.mass.push_back(w[node] * p.rho[node]);
  }
  if (!opt.periodic && !p.nodes.empty()) {
    double margin = 6.0 * std::sqrt(std::max(0.0, kernel.theoretical_cov.diagonal().maxCoeff()));
    for (std::size_t a = 0; a < d; ++a) {
      const Axis& ax = space.axes[a];
      if (ax.at(lo[a]) - ax.min < margin || ax.max - ax.at(hi[a]) < margin)
        throw ValidationError("grid padding on axis '" + ax.name + "' is below 6 standard deviations of the kernel");
    }
  }
  return p;
}

// sum over support nodes of mass * phi(log rho - log rho_shifted)
template <class Phi>
double shifted_sum(const Prepared& p, const ConfigSpace& space, const Eigen::VectorXd& w, bool periodic, Phi phi) {
  const std::size_t d = space.dims();
  std::vector<AxisShift> sh;
  sh.reserve(d);
  for (std::size_t a = 0; a < d; ++a) sh.push_back(make_shift(space.axes[a], w(static_cast<Eigen::Index>(a)), periodic));
  std::vector<std::size_t> stride(d);
  for (std::size_t a = 0; a < d; ++a) stride[a] = space.stride(a);
  std::size_t combos = 1;
  for (std::size_t a = 0; a < d; ++a) combos *= 4;

  Field terms(p.nodes.size());
  for (std::size_t k = 0; k < p.nodes.size(); ++k) {
    const auto& ix = p.index[k];
    for (std::size_t a = 0; a < d; ++a)
      if (!sh[a].inside[ix[a]]) throw NumericalError("shifted support left the grid");
    double v = 0.0;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t rem = c, node = 0;
      double wt = 1.0;
      for (std::size_t a = 0; a < d; ++a) {
        std::size_t j = rem % 4;
        rem /= 4;
        wt *= sh[a].w[ix[a]][j];
        node += static_cast<std::size_t>(sh[a].idx[ix[a]][j]) * stride[a];
      }
      v += wt * p.rho[node];
    }
    double lr = std::log(std::max(v, kDensityFloor));
    terms[k] = p.mass[k] * phi(p.log_rho[k] - lr);
  }
  return pairwise_sum(terms);
}

template <class Phi>
DivergenceEstimate estimate(const Field& rho, const ConfigSpace& space, const FluctuationKernel& kernel, std::int64_t n,
                            std::uint64_t seed, const DivergenceOptions& opt, Phi phi) {
  if (n < 1) throw ValidationError("sample count must be at least 1");
  Prepared p = prepare(rho, space, kernel, opt);
  const Eigen::Index d = kernel.dim();
  NormalStream stream(seed);
  Field vals(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
    Eigen::VectorXd xi(d);
    for (std::size_t s = b; s < e; ++s) {
      for (Eigen::Index j = 0; j < d; ++j) xi(j) = stream(s, static_cast<std::uint32_t>(j));
      Eigen::VectorXd w = kernel.sampler * xi;
      vals[s] = 0.5 * (shifted_sum(p, space, w, opt.periodic, phi) + shifted_sum(p, space, -w, opt.periodic, phi));
    }
  }, 64);
  DivergenceEstimate r;
  r.n_samples = n;
  r.value = pairwise_sum(vals) / static_cast<double>(n);
  Field sq(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) sq[i] = (vals[i] - r.value) * (vals[i] - r.value);
  r.std_error = n > 1 ? std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return r;
}

}  // namespace

double total_mass(const Field& rho, const ConfigSpace& space) {
  Field w = space.quadrature();
  Field t(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) t[i] = w[i] * rho[i];
  return pairwise_sum(t);
}

double fisher_functional(const Field& rho, const ConfigSpace& space, const PhysicalConstants& constants, Field* grad,
                         bool require_normalized) {
  if (require_normalized)
    check_density(rho, space);
  else if (rho.size() != space.size())
    throw ValidationError("density does not match the grid");
  const std::size_t n = space.size();
  Field w = space.quadrature();
  Field terms(n, 0.0);
  if (grad) grad->assign(n, 0.0);
  for (std::size_t a = 0; a < space.dims(); ++a) {
    Field d = gradient(space, rho, a);
    Field flux(n, 0.0);
    for (std::size_t q = 0; q < n; ++q) {
      if (rho[q] < kDensityFloor) continue;
      double wt = 2.0 * constants.lapse * space.kinetic[a][q];
      terms[q] += w[q] * wt * d[q] * d[q] / rho[q];
      if (grad) {
        (*grad)[q] -= w[q] * wt * d[q] * d[q] / (rho[q] * rho[q]);
        flux[q] = 2.0 * w[q] * wt * d[q] / rho[q];
      }
    }
    if (grad) {
      Eigen::SparseMatrix<double> D = derivative_matrix(space, a);
      Eigen::Map<const Eigen::VectorXd> fx(flux.data(), static_cast<Eigen::Index>(n));
      Eigen::VectorXd back = D.transpose() * fx;
      for (std::size_t q = 0; q < n; ++q) (*grad)[q] += back(static_cast<Eigen::Index>(q));
    }
  }
  return pairwise_sum(terms);
}

DivergenceEstimate kl_mc(const Field& rho, const ConfigSpace& space, const FluctuationKernel& kernel, std::int64_t n,
                         std::uint64_t seed, const DivergenceOptions& opt) {
  auto r = estimate(rho, space, kernel, n, seed, opt, [](double l) { return l; });
  r.alpha = 1.0;
  return r;
}

DivergenceEstimate tsallis_mc(const Field& rho, double alpha, const ConfigSpace& space, const FluctuationKernel& kernel,
                              std::int64_t n, std::uint64_t seed, const DivergenceOptions& opt) {
  if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha)) throw ValidationError("Tsallis order must be in (0,1) or (1,inf)");
  const double am1 = alpha - 1.0;
  // rho^alpha rho~^(1-alpha) = rho * exp((alpha-1) log(rho/rho~)), kept in log form against overflow
  auto r = estimate(rho, space, kernel, n, seed, opt, [am1](double l) { return std::expm1(am1 * l) / am1; });
  r.alpha = alpha;
  return r;
}

SmallDtReport small_dt_limit_report(const Field& rho, const ConfigSpace& space, const PhysicalConstants& constants,
                                    const std::vector<double>& dt_list, std::int64_t n, std::uint64_t seed,
                                    double reference_a, const DivergenceOptions& opt) {
  if (dt_list.size() < 2) throw ValidationError("small-dt report needs at least two dt values");
  double lo = *std::min_element(dt_list.begin(), dt_list.end());
  double hi = *std::max_element(dt_list.begin(), dt_list.end());
  if (!(lo > 0.0)) throw ValidationError("dt values must be positive");
  if (hi == lo) throw ValidationError("small-dt fit is degenerate: all dt equal");
  if (hi < 10.0 * lo) throw ValidationError("dt values must span at least one decade");
  SmallDtReport r;
  r.dt = dt_list;
  std::vector<double> y;
  for (double dt : dt_list) {
    auto k = build_fluctuation_kernel(space, dt, constants, reference_a);
    r.kl.push_back(kl_mc(rho, space, k, n, seed, opt));
    y.push_back(r.kl.back().value);
  }
  auto fit = fit_line(dt_list, y);
  r.slope = fit.slope;
  r.intercept = fit.intercept;
  r.fit_residual = fit.residual_rms;
  r.fisher = fisher_functional(rho, space, constants);
  r.fisher_prediction = 0.25 * constants.hbar * r.fisher;
  double p = std::abs(r.fisher_prediction);
  r.relative_error = p > 0.0 ? std::abs(std::abs(r.slope) - p) / p : std::abs(r.slope);
  return r;
}

double interpolate_cubic(const ConfigSpace& space, const Field& f, const std::vector<double>& q) {
  const std::size_t d = space.dims();
  if (q.size() != d) throw ValidationError("query point has the wrong dimension");
  std::vector<std::array<int, 4>> idx(d);
  std::vector<std::array<double, 4>> wt(d);
  for (std::size_t a = 0; a < d; ++a) {
    const Axis& ax = space.axes[a];
    double t = (q[a] - ax.min) / ax.step();
    if (t < -1e-12 || t > ax.points - 1 + 1e-12) throw ValidationError("query point outside the grid");
    int base = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, ax.points - 4);
    wt[a] = lagrange4(t - base - 1.0);
    for (int k = 0; k < 4; ++k) idx[a][k] = base + k;
  }
  std::size_t combos = 1;
  for (std::size_t a = 0; a < d; ++a) combos *= 4;
  double v = 0.0;
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rem = c, node = 0;
    double w = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      std::size_t j = rem % 4;
      rem /= 4;
      w *= wt[a][j];
      node += static_cast<std::size_t>(idx[a][j]) * space.stride(a);
    }
    v += w * f[node];
  }
  return v;
}

nlohmann::ordered_json to_json(const DivergenceEstimate& d) {
  return {{"value", d.value}, {"stderr", d.std_error}, {"n_samples", d.n_samples}, {"alpha", d.alpha}};
}

nlohmann::ordered_json to_json(const SmallDtReport& r) {
  nlohmann::ordered_json j;
  j["dt"] = r.dt;
  j["kl"] = nlohmann::ordered_json::array();
  for (const auto& k : r.kl) j["kl"].push_back(to_json(k));
  j["slope"] = r.slope;
  j["intercept"] = r.intercept;
  j["fit_residual"] = r.fit_residual;
  j["fisher"] = r.fisher;
  j["fisher_prediction"] = r.fisher_prediction;
  j["relative_error"] = r.relative_error;
  return j;
}

}  // namespace entroq
