#include "entroq/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>

#include "entroq/emergent.hpp"
#include "entroq/entropy.hpp"
#include "entroq/fluctuation.hpp"
#include "entroq/madelung.hpp"
#include "entroq/variational.hpp"
#include "entroq/wdw.hpp"

namespace entroq {

namespace {

enum class Type { Real, Int, List, Text };
enum class Range { Any, Positive, NonNegative };

struct KeySpec {
  std::string key;
  Type type;
  bool required;
  std::string fallback;
  Range range = Range::Any;
  std::vector<std::string> choices = {};
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtoll(s.c_str(), &end, 10);
  return end == s.c_str() + s.size();
}

bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_real(trim(item), v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

const std::vector<KeySpec>& common_keys() {
  static const std::vector<KeySpec> k = {
      {"experiment", Type::Text, true, ""},
      {"seed", Type::Int, true, "", Range::NonNegative},
      {"output_dir", Type::Text, true, ""},
      {"space.hbar", Type::Real, false, "1", Range::Positive},
      {"space.grav", Type::Real, false, "1", Range::NonNegative},
      {"space.lapse", Type::Real, false, "1", Range::Positive},
      {"space.alpha", Type::Real, false, "1", Range::Positive},
  };
  return k;
}

std::vector<KeySpec> background_keys() {
  return {
      {"space.curvature", Type::Int, false, "0", Range::Any, {"-1", "0", "1"}},
      {"space.volume", Type::Real, false, "1", Range::Positive},
      {"space.a_min", Type::Real, false, "0.5", Range::Positive},
      {"space.a_max", Type::Real, false, "20", Range::Positive},
      {"space.a_points", Type::Int, false, "400", Range::Positive},
      {"space.phi_min", Type::Real, false, "-10"},
      {"space.phi_max", Type::Real, false, "10"},
      {"space.phi_points", Type::Int, false, "201", Range::Positive},
      {"space.p_phi", Type::Real, false, "1"},
      {"space.a0", Type::Real, false, "1", Range::Positive},
      {"space.direction", Type::Int, false, "1", Range::Any, {"-1", "1"}},
      {"space.phi0", Type::Real, false, "0"},
      {"space.phi_width", Type::Real, false, "1", Range::Positive},
      {"space.phi_momentum", Type::Real, false, "0"},
      {"numerics.dt", Type::Real, false, "1e-3", Range::Positive},
      {"numerics.steps", Type::Int, false, "200", Range::Positive},
      {"numerics.rate_tol", Type::Real, false, "1e-8", Range::Positive},
  };
}

class Params {
 public:
  Params(const ExperimentConfig& cfg, const std::vector<KeySpec>& spec) : cfg_(cfg) {
    for (const auto& k : spec) fallback_[k.key] = k.fallback;
  }
  const std::string& text(const std::string& key) const {
    auto it = cfg_.values.find(key);
    if (it != cfg_.values.end()) return it->second;
    return fallback_.at(key);
  }
  bool has(const std::string& key) const { return cfg_.values.count(key) > 0; }
  double real(const std::string& key) const {
    double v = 0.0;
    parse_real(text(key), v);
    return v;
  }
  long long integer(const std::string& key) const {
    long long v = 0;
    parse_int(text(key), v);
    return v;
  }
  std::vector<double> list(const std::string& key) const {
    std::vector<double> v;
    parse_list(text(key), v);
    return v;
  }
  PhysicalConstants constants() const {
    PhysicalConstants c;
    c.hbar = real("space.hbar");
    c.grav = real("space.grav");
    c.lapse = real("space.lapse");
    c.alpha = real("space.alpha");
    return c;
  }
  const ExperimentConfig& cfg() const { return cfg_; }

 private:
  const ExperimentConfig& cfg_;
  std::map<std::string, std::string> fallback_;
};

struct Outcome {
  std::vector<Check> checks;
  std::vector<std::string> artifacts;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();

  void check_le(const std::string& name, double measured, double tol) {
    checks.push_back({name, measured, tol, "<=", 0.0, measured <= tol});
  }
  void check_ge(const std::string& name, double measured, double tol) {
    checks.push_back({name, measured, tol, ">=", 0.0, measured >= tol});
  }
  void check_near(const std::string& name, double measured, double target, double tol) {
    checks.push_back({name, measured, tol, "abs<=", target, std::abs(measured - target) <= tol});
  }
};

namespace fs = std::filesystem;

std::string artifact(Outcome& out, const ExperimentConfig& cfg, const std::string& file) {
  out.artifacts.push_back(file);
  return (fs::path(cfg.output_dir) / file).string();
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  f << std::setprecision(17);
  return f;
}

// ---- experiments ----

Outcome run_fluct_covariance(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  const double dt = p.real("numerics.dt");
  FluctuationKernel kernel;
  if (p.text("space.sector") == "gravity") {
    kernel = build_gravity_kernel(p.real("space.metric_scale") * Eigen::Matrix3d::Identity(), dt, c);
  } else {
    LatticeSpec spec{static_cast<int>(p.integer("space.sites")), p.real("space.spacing")};
    ConfigSpace space = build_scalar_lattice_space(spec, 0.0, GridBounds{-1.0, 1.0, 3}, c);
    kernel = build_fluctuation_kernel(space, dt, c);
  }
  SampleBatch batch = sample(kernel, p.integer("numerics.samples"), cfg.seed);
  CovarianceReport rep = covariance_check(batch, p.real("numerics.z_tol"));
  {
    auto f = open_csv(artifact(out, cfg, "covariance.csv"));
    f << "i,j,estimate,stderr,theory\n";
    for (Eigen::Index i = 0; i < rep.estimated_cov.rows(); ++i)
      for (Eigen::Index j = 0; j < rep.estimated_cov.cols(); ++j)
        f << i << ',' << j << ',' << rep.estimated_cov(i, j) << ',' << rep.stderr_cov(i, j) << ','
          << kernel.theoretical_cov(i, j) << '\n';
  }
  if (p.integer("numerics.write_samples") > 0) write_samples_csv(batch, artifact(out, cfg, "samples.csv"));
  out.results["covariance"] = to_json(rep);
  out.check_le("covariance_max_rel_err", rep.max_rel_err, p.real("numerics.rel_tol"));
  out.check_le("covariance_max_z", rep.max_z, p.real("numerics.z_tol"));
  return out;
}

Outcome run_entropy_limit(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  const double s = p.real("space.width"), qmax = p.real("space.q_max");
  ConfigSpace space = build_scalar_lattice_space({1, 1.0}, 0.0, GridBounds{-qmax, qmax, static_cast<int>(p.integer("space.points"))}, c);
  Field rho(space.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    double q = space.coord(i, 0);
    rho[i] = std::exp(-0.5 * q * q / (s * s));
  }
  double m = total_mass(rho, space);
  for (double& v : rho) v /= m;
  const auto dts = p.list("sweeps.dt");
  const auto n = p.integer("numerics.samples");
  SmallDtReport rep = small_dt_limit_report(rho, space, c, dts, n, cfg.seed);
  out.results["kl"] = to_json(rep);
  out.check_le("kl_slope_rel_err", rep.relative_error, p.real("numerics.slope_tol"));

  auto f = open_csv(artifact(out, cfg, "divergence_vs_dt.csv"));
  f << "alpha,dt,value,stderr\n";
  for (std::size_t k = 0; k < dts.size(); ++k) f << 1 << ',' << dts[k] << ',' << rep.kl[k].value << ',' << rep.kl[k].std_error << '\n';
  for (double alpha : p.list("sweeps.alpha")) {
    std::vector<double> y;
    for (double dt : dts) {
      FluctuationKernel k = build_fluctuation_kernel(space, dt, c);
      DivergenceEstimate e = tsallis_mc(rho, alpha, space, k, n, cfg.seed);
      y.push_back(e.value);
      f << alpha << ',' << dt << ',' << e.value << ',' << e.std_error << '\n';
    }
    double slope = fit_line(dts, y).slope;
    double ratio = slope / rep.slope;
    char tag[32];
    std::snprintf(tag, sizeof tag, "%g", alpha);
    out.results[std::string("tsallis_ratio_alpha_") + tag] = ratio;
    out.check_le(std::string("tsallis_ratio_rel_err_alpha_") + tag, std::abs(ratio - alpha) / alpha,
                 p.real("numerics.ratio_tol"));
  }
  return out;
}

Outcome run_gibbs(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  const double hbar = p.real("space.hbar");
  Field energy;
  if (p.has("space.energy")) {
    energy = p.list("space.energy");
  } else {
    const int n = static_cast<int>(p.integer("space.points"));
    const double wmax = p.real("space.w_max"), dt = p.real("numerics.dt"), dx = p.real("space.spacing");
    for (int i = 0; i < n; ++i) {
      double w = -wmax + 2.0 * wmax * i / (n - 1);
      energy.push_back(dx * w * w / (2.0 * dt));
    }
  }
  Field prior(energy.size(), 1.0);
  GibbsResult r = gibbs_minimize(energy, hbar, prior, p.real("numerics.tol"), static_cast<int>(p.integer("numerics.max_iter")));
  write_gibbs_trace_csv(r, artifact(out, cfg, "gibbs_trace.csv"));
  // closed form for the comparison only
  double emin = *std::min_element(energy.begin(), energy.end());
  Field ref(energy.size());
  double z = 0.0;
  for (std::size_t i = 0; i < energy.size(); ++i) z += ref[i] = std::exp(-2.0 * (energy[i] - emin) / hbar);
  double sup = 0.0;
  auto f = open_csv(artifact(out, cfg, "gibbs_density.csv"));
  f << "node,energy,p,closed_form\n";
  for (std::size_t i = 0; i < energy.size(); ++i) {
    ref[i] /= z;
    sup = std::max(sup, std::abs(r.p[i] - ref[i]));
    f << i << ',' << energy[i] << ',' << r.p[i] << ',' << ref[i] << '\n';
  }
  out.results["iterations"] = r.iterations;
  out.results["kkt"] = r.kkt;
  out.check_le("gibbs_sup_norm", sup, p.real("numerics.sup_tol"));
  return out;
}

Outcome run_madelung_equivalence(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  const int levels = static_cast<int>(p.integer("numerics.levels"));
  const int points = static_cast<int>(p.integer("space.points"));
  const double q0 = p.real("space.q0"), s2 = p.real("space.s2"), t_end = p.real("numerics.t_end");
  std::vector<double> errors;
  double drift = 0.0;
  auto f = open_csv(artifact(out, cfg, "equivalence.csv"));
  f << "level,points,dt,steps,l2_error,max_norm_drift\n";
  for (int level = 0; level < levels; ++level) {
    const int np = (points - 1) * (1 << level) + 1;
    const double dt = p.real("numerics.dt") / (1 << level);
    const int steps = static_cast<int>(std::llround(t_end / dt));
    Axis ax{"q", p.real("space.q_min"), p.real("space.q_max"), np};
    Field kin(np, 0.5), pot(np), meas(np, 1.0), rho(np);
    for (int i = 0; i < np; ++i) {
      double q = ax.at(i);
      pot[i] = 0.5 * q * q;
      rho[i] = std::exp(-(q - q0) * (q - q0) / (2.0 * s2));
    }
    ConfigSpace space = make_custom_space(SpaceKind::ScalarLattice, {ax}, {kin}, pot, meas, c);
    double m = total_mass(rho, space);
    for (double& v : rho) v /= m;
    EnsembleState e0{rho, Field(np, 0.0), 0.0};
    MadelungRun mr = evolve_madelung(e0, space, c, dt, steps);
    SchrodingerRun sr = evolve_schrodinger(wave_from_ensemble(e0, c), space, c, dt, steps);
    WaveState wm = wave_from_ensemble(mr.trajectory.back(), c);
    const WaveState& ws = sr.trajectory.back();
    const Field w = space.quadrature();
    double l2 = 0.0;
    for (int i = 0; i < np; ++i) l2 += w[i] * std::norm(wm.psi[i] - ws.psi[i]);
    l2 = std::sqrt(l2);
    errors.push_back(l2);
    drift = std::max(drift, sr.max_norm_drift);
    f << level << ',' << np << ',' << dt << ',' << steps << ',' << l2 << ',' << sr.max_norm_drift << '\n';
    if (level == 0) {
      write_trajectory_csv({mr.trajectory.back()}, space, c, artifact(out, cfg, "madelung_final.csv"));
      write_wave_csv(ws, space, artifact(out, cfg, "schrodinger_final.csv"));
    }
  }
  out.results["l2_errors"] = errors;
  out.check_le("l2_discrepancy", errors.front(), p.real("numerics.l2_tol"));
  if (errors.size() >= 2) out.check_ge("refinement_ratio", errors[0] / errors[1], p.real("numerics.order_min"));
  out.check_le("norm_drift_per_step", drift, p.real("numerics.drift_tol"));
  return out;
}

ConfigSpace frw_from(const Params& p, const PhysicalConstants& c, const char* points_key) {
  return build_frw_space(static_cast<int>(p.integer("space.curvature")), p.real("space.volume"),
                         GridBounds{p.real("space.a_min"), p.real("space.a_max"), static_cast<int>(p.integer(points_key))}, c);
}

double max_abs(const Eigen::SparseMatrix<double>& m) {
  double v = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
  return v;
}

Outcome run_wdw_ordering(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  ConfigSpace space = frw_from(p, c, "space.a_points");
  WdwOperator paper = build_wdw_operator(space, c, Ordering::Paper);
  WdwOperator naive = build_wdw_operator(space, c, Ordering::Naive);
  write_operator_coo(paper, artifact(out, cfg, "operator_paper.coo"));
  write_operator_coo(naive, artifact(out, cfg, "operator_naive.coo"));
  const double rel = (paper.matrix - naive.matrix).norm() / paper.matrix.norm();
  out.check_ge("ordering_relative_difference", rel, p.real("numerics.diff_min"));

  ConfigSpace flat = space;
  for (double& v : flat.kinetic[0]) v = space.kinetic[0][space.size() / 2];
  const double same = max_abs(build_wdw_operator(flat, c, Ordering::Paper).matrix -
                              build_wdw_operator(flat, c, Ordering::Naive).matrix);
  out.check_le("constant_coefficient_difference", same, 0.0);

  const double alpha = p.real("space.alpha");
  Eigen::SparseMatrix<double> split = alpha * paper.kinetic_unit + paper.potential;
  out.check_le("alpha_decomposition", max_abs(paper.matrix - split), 0.0);

  const long n = static_cast<long>(space.size());
  Eigen::SparseMatrix<double> kin = paper.kinetic_unit.block(1, 1, n - 2, n - 2);
  Eigen::SparseMatrix<double> kt = kin.transpose();
  out.check_le("interior_symmetry", max_abs(kin - kt) / max_abs(kin), 1e-12);
  out.results["relative_difference"] = rel;
  return out;
}

Outcome run_wdw_solve(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  ConfigSpace space = frw_from(p, c, "space.a_points");
  WdwOperator op = build_wdw_operator(space, c, Ordering::Paper);
  WdwBoundary b;
  const bool exact = p.text("space.boundary") == "exact";
  const double beta = 3.0 * space.fiducial_volume / (8.0 * kPi * c.grav * c.hbar * std::sqrt(c.alpha));
  auto mode = [&](double a) { return std::polar(1.0, beta * a * a); };
  if (exact) {
    b.left = mode(space.axes[0].min);
    b.right = mode(space.axes[0].max);
  } else {
    b.left = {p.real("space.left_re"), p.real("space.left_im")};
    b.right = {p.real("space.right_re"), p.real("space.right_im")};
  }
  WdwSolution sol = solve_wdw(op, b, p.real("numerics.tol"));
  write_wave_csv(WaveState{sol.raw, 0.0}, space, artifact(out, cfg, "solution.csv"));
  out.check_le("zero_mode_residual", sol.residual, p.real("numerics.tol"));
  if (exact) {
    double err = 0.0;
    for (std::size_t i = 0; i < space.size(); ++i) err = std::max(err, std::abs(sol.raw[i] - mode(space.coord(i, 0))));
    out.check_le("exact_mode_error", err, p.real("numerics.exact_tol"));
    ResidualReport split = madelung_split_residual(WaveState{sol.raw, 0.0}, space, c);
    std::ofstream(artifact(out, cfg, "split_residuals.json")) << to_json(split).dump(2) << '\n';
    out.check_le("split_gap_real", split.at("gap_real").residual_norm, p.real("numerics.split_tol"));
    out.check_le("split_gap_imag", split.at("gap_imag").residual_norm, p.real("numerics.split_tol"));
    out.results["split"] = to_json(split);
  }
  return out;
}

struct EmergentSetup {
  ConfigSpace frw;
  ConfigSpace coupled;
  BackgroundTrajectory bg;
  EmergentRun run;
};

EmergentSetup setup_emergent(const Params& p, const PhysicalConstants& c, bool corrections) {
  EmergentSetup s;
  s.frw = frw_from(p, c, "space.a_points");
  s.coupled = build_coupled_space(
      s.frw, GridBounds{p.real("space.phi_min"), p.real("space.phi_max"), static_cast<int>(p.integer("space.phi_points"))}, c);
  const double dt = p.real("numerics.dt");
  const int steps = static_cast<int>(p.integer("numerics.steps"));
  BackgroundOptions bo;
  bo.a0 = p.real("space.a0");
  bo.direction = static_cast<int>(p.integer("space.direction"));
  bo.p_phi = p.real("space.p_phi");
  bo.t_max = dt * steps;
  bo.samples = steps + 1;
  s.bg = solve_background(s.frw, c, bo);
  const Axis& phi = s.coupled.axes[1];
  CField psi(phi.points);
  const double x0 = p.real("space.phi0"), width = p.real("space.phi_width"), k = p.real("space.phi_momentum");
  double norm = 0.0;
  for (int j = 0; j < phi.points; ++j) {
    double x = phi.at(j);
    psi[j] = (j == 0 || j == phi.points - 1) ? Complex(0.0)
                                             : std::polar(std::exp(-0.25 * (x - x0) * (x - x0) / (width * width)), k * x / c.hbar);
    norm += phi.step() * std::norm(psi[j]);
  }
  for (auto& v : psi) v /= std::sqrt(norm);
  s.run = make_emergent_run(s.coupled, psi, 0.0, bo.a0, EmergentOptions{corrections, c.alpha});
  return s;
}

void write_background_csv(const BackgroundTrajectory& bg, const std::string& path) {
  auto f = open_csv(path);
  f << "t,a,adot\n";
  for (std::size_t k = 0; k < bg.times.size(); ++k) f << bg.times[k] << ',' << bg.a[k] << ',' << bg.adot[k] << '\n';
}

Outcome run_emergent(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  const bool corrections = p.integer("numerics.corrections") != 0;
  EmergentSetup s = setup_emergent(p, c, corrections);
  write_background_csv(s.bg, artifact(out, cfg, "background.csv"));
  if (s.bg.truncated) throw NumericalError("background truncated: " + s.bg.reason);
  evolve_emergent(s.run, s.bg, c, p.real("numerics.dt"), static_cast<int>(p.integer("numerics.steps")));
  write_emergent_log_csv(s.run, artifact(out, cfg, "emergent_log.csv"));
  out.check_le("rate_residual", rate_residual(s.bg, s.frw, c), p.real("numerics.rate_tol"));
  double drift = 0.0, prev = 1.0;
  for (const auto& r : s.run.log) {
    drift = std::max(drift, std::abs(r.norm - prev));
    prev = r.norm;
  }
  out.results["max_norm_change_per_step"] = drift;
  out.results["truncated"] = s.bg.truncated;
  if (!corrections) out.check_le("norm_change_per_step", drift, p.real("numerics.norm_tol"));
  return out;
}

Outcome run_suppression(const Params& p) {
  Outcome out;
  const auto& cfg = p.cfg();
  PhysicalConstants c = p.constants();
  EmergentSetup s = setup_emergent(p, c, true);
  if (s.bg.truncated) throw NumericalError("background truncated: " + s.bg.reason);
  evolve_emergent(s.run, s.bg, c, p.real("numerics.dt"), static_cast<int>(p.integer("numerics.steps")));
  SuppressionReport rep = suppression_scan(s.run, c, p.list("sweeps.grav"), p.list("sweeps.hbar"));
  auto f = open_csv(artifact(out, cfg, "suppression.csv"));
  f << "sweep,value,ratio\n";
  for (std::size_t i = 0; i < rep.grav.size(); ++i) f << "grav," << rep.grav[i] << ',' << rep.ratio_grav[i] << '\n';
  for (std::size_t i = 0; i < rep.hbar.size(); ++i) f << "hbar," << rep.hbar[i] << ',' << rep.ratio_hbar[i] << '\n';
  out.results["suppression"] = to_json(rep);
  const double tol = p.real("numerics.slope_tol");
  out.check_near("slope_grav", rep.slope_grav, 1.0, tol);
  out.check_near("slope_hbar", rep.slope_hbar, 2.0, tol);
  for (std::size_t i = 0; i < rep.grav.size(); ++i)
    if (rep.grav[i] == 0.0) out.check_le("ratio_at_zero_grav", rep.ratio_grav[i], 0.0);
  return out;
}

struct Experiment {
  ExperimentInfo info;
  std::vector<KeySpec> keys;
  std::function<Outcome(const Params&)> run;
};

std::vector<KeySpec> with(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> r = [] {
    std::vector<Experiment> v;
    v.push_back({{"emergent", "background rate equation and emergent-time evolution of the matter wave", {}},
                 with(background_keys(), {{"numerics.corrections", Type::Int, false, "1", Range::NonNegative},
                                          {"numerics.norm_tol", Type::Real, false, "1e-6", Range::Positive}}),
                 run_emergent});
    v.push_back({{"entropy-limit", "Monte Carlo relative entropy against the Fisher small-dt limit", {}},
                 {{"space.width", Type::Real, false, "1", Range::Positive},
                  {"space.q_max", Type::Real, false, "14", Range::Positive},
                  {"space.points", Type::Int, false, "281", Range::Positive},
                  {"sweeps.dt", Type::List, true, "", Range::Positive},
                  {"sweeps.alpha", Type::List, false, "0.5,2", Range::Positive},
                  {"numerics.samples", Type::Int, true, "", Range::Positive},
                  {"numerics.slope_tol", Type::Real, false, "0.02", Range::Positive},
                  {"numerics.ratio_tol", Type::Real, false, "0.03", Range::Positive}},
                 run_entropy_limit});
    v.push_back({{"fluct-covariance", "sample the Gaussian fluctuation law and compare its covariance", {}},
                 {{"space.sector", Type::Text, false, "scalar", Range::Any, {"scalar", "gravity"}},
                  {"space.sites", Type::Int, false, "1", Range::Positive},
                  {"space.spacing", Type::Real, false, "1", Range::Positive},
                  {"space.metric_scale", Type::Real, false, "1", Range::Positive},
                  {"numerics.dt", Type::Real, true, "", Range::Positive},
                  {"numerics.samples", Type::Int, true, "", Range::Positive},
                  {"numerics.rel_tol", Type::Real, false, "0.01", Range::Positive},
                  {"numerics.z_tol", Type::Real, false, "5", Range::Positive},
                  {"numerics.write_samples", Type::Int, false, "0", Range::NonNegative}},
                 run_fluct_covariance});
    v.push_back({{"gibbs", "entropy-regularized minimization against the closed-form Gibbs law", {}},
                 {{"space.energy", Type::List, false, ""},
                  {"space.points", Type::Int, false, "201", Range::Positive},
                  {"space.w_max", Type::Real, false, "0.15", Range::Positive},
                  {"space.spacing", Type::Real, false, "1", Range::Positive},
                  {"numerics.dt", Type::Real, false, "1e-3", Range::Positive},
                  {"numerics.tol", Type::Real, false, "1e-11", Range::Positive},
                  {"numerics.max_iter", Type::Int, false, "10000", Range::Positive},
                  {"numerics.sup_tol", Type::Real, false, "1e-8", Range::Positive}},
                 run_gibbs});
    v.push_back({{"madelung-equivalence", "Madelung pair against Crank-Nicolson for an oscillator packet", {}},
                 {{"space.q_min", Type::Real, false, "-6"},
                  {"space.q_max", Type::Real, false, "6"},
                  {"space.points", Type::Int, false, "512", Range::Positive},
                  {"space.q0", Type::Real, false, "1"},
                  {"space.s2", Type::Real, false, "0.5", Range::Positive},
                  {"numerics.dt", Type::Real, false, "2.5e-4", Range::Positive},
                  {"numerics.t_end", Type::Real, false, "1", Range::Positive},
                  {"numerics.levels", Type::Int, false, "2", Range::Positive},
                  {"numerics.l2_tol", Type::Real, false, "1e-3", Range::Positive},
                  {"numerics.order_min", Type::Real, false, "3.5", Range::Positive},
                  {"numerics.drift_tol", Type::Real, false, "1e-10", Range::Positive}},
                 run_madelung_equivalence});
    v.push_back({{"suppression", "scaling of the gravitational corrections with grav and hbar", {"sweeps.grav", "sweeps.hbar"}},
                 with(background_keys(), {{"sweeps.grav", Type::List, true, "", Range::NonNegative},
                                          {"sweeps.hbar", Type::List, true, "", Range::Positive},
                                          {"numerics.slope_tol", Type::Real, false, "0.05", Range::Positive}}),
                 run_suppression});
    v.push_back({{"wdw-ordering", "divergence-form against naive factor ordering of the constraint operator", {}},
                 {{"space.curvature", Type::Int, false, "1", Range::Any, {"-1", "0", "1"}},
                  {"space.volume", Type::Real, false, "1", Range::Positive},
                  {"space.a_min", Type::Real, false, "0.5", Range::Positive},
                  {"space.a_max", Type::Real, false, "3", Range::Positive},
                  {"space.a_points", Type::Int, false, "200", Range::Positive},
                  {"numerics.diff_min", Type::Real, false, "1e-3", Range::Positive}},
                 run_wdw_ordering});
    v.push_back({{"wdw-solve", "zero mode of the constraint operator and its Madelung split", {}},
                 {{"space.curvature", Type::Int, false, "-1", Range::Any, {"-1", "0", "1"}},
                  {"space.volume", Type::Real, false, "4.3864908449286237", Range::Positive},
                  {"space.a_min", Type::Real, false, "1", Range::Positive},
                  {"space.a_max", Type::Real, false, "3", Range::Positive},
                  {"space.a_points", Type::Int, false, "400", Range::Positive},
                  {"space.boundary", Type::Text, false, "exact", Range::Any, {"exact", "values"}},
                  {"space.left_re", Type::Real, false, "1"},
                  {"space.left_im", Type::Real, false, "0"},
                  {"space.right_re", Type::Real, false, "1"},
                  {"space.right_im", Type::Real, false, "0"},
                  {"numerics.tol", Type::Real, false, "1e-8", Range::Positive},
                  {"numerics.exact_tol", Type::Real, false, "1e-3", Range::Positive},
                  {"numerics.split_tol", Type::Real, false, "1e-2", Range::Positive}},
                 run_wdw_solve});
    for (auto& e : v) {
      std::vector<std::string> req;
      for (const auto& k : common_keys())
        if (k.required) req.push_back(k.key);
      for (const auto& k : e.keys)
        if (k.required) req.push_back(k.key);
      e.info.required = req;
    }
    std::sort(v.begin(), v.end(), [](const Experiment& a, const Experiment& b) { return a.info.name < b.info.name; });
    return v;
  }();
  return r;
}

const Experiment* find_experiment(const std::string& name) {
  for (const auto& e : registry())
    if (e.info.name == name) return &e;
  return nullptr;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string check_key(const KeySpec& k, const std::string& value) {
  if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), value) == k.choices.end()) {
    std::string opts;
    for (const auto& c : k.choices) opts += (opts.empty() ? "" : ", ") + c;
    return k.key + ": '" + value + "' is not one of {" + opts + "}";
  }
  std::vector<double> nums;
  switch (k.type) {
    case Type::Text:
      if (value.empty()) return k.key + ": value is empty";
      return "";
    case Type::Int: {
      long long v;
      if (!parse_int(value, v)) return k.key + ": '" + value + "' is not an integer";
      nums.push_back(static_cast<double>(v));
      break;
    }
    case Type::Real: {
      double v;
      if (!parse_real(value, v)) return k.key + ": '" + value + "' is not a finite number";
      nums.push_back(v);
      break;
    }
    case Type::List:
      if (!parse_list(value, nums)) return k.key + ": '" + value + "' is not a comma-separated list of numbers";
      break;
  }
  for (double v : nums) {
    if (k.range == Range::Positive && !(v > 0.0)) return k.key + ": must be > 0 (got " + value + ")";
    if (k.range == Range::NonNegative && !(v >= 0.0)) return k.key + ": must be >= 0 (got " + value + ")";
  }
  return "";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("line " + std::to_string(no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("line " + std::to_string(no) + ": empty key");
    if (!cfg.values.emplace(key, value).second)
      throw ValidationError("line " + std::to_string(no) + ": duplicate key '" + key + "'");
  }
  if (auto it = cfg.values.find("experiment"); it != cfg.values.end()) cfg.experiment = it->second;
  if (auto it = cfg.values.find("output_dir"); it != cfg.values.end()) cfg.output_dir = it->second;
  if (auto it = cfg.values.find("seed"); it != cfg.values.end()) {
    long long s;
    if (parse_int(it->second, s) && s >= 0) cfg.seed = static_cast<std::uint64_t>(s);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::vector<ExperimentInfo> experiments() {
  std::vector<ExperimentInfo> v;
  for (const auto& e : registry()) v.push_back(e.info);
  return v;
}

std::string list_experiments() {
  std::ostringstream out;
  for (const auto& e : registry()) {
    out << std::left << std::setw(22) << e.info.name << e.info.description << "\n" << std::setw(22) << "";
    out << "required:";
    for (const auto& k : e.info.required) out << ' ' << k;
    out << '\n';
  }
  return out.str();
}

std::string nearest_experiment(const std::string& name) {
  std::string best;
  std::size_t d = std::string::npos;
  for (const auto& e : registry()) {
    std::size_t x = edit_distance(name, e.info.name);
    if (x < d) d = x, best = e.info.name;
  }
  return best;
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto it = cfg.values.find("experiment");
  const Experiment* exp = nullptr;
  if (it == cfg.values.end()) {
    errors.push_back("experiment: missing required key");
  } else if (!(exp = find_experiment(it->second))) {
    errors.push_back("experiment: unknown name '" + it->second + "' (did you mean '" + nearest_experiment(it->second) + "'?)");
  }
  std::vector<KeySpec> spec = common_keys();
  if (exp) spec.insert(spec.end(), exp->keys.begin(), exp->keys.end());
  for (const auto& k : spec) {
    auto v = cfg.values.find(k.key);
    if (v == cfg.values.end()) {
      if (k.required) errors.push_back(k.key + ": missing required key");
      continue;
    }
    if (k.key == "experiment") continue;
    std::string e = check_key(k, v->second);
    if (!e.empty()) errors.push_back(e);
  }
  if (exp)
    for (const auto& [key, value] : cfg.values) {
      bool known = std::any_of(spec.begin(), spec.end(), [&](const KeySpec& k) { return k.key == key; });
      if (!known) errors.push_back(key + ": unknown key for experiment '" + exp->info.name + "'");
    }
  if (exp && errors.empty()) {
    Params p(cfg, spec);
    auto bad_range = [&](const char* lo, const char* hi) {
      if (std::find_if(spec.begin(), spec.end(), [&](const KeySpec& k) { return k.key == lo; }) == spec.end()) return;
      if (!(p.real(lo) < p.real(hi))) errors.push_back(std::string(hi) + ": must exceed " + lo);
    };
    bad_range("space.a_min", "space.a_max");
    bad_range("space.phi_min", "space.phi_max");
    bad_range("space.q_min", "space.q_max");
    if (exp->info.name == "wdw-solve" && p.text("space.boundary") == "exact" && p.integer("space.curvature") != -1)
      errors.push_back("space.boundary: 'exact' is available only for space.curvature = -1");
  }
  return errors;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  std::vector<std::string> errors = validate_config(cfg);
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  const Experiment* exp = find_experiment(cfg.experiment);
  std::vector<KeySpec> spec = common_keys();
  spec.insert(spec.end(), exp->keys.begin(), exp->keys.end());
  Params params(cfg, spec);

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ValidationError("cannot create output_dir '" + cfg.output_dir + "': " + ec.message());

  auto t0 = std::chrono::steady_clock::now();
  Outcome out = exp->run(params);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunResult r;
  r.pass = std::all_of(out.checks.begin(), out.checks.end(), [](const Check& c) { return c.pass; });
  nlohmann::ordered_json m;
  m["experiment"] = cfg.experiment;
  m["seed"] = cfg.seed;
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& k : spec) echo[k.key] = params.has(k.key) || k.required ? params.text(k.key) : k.fallback;
  m["config"] = echo;
  m["versions"] = {{"entroq", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION},
                   {"compiler", __VERSION__}};
  m["wall_clock_seconds"] = wall;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : out.checks) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["measured"] = c.measured;
    j["comparison"] = c.comparison;
    if (c.comparison == "abs<=") j["target"] = c.target;
    j["tolerance"] = c.tolerance;
    j["pass"] = c.pass;
    checks.push_back(j);
  }
  m["checks"] = checks;
  m["results"] = out.results;
  out.artifacts.push_back("manifest.json");
  m["artifacts"] = out.artifacts;
  m["pass"] = r.pass;
  std::ofstream(std::filesystem::path(cfg.output_dir) / "manifest.json") << m.dump(2) << '\n';
  r.manifest = std::move(m);
  return r;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"entroq: entropic quantization experiments"};
  app.require_subcommand(1);
  std::string run_path, validate_path;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", run_path, "config file")->required();
  auto* list = app.add_subcommand("list", "list experiments");
  auto* val = app.add_subcommand("validate", "validate a config without running it");
  val->add_option("config", validate_path, "config file")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*list) {
      std::cout << list_experiments();
      return 0;
    }
    if (*val) {
      auto errors = validate_config(load_config(validate_path));
      if (errors.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      for (const auto& e : errors) std::cerr << e << '\n';
      return 2;
    }
    RunResult r = run_experiment(load_config(run_path));
    for (const auto& c : r.manifest["checks"])
      std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << ' '
                << std::setprecision(17) << c["measured"].get<double>() << '\n';
    return r.pass ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace entroq
