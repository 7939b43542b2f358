#include "entroq/emergent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "entroq/frw_table.hpp"

namespace entroq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// U + p_phi^2 kinetic_phi, the part balancing kinetic_aa (dS0/da)^2
double source_side(double a, const ConfigSpace& s, const PhysicalConstants& c, double p_phi) {
  return frw::potential(a, s.curvature, s.fiducial_volume, c.grav) + p_phi * p_phi * frw::kinetic_phi(a, s.fiducial_volume);
}

std::size_t bracket(const std::vector<double>& t, double x) {
  if (x < t.front() || x > t.back()) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "time %.6g is outside the background window [%.6g, %.6g]", x, t.front(), t.back());
    throw ValidationError(msg);
  }
  auto it = std::upper_bound(t.begin(), t.end(), x);
  std::size_t k = static_cast<std::size_t>(it - t.begin());
  return std::min(k == 0 ? 0 : k - 1, t.size() - 2);
}

// a-derivatives at x[2] from three nodes (x0 < x1 < x2 or reversed)
struct Stencil3 {
  double d1[3];
  double d2[3];
};

Stencil3 backward_stencil(double x0, double x1, double x2) {
  Stencil3 s{};
  // Lagrange basis derivatives evaluated at x2
  s.d1[0] = (x2 - x1) / ((x0 - x1) * (x0 - x2));
  s.d1[1] = (x2 - x0) / ((x1 - x0) * (x1 - x2));
  s.d1[2] = ((x2 - x0) + (x2 - x1)) / ((x2 - x0) * (x2 - x1));
  s.d2[0] = 2.0 / ((x0 - x1) * (x0 - x2));
  s.d2[1] = 2.0 / ((x1 - x0) * (x1 - x2));
  s.d2[2] = 2.0 / ((x2 - x0) * (x2 - x1));
  return s;
}

ConfigSpace phi_space(const EmergentRun& run, double a, const PhysicalConstants& constants, const Field& potential) {
  const Axis& phi = run.space.axes[1];
  Field kin(phi.points, frw::kinetic_phi(a, run.space.fiducial_volume));
  return make_custom_space(SpaceKind::ScalarLattice, {phi}, {kin}, potential, Field(phi.points, 1.0), constants);
}

}  // namespace

double BackgroundTrajectory::a_at(double t) const {
  std::size_t k = bracket(times, t);
  const double h = times[k + 1] - times[k], s = (t - times[k]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * a[k] + h10 * h * adot[k] + h01 * a[k + 1] + h11 * h * adot[k + 1];
}

double BackgroundTrajectory::adot_at(double t) const {
  std::size_t k = bracket(times, t);
  const double h = times[k + 1] - times[k], s = (t - times[k]) / h;
  const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1, d01 = -d00, d11 = 3 * s * s - 2 * s;
  return (d00 * a[k] + d01 * a[k + 1]) / h + d10 * adot[k] + d11 * adot[k + 1];
}

double background_momentum(double a, const ConfigSpace& space, const PhysicalConstants& constants, double p_phi,
                           int direction) {
  const double g = frw::kinetic_aa(a, space.fiducial_volume, constants.grav);
  if (g == 0.0) return 0.0;
  const double src = source_side(a, space, constants, p_phi);
  if (src < 0.0) return kNaN;
  // adot = 2 N g p with g < 0, so the expanding branch has p < 0
  const double sign = (g < 0.0) == (direction > 0) ? -1.0 : 1.0;
  return sign * std::sqrt(src / std::abs(g));
}

BackgroundTrajectory solve_background(const ConfigSpace& space, const PhysicalConstants& constants,
                                      const BackgroundOptions& opt) {
  if (space.kind != SpaceKind::Frw) throw ValidationError("background needs an frw space");
  constants.validate(true);
  const Axis& ax = space.axes[0];
  if (!(opt.a0 >= ax.min && opt.a0 <= ax.max)) throw ValidationError("a0 lies outside the scale-factor grid");
  if (opt.direction != 1 && opt.direction != -1) throw ValidationError("direction must be +1 or -1");
  if (!(opt.t_max > 0.0) || opt.samples < 2) throw ValidationError("t_max must be positive and samples >= 2");
  if (source_side(opt.a0, space, constants, opt.p_phi) < 0.0)
    throw ValidationError("no real branch at a0: the reduced constraint is classically forbidden there");

  auto rate = [&](double a) {
    double g = frw::kinetic_aa(a, space.fiducial_volume, constants.grav);
    double src = source_side(a, space, constants, opt.p_phi);
    return opt.direction * 2.0 * constants.lapse * std::sqrt(std::max(0.0, std::abs(g) * src));
  };
  if (constants.grav > 0.0 && rate(opt.a0) == 0.0)
    throw ValidationError("background is stationary at a0 although grav > 0 (turning point)");

  BackgroundTrajectory bg;
  bg.direction = opt.direction;
  bg.p_phi = opt.p_phi;
  bg.times.push_back(0.0);
  bg.a.push_back(opt.a0);
  bg.adot.push_back(rate(opt.a0));

  using State = std::array<double, 1>;
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
  auto sys = [&](const State& x, State& dx, double) { dx[0] = rate(x[0]); };
  State x{opt.a0};
  const double dt_out = opt.t_max / (opt.samples - 1);
  for (int k = 1; k < opt.samples; ++k) {
    const double t0 = (k - 1) * dt_out, t1 = k * dt_out;
    ode::integrate_adaptive(stepper, sys, x, t0, t1, dt_out / 16.0);
    const double a = x[0];
    if (!std::isfinite(a) || a < ax.min || a > ax.max) {
      bg.truncated = true;
      bg.reason = "scale factor left the grid";
      break;
    }
    if (source_side(a, space, constants, opt.p_phi) < 0.0) {
      bg.truncated = true;
      bg.reason = "classically forbidden region reached";
      break;
    }
    if (constants.grav > 0.0 && rate(a) == 0.0) {
      bg.times.push_back(t1), bg.a.push_back(a), bg.adot.push_back(0.0);
      bg.truncated = true;
      bg.reason = "turning point reached";
      break;
    }
    bg.times.push_back(t1);
    bg.a.push_back(a);
    bg.adot.push_back(rate(a));
  }
  if (bg.times.size() < 2) throw NumericalError("background truncated before the first output time: " + bg.reason);

  const std::size_t n = space.size();
  bg.S0.assign(n, 0.0);
  if (constants.grav > 0.0) {
    auto p = [&](double a) { return background_momentum(a, space, constants, opt.p_phi, opt.direction); };
    for (std::size_t i = 0; i < n; ++i) {
      const double a = space.coord(i, 0);
      const double lo = std::min(a, opt.a0), hi = std::max(a, opt.a0);
      if (std::isnan(p(a))) {
        bg.S0[i] = kNaN;
        continue;
      }
      if (hi == lo) continue;
      double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(p, lo, hi, 15, 1e-13);
      bg.S0[i] = a >= opt.a0 ? v : -v;
    }
  }
  return bg;
}

double rate_residual(const BackgroundTrajectory& bg, const ConfigSpace& space, const PhysicalConstants& constants) {
  double worst = 0.0;
  for (std::size_t k = 0; k < bg.times.size(); ++k) {
    const double a = bg.a[k];
    const double g = frw::kinetic_aa(a, space.fiducial_volume, constants.grav);
    const double p = background_momentum(a, space, constants, bg.p_phi, bg.direction);
    worst = std::max(worst, std::abs(bg.adot[k] - 2.0 * constants.lapse * g * p));
  }
  return worst;
}

EmergentRun make_emergent_run(const ConfigSpace& coupled, const CField& psi_phi, double t0, double a0,
                              const EmergentOptions& opt) {
  if (coupled.kind != SpaceKind::Coupled) throw ValidationError("emergent evolution needs a coupled space");
  if (static_cast<int>(psi_phi.size()) != coupled.axes[1].points)
    throw ValidationError("matter wave must have one value per scalar node");
  if (!(a0 > 0.0)) throw ValidationError("a0 must be positive");
  EmergentRun run;
  run.space = coupled;
  run.options = opt;
  run.history.push_back({t0, a0, psi_phi});
  run.gamma_cl.assign(psi_phi.size(), 0.0);
  run.gamma_q.assign(psi_phi.size(), 0.0);
  return run;
}

GammaTerms gamma_terms(const EmergentRun& run, const PhysicalConstants& constants) {
  if (run.history.size() < 3) throw ValidationError("gamma terms need three stored a-slices");
  const auto& s0 = run.history[run.history.size() - 3];
  const auto& s1 = run.history[run.history.size() - 2];
  const auto& s2 = run.history.back();
  if (s0.a == s1.a || s1.a == s2.a || s0.a == s2.a)
    throw ValidationError("stored a-slices must be distinct for a-derivatives");
  const Stencil3 st = backward_stencil(s0.a, s1.a, s2.a);
  const double a = s2.a, v0 = run.space.fiducial_volume;
  const double g = frw::kinetic_aa(a, v0, constants.grav);
  const double dg = frw_table::kinetic_aa.scale * g / a;
  const double h2 = constants.hbar * constants.hbar;
  const std::size_t m = s2.psi.size();
  GammaTerms out{Field(m, 0.0), Field(m, 0.0)};
  for (std::size_t j = 0; j < m; ++j) {
    const Complex p0 = s0.psi[j], p1 = s1.psi[j], p2 = s2.psi[j];
    const double rho = std::norm(p2);
    if (rho < kDensityFloor || std::norm(p1) < kDensityFloor || std::norm(p0) < kDensityFloor) continue;
    const Complex dpsi = st.d1[0] * p0 + st.d1[1] * p1 + st.d1[2] * p2;
    const double phase_rate = constants.hbar * (dpsi / p2).imag();
    out.gamma_cl[j] = -g * phase_rate * phase_rate;
    const double r0 = std::pow(std::norm(p0), 0.25), r1 = std::pow(std::norm(p1), 0.25), r2 = std::pow(rho, 0.25);
    const double dr = st.d1[0] * r0 + st.d1[1] * r1 + st.d1[2] * r2;
    const double d2r = st.d2[0] * r0 + st.d2[1] * r1 + st.d2[2] * r2;
    out.gamma_q[j] = -run.options.alpha * h2 * (g * d2r + dg * dr) / r2;
  }
  return out;
}

void evolve_emergent(EmergentRun& run, const BackgroundTrajectory& bg, const PhysicalConstants& constants, double dt,
                     int steps) {
  constants.validate(true);
  if (!(dt > 0.0) || steps < 0) throw ValidationError("time step must be positive and steps nonnegative");
  const double t_start = run.current().t;
  if (t_start < bg.t_begin() || t_start + steps * dt > bg.t_end() * (1.0 + 1e-12))
    throw ValidationError("background window is exhausted before the requested end time");
  const int m = run.space.axes[1].points;
  const Field w(m, run.space.axes[1].step());

  for (int step = 0; step < steps; ++step) {
    const EmergentSlice& cur = run.current();
    const double t1 = std::min(t_start + (step + 1) * dt, bg.t_end());
    const double a_mid = bg.a_at(0.5 * (cur.t + t1)), a1 = bg.a_at(t1);
    Field gamma(m, 0.0);
    run.gamma_cl.assign(m, 0.0);
    run.gamma_q.assign(m, 0.0);
    if (run.options.corrections_on && run.history.size() >= 3) {
      GammaTerms gt = gamma_terms(run, constants);
      run.gamma_cl = gt.gamma_cl;
      run.gamma_q = gt.gamma_q;
      for (int j = 0; j < m; ++j) gamma[j] = gt.gamma_cl[j] + gt.gamma_q[j];
    }
    ConfigSpace sp = phi_space(run, a_mid, constants, gamma);
    CrankNicolson cn(hamiltonian_matrix(sp, constants), t1 - cur.t, constants.hbar);
    Eigen::VectorXcd x(m - 2);
    for (int j = 1; j < m - 1; ++j) x[j - 1] = cur.psi[j];
    cn.step(x);
    EmergentSlice next{t1, a1, CField(m, Complex(0.0))};
    for (int j = 1; j < m - 1; ++j) next.psi[j] = x[j - 1];
    double norm = 0.0, gcl = 0.0, gq = 0.0;
    for (int j = 0; j < m; ++j) {
      norm += w[j] * std::norm(next.psi[j]);
      gcl = std::max(gcl, std::abs(run.gamma_cl[j]));
      gq = std::max(gq, std::abs(run.gamma_q[j]));
    }
    if (!std::isfinite(norm)) throw NumericalError("emergent evolution produced non-finite values");
    run.history.push_back(std::move(next));
    while (run.history.size() > 3) run.history.pop_front();
    run.log.push_back({t1, a1, norm, gcl, gq});
  }
}

double suppression_ratio(const EmergentRun& run, const PhysicalConstants& base, const PhysicalConstants& varied) {
  const EmergentSlice& cur = run.current();
  const int m = run.space.axes[1].points;
  GammaTerms gt = gamma_terms(run, varied);
  ConfigSpace sp = phi_space(run, cur.a, base, Field(m, 0.0));
  Eigen::SparseMatrix<double> k = hamiltonian_matrix(sp, base);
  Eigen::VectorXcd x(m - 2);
  for (int j = 1; j < m - 1; ++j) x[j - 1] = cur.psi[j];
  Eigen::VectorXcd kx = k.cast<Complex>() * x;
  double num = 0.0, den = 0.0;
  for (int j = 1; j < m - 1; ++j) {
    num = std::max(num, std::abs((gt.gamma_cl[j] + gt.gamma_q[j]) * cur.psi[j]));
    den = std::max(den, std::abs(kx[j - 1]));
  }
  if (den == 0.0) throw NumericalError("kinetic term vanishes; suppression ratio undefined");
  return num / den;
}

SuppressionReport suppression_scan(const EmergentRun& run, const PhysicalConstants& base,
                                   const std::vector<double>& grav_list, const std::vector<double>& hbar_list) {
  auto fit = [](const std::vector<double>& x, const std::vector<double>& r, const char* what) {
    std::vector<double> lx, ly;
    double lo = INFINITY, hi = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0 && r[i] > 0.0) {
        lx.push_back(std::log10(x[i]));
        ly.push_back(std::log10(r[i]));
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
      }
    if (lx.size() < 2 || hi / lo < 10.0 * (1.0 - 1e-12))
      throw ValidationError(std::string(what) + " sweep must span at least one decade with two positive entries");
    return fit_line(lx, ly).slope;
  };
  SuppressionReport r;
  r.grav = grav_list;
  r.hbar = hbar_list;
  for (double g : grav_list) {
    if (!(g >= 0.0)) throw ValidationError("grav entries must be nonnegative");
    PhysicalConstants c = base;
    c.grav = g;
    r.ratio_grav.push_back(suppression_ratio(run, base, c));
  }
  for (double h : hbar_list) {
    if (!(h > 0.0)) throw ValidationError("hbar entries must be positive");
    PhysicalConstants c = base;
    c.hbar = h;
    r.ratio_hbar.push_back(suppression_ratio(run, base, c));
  }
  r.slope_grav = fit(r.grav, r.ratio_grav, "grav");
  r.slope_hbar = fit(r.hbar, r.ratio_hbar, "hbar");
  return r;
}

AnsatzReport ansatz_diagnostics(const EmergentRun& run, const WaveState& psi0, const ConfigSpace& frw_space,
                                const PhysicalConstants& constants, double threshold) {
  if (frw_space.kind != SpaceKind::Frw) throw ValidationError("psi0 must live on an frw space");
  if (psi0.psi.size() != frw_space.size()) throw ValidationError("psi0 does not match the frw grid");
  if (!(threshold > 0.0)) throw ValidationError("threshold must be positive");
  if (run.history.size() < 3) throw ValidationError("ansatz diagnostics need three stored a-slices");
  const auto& s0 = run.history[run.history.size() - 3];
  const auto& s1 = run.history[run.history.size() - 2];
  const auto& s2 = run.history.back();
  const Stencil3 st = backward_stencil(s0.a, s1.a, s2.a);

  double n_rho = 0.0, n_s = 0.0;
  for (std::size_t j = 0; j < s2.psi.size(); ++j) {
    const Complex p0 = s0.psi[j], p1 = s1.psi[j], p2 = s2.psi[j];
    if (std::norm(p0) < kDensityFloor || std::norm(p1) < kDensityFloor || std::norm(p2) < kDensityFloor) continue;
    const Complex dl = (st.d1[0] * p0 + st.d1[1] * p1 + st.d1[2] * p2) / p2;
    n_rho = std::max(n_rho, std::abs(2.0 * dl.real()));
    n_s = std::max(n_s, std::abs(constants.hbar * dl.imag()));
  }

  // gravitational factor: log-derivative of psi0 interpolated linearly at the current a
  const Axis& ax = frw_space.axes[0];
  const double a = s2.a;
  if (a < ax.min || a > ax.max) throw ValidationError("current a lies outside the frw grid");
  const int i = std::min(ax.points - 2, static_cast<int>((a - ax.min) / ax.step()));
  auto logd = [&](int k) {
    int lo = std::max(0, k - 1), hi = std::min(ax.points - 1, k + 1);
    Complex p = psi0.psi[k];
    if (std::norm(p) < kDensityFloor) throw ValidationError("psi0 vanishes near the current a");
    return (psi0.psi[hi] - psi0.psi[lo]) / (ax.at(hi) - ax.at(lo)) / p;
  };
  const double s = (a - ax.at(i)) / ax.step();
  const Complex d = (1.0 - s) * logd(i) + s * logd(i + 1);
  const double d_rho = std::abs(2.0 * d.real()), d_s = std::abs(constants.hbar * d.imag());

  auto ratio = [](double num, double den) { return num == 0.0 ? 0.0 : (den == 0.0 ? INFINITY : num / den); };
  AnsatzReport r;
  r.threshold = threshold;
  r.ratio_rho = ratio(n_rho, d_rho);
  r.ratio_S = ratio(n_s, d_s);
  r.valid = r.ratio_rho <= threshold && r.ratio_S <= threshold;
  return r;
}

void write_emergent_log_csv(const EmergentRun& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path);
  out << std::setprecision(17) << "t,a,norm,gamma_cl_max,gamma_q_max\n";
  for (const auto& r : run.log)
    out << r.t << ',' << r.a << ',' << r.norm << ',' << r.gamma_cl_max << ',' << r.gamma_q_max << '\n';
}

nlohmann::ordered_json to_json(const SuppressionReport& r) {
  return {{"grav", r.grav},           {"ratio_grav", r.ratio_grav}, {"slope_grav", r.slope_grav},
          {"hbar", r.hbar},           {"ratio_hbar", r.ratio_hbar}, {"slope_hbar", r.slope_hbar}};
}

nlohmann::ordered_json to_json(const AnsatzReport& r) {
  return {{"ratio_rho", r.ratio_rho}, {"ratio_S", r.ratio_S}, {"threshold", r.threshold}, {"valid", r.valid}};
}

}  // namespace entroq
