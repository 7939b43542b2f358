#include "entroq/madelung.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "entroq/entropy.hpp"

namespace entroq {

namespace {

void check_field(const Field& f, const ConfigSpace& space, const char* what) {
  if (f.size() != space.size()) throw ValidationError(std::string(what) + " does not match the grid");
  for (double v : f)
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + " has non-finite entries");
}

double wrap_angle(double x) { return std::remainder(x, 2.0 * kPi); }

// f_0 = 3 f_1 - 3 f_2 + f_3 at both ends of every axis
void extrapolate_boundary(const ConfigSpace& s, Field& f) {
  const std::size_t n = s.size();
  for (std::size_t a = 0; a < s.dims(); ++a) {
    const std::size_t st = s.stride(a);
    const int m = s.axes[a].points;
    for (std::size_t node = 0; node < n; ++node) {
      int i = s.index(node, a);
      if (i == 0)
        f[node] = 3.0 * f[node + st] - 3.0 * f[node + 2 * st] + f[node + 3 * st];
      else if (i == m - 1)
        f[node] = 3.0 * f[node - st] - 3.0 * f[node - 2 * st] + f[node - 3 * st];
    }
  }
}

struct LogRhs {
  const ConfigSpace& s;
  double hbar, lapse;
  bool quantum;
  std::vector<char> boundary;

  void operator()(const Field& l, const Field& S, Field& dl, Field& dS) const {
    const std::size_t n = s.size();
    dl.assign(n, 0.0);
    dS.assign(n, 0.0);
    Field q(n, 0.0), r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = 0.5 * l[i];
    for (std::size_t a = 0; a < s.dims(); ++a) {
      const Field& k = s.kinetic[a];
      Field gl = gradient(s, l, a), gs = gradient(s, S, a);
      Field div_s = flux_divergence(s, k, S, a);
      Field div_r;
      if (quantum) div_r = flux_divergence(s, k, r, a);
      for (std::size_t i = 0; i < n; ++i) {
        if (boundary[i]) continue;
        dl[i] -= 2.0 * (k[i] * gl[i] * gs[i] + div_s[i]);
        dS[i] -= k[i] * gs[i] * gs[i];
        if (quantum) q[i] -= hbar * hbar * (div_r[i] + 0.25 * k[i] * gl[i] * gl[i]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (boundary[i]) continue;
      dl[i] *= lapse;
      dS[i] = lapse * (dS[i] - s.potential[i] - q[i]);
    }
  }
};

}  // namespace

Field bohm_potential(const Field& rho, const ConfigSpace& space, const PhysicalConstants& constants,
                     std::vector<char>* mask) {
  check_field(rho, space, "density");
  const std::size_t n = space.size();
  Field root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = std::sqrt(std::max(rho[i], 0.0));
  Field acc(n, 0.0);
  for (std::size_t a = 0; a < space.dims(); ++a) {
    Field d = flux_divergence(space, space.kinetic[a], root, a);
    for (std::size_t i = 0; i < n; ++i) acc[i] += d[i];
  }
  Field q(n, 0.0);
  if (mask) mask->assign(n, 0);
  const double h2 = constants.hbar * constants.hbar;
  for (std::size_t i = 0; i < n; ++i) {
    if (space.on_boundary(i) || rho[i] < kDensityFloor) continue;
    q[i] = -h2 * acc[i] / root[i];
    if (mask) (*mask)[i] = 1;
  }
  return q;
}

MadelungRun evolve_madelung(const EnsembleState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                            double dt, int steps, const MadelungOptions& opt) {
  space.validate();
  constants.validate(true);
  check_field(state.rho, space, "density");
  check_field(state.S, space, "phase");
  if (!(dt > 0.0) || steps < 0) throw ValidationError("time step must be positive and steps nonnegative");
  for (const auto& ax : space.axes)
    if (ax.points < 5) throw ValidationError("evolve_madelung needs at least 5 points per axis");
  if (std::abs(total_mass(state.rho, space) - 1.0) > 1e-8) throw ValidationError("density is not normalized");

  const std::size_t n = space.size();
  LogRhs rhs{space, constants.hbar, constants.lapse, opt.quantum, std::vector<char>(n)};
  for (std::size_t i = 0; i < n; ++i) rhs.boundary[i] = space.on_boundary(i);

  MadelungRun run;
  for (std::size_t a = 0; a < space.dims(); ++a) {
    const double h = space.axes[a].step();
    Field gs = gradient(space, state.S, a);
    double kmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      kmax = std::max(kmax, std::abs(space.kinetic[a][i]));
      if (!rhs.boundary[i])
        run.advective_ratio =
            std::max(run.advective_ratio, std::abs(2.0 * constants.lapse * space.kinetic[a][i] * gs[i]) * dt / h);
    }
    if (opt.quantum) run.dispersive_ratio += 4.0 * constants.hbar * std::abs(constants.lapse) * kmax * dt / (h * h);
  }
  char msg[160];
  if (run.advective_ratio > kAdvectiveLimit) {
    std::snprintf(msg, sizeof msg, "advective ratio %.6g exceeds %.6g", run.advective_ratio, kAdvectiveLimit);
    throw ValidationError(msg);
  }
  if (run.dispersive_ratio > kDispersiveLimit) {
    std::snprintf(msg, sizeof msg, "dispersive ratio %.6g exceeds %.6g", run.dispersive_ratio, kDispersiveLimit);
    throw ValidationError(msg);
  }

  Field l(n), S = state.S;
  for (std::size_t i = 0; i < n; ++i) l[i] = std::log(std::max(state.rho[i], kDensityFloor));

  auto snapshot = [&](double t) {
    EnsembleState e{Field(n, 0.0), S, t};
    for (std::size_t i = 0; i < n; ++i)
      if (!rhs.boundary[i]) e.rho[i] = std::exp(l[i]);
    run.trajectory.push_back(std::move(e));
  };
  run.trajectory.push_back(state);

  Field k1l, k1s, k2l, k2s, k3l, k3s, k4l, k4s, tl(n), ts(n), rho(n);
  for (int step = 0; step < steps; ++step) {
    rhs(l, S, k1l, k1s);
    for (std::size_t i = 0; i < n; ++i) tl[i] = l[i] + 0.5 * dt * k1l[i], ts[i] = S[i] + 0.5 * dt * k1s[i];
    extrapolate_boundary(space, tl), extrapolate_boundary(space, ts);
    rhs(tl, ts, k2l, k2s);
    for (std::size_t i = 0; i < n; ++i) tl[i] = l[i] + 0.5 * dt * k2l[i], ts[i] = S[i] + 0.5 * dt * k2s[i];
    extrapolate_boundary(space, tl), extrapolate_boundary(space, ts);
    rhs(tl, ts, k3l, k3s);
    for (std::size_t i = 0; i < n; ++i) tl[i] = l[i] + dt * k3l[i], ts[i] = S[i] + dt * k3s[i];
    extrapolate_boundary(space, tl), extrapolate_boundary(space, ts);
    rhs(tl, ts, k4l, k4s);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] += dt / 6.0 * (k1l[i] + 2.0 * k2l[i] + 2.0 * k3l[i] + k4l[i]);
      S[i] += dt / 6.0 * (k1s[i] + 2.0 * k2s[i] + 2.0 * k3s[i] + k4s[i]);
    }
    extrapolate_boundary(space, l), extrapolate_boundary(space, S);

    for (std::size_t i = 0; i < n; ++i) rho[i] = rhs.boundary[i] ? 0.0 : std::exp(l[i]);
    double mass = total_mass(rho, space);
    if (!std::isfinite(mass) || std::abs(mass - 1.0) > 1e-6) {
      std::snprintf(msg, sizeof msg, "renormalization factor %.6g at step %d is outside 1 +- 1e-6", mass, step + 1);
      throw NumericalError(msg);
    }
    run.renorm_factors.push_back(mass);
    double shift = std::log(mass);
    for (double& v : l) v -= shift;
    double t = state.time + (step + 1) * dt;
    if (step + 1 == steps || (opt.snapshot_every > 0 && (step + 1) % opt.snapshot_every == 0)) snapshot(t);
  }
  return run;
}

std::string to_string(Stencil s) { return s == Stencil::Sinc ? "sinc" : "fd2"; }

Stencil stencil_from_string(const std::string& s) {
  if (s == "sinc") return Stencil::Sinc;
  if (s == "fd2") return Stencil::Fd2;
  throw ValidationError("unknown stencil '" + s + "'");
}

std::vector<std::size_t> interior_nodes(const ConfigSpace& space) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (!space.on_boundary(i)) out.push_back(i);
  return out;
}

Eigen::SparseMatrix<double> hamiltonian_matrix(const ConfigSpace& space, const PhysicalConstants& constants,
                                               Stencil stencil) {
  const std::size_t n = space.size();
  std::vector<std::size_t> inner = interior_nodes(space);
  std::vector<long> map(n, -1);
  for (std::size_t k = 0; k < inner.size(); ++k) map[inner[k]] = static_cast<long>(k);
  const double c0 = constants.hbar * constants.hbar * constants.lapse;

  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t k = 0; k < inner.size(); ++k) {
    std::size_t node = inner[k];
    double diag = constants.lapse * space.potential[node];
    for (std::size_t a = 0; a < space.dims(); ++a) {
      const Field& kin = space.kinetic[a];
      const std::size_t st = space.stride(a);
      const double h = space.axes[a].step(), inv = 1.0 / (h * h);
      if (stencil == Stencil::Fd2) {
        double cp = 0.5 * (kin[node] + kin[node + st]), cm = 0.5 * (kin[node] + kin[node - st]);
        diag += c0 * (cp + cm) * inv;
        if (map[node + st] >= 0) trip.emplace_back(k, map[node + st], -c0 * cp * inv);
        if (map[node - st] >= 0) trip.emplace_back(k, map[node - st], -c0 * cm * inv);
      } else {
        const int i = space.index(node, a), m = space.axes[a].points;
        diag += c0 * kin[node] * kPi * kPi / 3.0 * inv;
        for (int j = 1; j < m - 1; ++j) {
          if (j == i) continue;
          std::size_t other = node + (j - i) * static_cast<long>(st);
          int d = j - i;
          double c = c0 * 0.5 * (kin[node] + kin[other]);
          trip.emplace_back(k, map[other], 2.0 * c * ((d % 2) ? -1.0 : 1.0) / (double(d) * d) * inv);
        }
      }
    }
    trip.emplace_back(k, k, diag);
  }
  Eigen::SparseMatrix<double> H(inner.size(), inner.size());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

CrankNicolson::CrankNicolson(const Eigen::SparseMatrix<double>& h, double dt, double hbar) {
  const Eigen::Index n = h.rows();
  Eigen::SparseMatrix<Complex> hc = h.cast<Complex>();
  Eigen::SparseMatrix<Complex> id(n, n);
  id.setIdentity();
  const Complex f(0.0, 0.5 * dt / hbar);
  Eigen::SparseMatrix<Complex> lhs = id + f * hc;
  rhs_ = id - f * hc;
  lu_.compute(lhs);
  if (lu_.info() != Eigen::Success) throw NumericalError("Crank-Nicolson factorization failed: " + lu_.lastErrorMessage());
}

void CrankNicolson::step(Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd b = rhs_ * psi;
  psi = lu_.solve(b);
  if (lu_.info() != Eigen::Success) throw NumericalError("Crank-Nicolson solve failed");
}

double wave_norm(const CField& psi, const ConfigSpace& space) {
  const Field w = space.quadrature();
  Field t(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) t[i] = w[i] * std::norm(psi[i]);
  return pairwise_sum(t);
}

double energy_expectation(const CField& psi, const ConfigSpace& space, const PhysicalConstants& constants,
                          Stencil stencil) {
  std::vector<std::size_t> inner = interior_nodes(space);
  Eigen::VectorXcd x(inner.size());
  for (std::size_t k = 0; k < inner.size(); ++k) x[k] = psi[inner[k]];
  Eigen::SparseMatrix<double> H = hamiltonian_matrix(space, constants, stencil);
  Eigen::VectorXcd hx = H.cast<Complex>() * x;
  return (x.dot(hx)).real() / x.squaredNorm();
}

SchrodingerRun evolve_schrodinger(const WaveState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                                  double dt, int steps, const SchrodingerOptions& opt) {
  space.validate();
  constants.validate(true);
  if (state.psi.size() != space.size()) throw ValidationError("wave does not match the grid");
  if (!(dt > 0.0) || steps < 0) throw ValidationError("time step must be positive and steps nonnegative");
  if (std::abs(wave_norm(state.psi, space) - 1.0) > 1e-8) throw ValidationError("wave is not normalized");

  std::vector<std::size_t> inner = interior_nodes(space);
  const Field w = space.quadrature();
  // interior weights are all equal on a uniform product grid
  const double wi = inner.empty() ? 0.0 : w[inner.front()];
  CrankNicolson cn(hamiltonian_matrix(space, constants), dt, constants.hbar);

  Eigen::VectorXcd x(inner.size());
  for (std::size_t k = 0; k < inner.size(); ++k) x[k] = state.psi[inner[k]];
  SchrodingerRun run;
  run.trajectory.push_back(state);
  auto snapshot = [&](double t) {
    WaveState s{CField(space.size(), Complex(0.0)), t};
    for (std::size_t k = 0; k < inner.size(); ++k) s.psi[inner[k]] = x[k];
    run.trajectory.push_back(std::move(s));
  };
  double norm = wi * x.squaredNorm();
  for (int step = 0; step < steps; ++step) {
    cn.step(x);
    double next = wi * x.squaredNorm();
    if (!std::isfinite(next)) throw NumericalError("Schrodinger evolution produced non-finite values");
    run.max_norm_drift = std::max(run.max_norm_drift, std::abs(next - norm));
    norm = next;
    if (step + 1 == steps || (opt.snapshot_every > 0 && (step + 1) % opt.snapshot_every == 0))
      snapshot(state.time + (step + 1) * dt);
  }
  return run;
}

WaveState wave_from_ensemble(const EnsembleState& state, const PhysicalConstants& constants) {
  if (state.rho.size() != state.S.size()) throw ValidationError("density and phase sizes differ");
  const double scale = 1.0 / (std::sqrt(constants.alpha) * constants.hbar);
  WaveState w{CField(state.rho.size()), state.time};
  for (std::size_t i = 0; i < state.rho.size(); ++i) {
    if (state.rho[i] < 0.0) throw ValidationError("density is negative");
    w.psi[i] = std::polar(std::sqrt(state.rho[i]), state.S[i] * scale);
  }
  return w;
}

EnsembleState ensemble_from_wave(const WaveState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                                 double phase_origin, std::vector<char>* flagged) {
  const std::size_t n = space.size();
  if (state.psi.size() != n) throw ValidationError("wave does not match the grid");
  const double unit = std::sqrt(constants.alpha) * constants.hbar;
  EnsembleState e{Field(n), Field(n), state.time};
  Field theta(n);
  if (flagged) flagged->assign(n, 0);
  const std::size_t d = space.dims();
  for (std::size_t node = 0; node < n; ++node) {
    const double rho = std::norm(state.psi[node]);
    e.rho[node] = rho;
    const bool low = rho < kDensityFloor;
    if (low && flagged) (*flagged)[node] = 1;
    const double raw = std::arg(state.psi[node]);
    if (node == 0) {
      const double target = phase_origin / unit;
      theta[0] = low ? target : raw + 2.0 * kPi * std::round((target - raw) / (2.0 * kPi));
      continue;
    }
    std::size_t ref = node;
    for (std::size_t a = d; a-- > 0;)
      if (space.index(node, a) > 0) {
        ref = node - space.stride(a);
        break;
      }
    theta[node] = low ? theta[ref] : theta[ref] + wrap_angle(raw - theta[ref]);
  }
  for (std::size_t i = 0; i < n; ++i) e.S[i] = unit * theta[i];
  return e;
}

GroundState ground_state(const ConfigSpace& space, const PhysicalConstants& constants, double tol, Stencil stencil,
                         int max_iter) {
  space.validate();
  constants.validate(true);
  if (space.kind != SpaceKind::ScalarLattice) throw ValidationError("ground_state is defined for scalar spaces only");
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  if (!(constants.lapse > 0.0)) throw ValidationError("ground_state needs a positive lapse");
  for (const auto& k : space.kinetic)
    for (double v : k)
      if (!(v > 0.0)) throw ValidationError("kinetic form is not positive definite");

  std::vector<std::size_t> inner = interior_nodes(space);
  if (inner.empty()) throw ValidationError("grid has no interior nodes");
  Eigen::SparseMatrix<double> H = hamiltonian_matrix(space, constants, stencil);
  const Eigen::Index m = H.rows();

  double umin = space.potential[inner.front()];
  for (std::size_t node : inner) umin = std::min(umin, space.potential[node]);
  umin *= constants.lapse;
  Eigen::VectorXd x(m);
  for (Eigen::Index k = 0; k < m; ++k)
    x[k] = std::exp(-(constants.lapse * space.potential[inner[k]] - umin) / constants.hbar);
  x.normalize();

  Eigen::SparseMatrix<double> id(m, m);
  id.setIdentity();
  double sigma = umin - std::max(1.0, std::abs(umin));
  GroundState out;
  double rq = 0.0, res = 0.0;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setMaxIterations(20000);
  for (int it = 0; it <= max_iter; ++it) {
    Eigen::VectorXd hx = H * x;
    rq = x.dot(hx);
    res = (hx - rq * x).norm();
    out.iterations = it;
    if (res <= tol) break;
    if (it == max_iter) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "inverse iteration did not converge in %d iterations (residual %.6g)", max_iter,
                    res);
      throw NumericalError(msg);
    }
    double candidate = rq - std::max(4.0 * res, 0.1 * (rq - umin));
    if (candidate > sigma) sigma = candidate;
    Eigen::SparseMatrix<double> shifted = H - sigma * id;
    cg.setTolerance(std::max(1e-14, std::min(1e-6, 0.01 * res)));
    cg.compute(shifted);
    Eigen::VectorXd y = cg.solveWithGuess(x, x / (rq - sigma));
    if (cg.info() != Eigen::Success) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "inner solve failed after %ld iterations (error %.3g)",
                    static_cast<long>(cg.iterations()), cg.error());
      throw NumericalError(msg);
    }
    x = y / y.norm();
  }
  if (x.sum() < 0.0) x = -x;
  out.energy = rq;
  out.residual = res;
  out.state.psi.assign(space.size(), Complex(0.0));
  for (Eigen::Index k = 0; k < m; ++k) out.state.psi[inner[k]] = x[k];
  const double nrm = std::sqrt(wave_norm(out.state.psi, space));
  for (auto& v : out.state.psi) v /= nrm;
  return out;
}

void write_trajectory_csv(const std::vector<EnsembleState>& states, const ConfigSpace& space,
                          const PhysicalConstants& constants, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path);
  out << std::setprecision(17) << "time";
  for (const auto& ax : space.axes) out << ',' << ax.name;
  out << ",rho,S,re_psi,im_psi\n";
  for (const auto& st : states) {
    WaveState w = wave_from_ensemble(st, constants);
    for (std::size_t node = 0; node < space.size(); ++node) {
      out << st.time;
      for (std::size_t a = 0; a < space.dims(); ++a) out << ',' << space.coord(node, a);
      out << ',' << st.rho[node] << ',' << st.S[node] << ',' << w.psi[node].real() << ',' << w.psi[node].imag()
          << '\n';
    }
  }
}

}  // namespace entroq
