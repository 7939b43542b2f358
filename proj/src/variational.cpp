#include "entroq/variational.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

#include "entroq/entropy.hpp"

namespace entroq {

namespace {

double objective(const Field& p, const Field& lp, const Field& energy, const Field& log_prior, double hbar) {
  Field t(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) t[i] = p[i] * (energy[i] + 0.5 * hbar * (lp[i] - log_prior[i]));
  return pairwise_sum(t);
}

// log-sum-exp normalization in place, returns p
Field normalize_log(Field& lp) {
  double mx = *std::max_element(lp.begin(), lp.end());
  Field e(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) e[i] = std::exp(lp[i] - mx);
  double lz = mx + std::log(pairwise_sum(e));
  for (std::size_t i = 0; i < lp.size(); ++i) {
    lp[i] -= lz;
    e[i] = std::exp(lp[i]);
  }
  return e;
}

double rms_masked(const Field& f, const std::vector<char>& use, long& count) {
  Field sq;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (use[i]) sq.push_back(f[i] * f[i]);
  count = static_cast<long>(sq.size());
  return sq.empty() ? 0.0 : std::sqrt(pairwise_sum(sq) / sq.size());
}

void check_state(const EnsembleState& s, const ConfigSpace& space) {
  if (s.rho.size() != space.size() || s.S.size() != space.size())
    throw ValidationError("ensemble does not match the grid");
}

double time_step(const EnsembleState& before, const EnsembleState& after) {
  double dt = after.time - before.time;
  if (dt > 0.0) return dt;
  if (dt == 0.0 && before.rho == after.rho && before.S == after.S) return 0.0;
  throw ValidationError("snapshots must be ordered in time");
}

}  // namespace

GibbsResult gibbs_minimize(const Field& energy, double hbar, const Field& prior, double tol, int max_iter) {
  const std::size_t n = energy.size();
  if (n == 0) throw ValidationError("energy grid is empty");
  if (prior.size() != n) throw ValidationError("prior does not match the energy grid");
  if (!(hbar > 0.0)) throw ValidationError("hbar must be positive");
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(energy[i])) throw ValidationError("energy must be finite");
    if (!(prior[i] > 0.0) || !std::isfinite(prior[i])) throw ValidationError("prior must be positive");
  }
  Field log_prior(n), lp(n);
  for (std::size_t i = 0; i < n; ++i) log_prior[i] = lp[i] = std::log(prior[i]);
  Field p = normalize_log(lp);

  const double cap = 1.0 / hbar;
  double eta = cap;
  GibbsResult r;
  Field g(n), dev(n), t(n);
  for (int it = 0;; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = energy[i] + 0.5 * hbar * (lp[i] - log_prior[i] + 1.0);
      t[i] = p[i] * g[i];
    }
    double gbar = pairwise_sum(t);
    double kkt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dev[i] = g[i] - gbar;
      kkt = std::max(kkt, std::abs(dev[i]));
      t[i] = p[i] * dev[i] * dev[i];
    }
    r.trace.emplace_back(it, kkt);
    r.iterations = it;
    r.kkt = kkt;
    if (kkt <= tol) break;
    if (it >= max_iter) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "gibbs_minimize did not converge in %d iterations (KKT %.6g)", max_iter, kkt);
      throw NumericalError(msg);
    }
    const double slope = pairwise_sum(t);
    const double f0 = objective(p, lp, energy, log_prior, hbar);
    const double slack = 1e-14 * (std::abs(f0) + 1.0);
    bool first = true;
    for (;;) {
      Field trial(n);
      for (std::size_t i = 0; i < n; ++i) trial[i] = lp[i] - eta * dev[i];
      Field pt = normalize_log(trial);
      double f1 = objective(pt, trial, energy, log_prior, hbar);
      if (f1 <= f0 - 1e-4 * eta * slope + slack) {
        lp = std::move(trial);
        p = std::move(pt);
        if (first) eta = std::min(cap, 2.0 * eta);
        break;
      }
      first = false;
      eta *= 0.5;
      if (eta < 1e-30 * cap) throw NumericalError("gibbs_minimize line search failed");
    }
  }
  r.p = std::move(p);
  return r;
}

void write_gibbs_trace_csv(const GibbsResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path);
  out << std::setprecision(17) << "iteration,kkt_residual\n";
  for (const auto& [it, k] : r.trace) out << it << ',' << k << '\n';
}

MultiplierSet MultiplierSet::defaults(const ConfigSpace& space, const PhysicalConstants& constants, double m) {
  MultiplierSet s;
  s.lam2.assign(space.size(), 2.0 * constants.shift);
  s.lam4.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) s.lam4[i] = space.measure[i] * m;
  return s;
}

void ResidualReport::set(const std::string& name, double norm, long points) {
  if (!(norm >= 0.0) || !std::isfinite(norm)) throw NumericalError("residual '" + name + "' is not finite");
  for (auto& e : entries)
    if (e.first == name) {
      e.second = {norm, points};
      return;
    }
  entries.emplace_back(name, ResidualEntry{norm, points});
}

const ResidualEntry& ResidualReport::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.first == name) return e.second;
  throw ValidationError("no residual named '" + name + "'");
}

bool ResidualReport::contains(const std::string& name) const {
  for (const auto& e : entries)
    if (e.first == name) return true;
  return false;
}

void ResidualReport::merge(const ResidualReport& other) {
  for (const auto& e : other.entries) set(e.first, e.second.residual_norm, e.second.grid_points);
}

nlohmann::ordered_json to_json(const ResidualReport& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, e] : r.entries) j[name] = {{"residual_norm", e.residual_norm}, {"grid_points", e.grid_points}};
  return j;
}

Field hamilton_density(const Field& S, const ConfigSpace& space) {
  Field h = space.potential;
  for (std::size_t a = 0; a < space.dims(); ++a) {
    Field g = gradient(space, S, a);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += space.kinetic[a][i] * g[i] * g[i];
  }
  return h;
}

ActionGradient total_action_gradient(const std::vector<EnsembleState>& traj, const ConfigSpace& space,
                                     const PhysicalConstants& constants, const std::vector<double>& times) {
  if (traj.size() != times.size() || traj.size() < 2) throw ValidationError("trajectory and time grid must match (>= 2 levels)");
  for (const auto& s : traj) check_state(s, space);
  for (std::size_t t = 0; t + 1 < times.size(); ++t)
    if (!(times[t + 1] > times[t])) throw ValidationError("time grid must be increasing");

  const std::size_t n = space.size(), T = traj.size() - 1;
  const Field w = space.quadrature();
  const double nl = constants.lapse, q = constants.hbar * constants.hbar / 8.0;
  std::vector<Eigen::SparseMatrix<double>> D;
  for (std::size_t a = 0; a < space.dims(); ++a) D.push_back(derivative_matrix(space, a));

  ActionGradient g;
  g.d_rho.assign(T + 1, Field(n, 0.0));
  g.d_S.assign(T + 1, Field(n, 0.0));
  Field terms;
  for (std::size_t t = 0; t < T; ++t) {
    const double dt = times[t + 1] - times[t];
    const Field& rho = traj[t].rho;
    const Field& S = traj[t].S;
    const Field& S1 = traj[t + 1].S;
    Field h = space.potential;
    std::vector<Eigen::VectorXd> ds;
    Eigen::Map<const Eigen::VectorXd> sv(S.data(), n);
    for (std::size_t a = 0; a < space.dims(); ++a) {
      ds.push_back(D[a] * sv);
      for (std::size_t i = 0; i < n; ++i) h[i] += space.kinetic[a][i] * ds[a][i] * ds[a][i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      terms.push_back(w[i] * rho[i] * (S1[i] - S[i]) + dt * nl * w[i] * rho[i] * h[i]);
      g.d_rho[t][i] += w[i] * (S1[i] - S[i]) + dt * nl * w[i] * h[i];
      g.d_S[t][i] -= w[i] * rho[i];
      g.d_S[t + 1][i] += w[i] * rho[i];
    }
    for (std::size_t a = 0; a < space.dims(); ++a) {
      Eigen::VectorXd flux(n);
      for (std::size_t i = 0; i < n; ++i) flux[i] = 2.0 * dt * nl * w[i] * rho[i] * space.kinetic[a][i] * ds[a][i];
      Eigen::VectorXd back = D[a].transpose() * flux;
      for (std::size_t i = 0; i < n; ++i) g.d_S[t][i] += back[i];
    }
    Field fg;
    double f = fisher_functional(rho, space, constants, &fg, false);
    terms.push_back(dt * q * f);
    for (std::size_t i = 0; i < n; ++i) g.d_rho[t][i] += dt * q * fg[i];
  }
  g.value = pairwise_sum(terms);
  return g;
}

double total_action(const std::vector<EnsembleState>& traj, const ConfigSpace& space,
                    const PhysicalConstants& constants, const std::vector<double>& times) {
  if (traj.size() != times.size()) throw ValidationError("trajectory and time grid must match");
  for (const auto& s : traj) {
    check_state(s, space);
    if (std::abs(total_mass(s.rho, space) - 1.0) > 1e-8) throw ValidationError("density is not normalized");
  }
  return total_action_gradient(traj, space, constants, times).value;
}

ResidualReport stationarity_residuals(const EnsembleState& before, const EnsembleState& after,
                                      const MultiplierSet& mult, const ConfigSpace& space,
                                      const PhysicalConstants& constants) {
  if (space.kind == SpaceKind::ScalarLattice) throw ValidationError("stationarity residuals need a gravitational space");
  check_state(before, space);
  check_state(after, space);
  if (mult.lam2.size() != space.size() || mult.lam4.size() != space.size())
    throw ValidationError("multiplier fields do not match the grid");
  const double dt = time_step(before, after);
  const std::size_t n = space.size();
  const double nl = constants.lapse;

  Field rho(n), S(n), rt(n, 0.0), st(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = 0.5 * (before.rho[i] + after.rho[i]);
    S[i] = 0.5 * (before.S[i] + after.S[i]);
    if (dt > 0.0) {
      rt[i] = (after.rho[i] - before.rho[i]) / dt;
      st[i] = (after.S[i] - before.S[i]) / dt;
    }
  }
  std::vector<char> mask;
  Field q = bohm_potential(rho, space, constants, &mask);
  Field h = hamilton_density(S, space);
  Field cont(n, 0.0), fisher(n, 0.0);
  Field cw(n);
  for (std::size_t a = 0; a < space.dims(); ++a) {
    for (std::size_t i = 0; i < n; ++i) cw[i] = rho[i] * space.kinetic[a][i];
    Field d = flux_divergence(space, cw, S, a);
    Field gr = gradient(space, rho, a);
    for (std::size_t i = 0; i < n; ++i) {
      cont[i] += d[i];
      if (rho[i] >= kDensityFloor) fisher[i] += space.kinetic[a][i] * gr[i] * gr[i] / rho[i];
    }
  }

  Field var7(n), var8(n), var9(n), var10(n), var12(n), zero(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    var12[i] = h[i] + constants.alpha * q[i];
    var7[i] = (1.0 + mult.lam1) * rt[i] + 2.0 * nl * cont[i];
    var8[i] = (1.0 + mult.lam1) * st[i] + nl * var12[i];
    var9[i] = nl * cont[i];
    var10[i] = nl * var12[i];
  }

  const Field w = space.quadrature();
  Field t6(n);
  const double hb2 = constants.hbar * constants.hbar;
  for (std::size_t i = 0; i < n; ++i) t6[i] = w[i] * (rho[i] * h[i] + 0.25 * hb2 * fisher[i]);

  ResidualReport r;
  long c = 0;
  auto put = [&](const char* name, const Field& f) {
    double v = rms_masked(f, mask, c);
    r.set(name, v, c);
  };
  put("var1", st);
  put("var2", zero);
  put("var3", rt);
  put("var4", zero);
  put("var5", zero);
  r.set("var6", std::abs(pairwise_sum(t6)), static_cast<long>(n));
  put("var7", var7);
  put("var8", var8);
  put("var9", var9);
  put("var10", var10);
  put("var11", cont);
  put("var12", var12);
  return r;
}

ResidualReport constraint_residuals(const EnsembleState& before, const EnsembleState& after, const ConfigSpace& space) {
  check_state(before, space);
  check_state(after, space);
  const double dt = time_step(before, after);
  const std::size_t n = space.size();
  const Field w = space.quadrature();
  Field c1(n, 0.0), c3(n, 0.0);
  if (dt > 0.0)
    for (std::size_t i = 0; i < n; ++i) {
      double rho = 0.5 * (before.rho[i] + after.rho[i]);
      c1[i] = w[i] * rho * (after.S[i] - before.S[i]) / dt;
      c3[i] = w[i] * rho * (after.rho[i] - before.rho[i]) / dt;
    }
  ResidualReport r;
  r.set("C1", std::abs(pairwise_sum(c1)), static_cast<long>(n));
  r.set("C2", 0.0, static_cast<long>(n));
  r.set("C3", std::abs(pairwise_sum(c3)), static_cast<long>(n));
  r.set("C4", 0.0, static_cast<long>(n));
  return r;
}

double hamiltonian_ensemble(const EnsembleState& state, const ConfigSpace& space, const PhysicalConstants& constants,
                            bool quantum) {
  check_state(state, space);
  if (std::abs(total_mass(state.rho, space) - 1.0) > 1e-8) throw ValidationError("density is not normalized");
  const Field w = space.quadrature();
  Field h = hamilton_density(state.S, space);
  Field t(space.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = w[i] * state.rho[i] * h[i];
  double e = -constants.lapse * pairwise_sum(t);
  if (quantum) e -= constants.hbar * constants.hbar / 8.0 * fisher_functional(state.rho, space, constants);
  return e;
}

}  // namespace entroq
