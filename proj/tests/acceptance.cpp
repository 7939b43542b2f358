#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "entroq/cli.hpp"
#include "entroq/emergent.hpp"
#include "entroq/entropy.hpp"
#include "entroq/fluctuation.hpp"
#include "entroq/madelung.hpp"
#include "entroq/variational.hpp"
#include "entroq/wdw.hpp"

using namespace entroq;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nlohmann::json oracle(const std::string& name) {
  std::ifstream in(std::string(ENTROQ_ORACLE_DIR) + "/" + name);
  if (!in) throw ValidationError("missing oracle " + name);
  return nlohmann::json::parse(in);
}

Eigen::MatrixXd to_matrix(const nlohmann::json& rows) {
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

// collects sub-checks of one criterion
struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what, double value) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << "=" << value << (ok ? "" : " (fail)");
  }
};

Field normalized_gaussian(const ConfigSpace& s, double var) {
  Field rho(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) rho[i] = std::exp(-s.coord(i, 0) * s.coord(i, 0) / (2.0 * var));
  const double m = total_mass(rho, s);
  for (double& v : rho) v /= m;
  return rho;
}

void gibbs(Verdict& v) {
  auto t0 = Clock::now();
  const int n = 201;
  const double hbar = 0.7, omega = 3.0;
  Field E(n), prior(n), ref(n);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    double w = -2.0 + 4.0 * i / (n - 1);
    E[i] = 0.5 * omega * w * w;
    prior[i] = 1.0 + 0.5 * std::sin(3.0 * w);
    ref[i] = prior[i] * std::exp(-2.0 * E[i] / hbar);
    z += ref[i];
  }
  for (double& r : ref) r /= z;
  auto r = gibbs_minimize(E, hbar, prior, 1e-11);
  double sup = 0.0;
  for (int i = 0; i < n; ++i) sup = std::max(sup, std::abs(r.p[i] - ref[i]));

  auto o = oracle("gibbs_three_node.json");
  auto r3 = gibbs_minimize(o["energy"].get<Field>(), o["hbar"].get<double>(), Field(3, 1.0), 1e-12);
  Field p3 = o["p"].get<Field>();
  double sup3 = 0.0;
  for (int i = 0; i < 3; ++i) sup3 = std::max(sup3, std::abs(r3.p[i] - p3[i]));

  const double wall = seconds_since(t0);
  v.require(sup <= 1e-8, "sup201", sup);
  v.require(sup3 <= 1e-8, "sup3", sup3);
  v.require(wall < 1.0, "seconds", wall);
}

void covariance(Verdict& v) {
  auto t0 = Clock::now();
  PhysicalConstants c;
  auto site = build_scalar_lattice_space({1, 1.0}, 0.0, {-1, 1, 5}, c);
  auto rep = covariance_check(sample(build_fluctuation_kernel(site, 1e-3, c), 1000000, 5));
  const double rel = std::abs(rep.estimated_cov(0, 0) - 5e-4) / 5e-4;

  double worst = 0.0;
  for (const auto& o : oracle("gravity_covariance.json")) {
    auto k = build_gravity_kernel(to_matrix(o["h"]), o["dt"].get<double>(), c);
    auto est = covariance_check(sample(k, 200000, 11));
    Eigen::MatrixXd comp = k.basis * est.estimated_cov * k.basis.transpose(), ref = to_matrix(o["covariance"]);
    for (Eigen::Index i = 0; i < ref.rows(); ++i)
      for (Eigen::Index j = 0; j < ref.cols(); ++j)
        worst = std::max(worst, std::abs(comp(i, j) - ref(i, j)) / std::sqrt(ref(i, i) * ref(j, j)));
  }
  const double wall = seconds_since(t0);
  v.require(rel <= 0.01, "scalar_rel", rel);
  v.require(worst <= 0.03, "gravity_rel", worst);
  v.require(wall < 30.0, "seconds", wall);
}

void uncertainty(Verdict& v) {
  PhysicalConstants c;
  auto s1 = build_scalar_lattice_space({1, 1.0}, 0.0, {-1, 1, 5}, c);
  auto s2 = build_scalar_lattice_space({2, 1.0}, 0.0, {-1, 1, 5}, c);
  auto b1 = sample(build_fluctuation_kernel(s1, 1e-3, c), 200000, 9);
  auto b2 = sample(build_fluctuation_kernel(s2, 1e-3, c), 200000, 10);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  Eigen::Vector2d f(1.0, 0.0), g(0.0, 1.0);
  v.require(uncertainty_check(b1, one, one).margin <= 5.0, "same_site_se", uncertainty_check(b1, one, one).margin);
  auto scaled = uncertainty_check(b1, 3.0 * one, 0.5 * one);
  v.require(scaled.margin <= 5.0, "scaled_se", scaled.margin);
  auto disjoint = uncertainty_check(b2, f, g);
  v.require(disjoint.bound == 0.0 && disjoint.margin <= 5.0, "disjoint_se", disjoint.margin);
}

void entropy_limit(Verdict& v) {
  PhysicalConstants c;
  auto s = build_scalar_lattice_space({1, 1.0}, 0.0, {-14.0, 14.0, 281}, c);
  Field rho = normalized_gaussian(s, 1.0);
  auto rep = small_dt_limit_report(rho, s, c, {1e-2, 1e-3, 1e-4}, 100000, 4);
  const double slope_err = std::abs(rep.slope - c.hbar / 4.0) / (c.hbar / 4.0);
  v.require(slope_err <= 0.02, "kl_slope_rel", slope_err);
  auto k = build_fluctuation_kernel(s, 1e-3, c);
  auto kl = kl_mc(rho, s, k, 20000, 8);
  for (double alpha : {0.5, 2.0}) {
    double ratio = tsallis_mc(rho, alpha, s, k, 20000, 8).value / kl.value;
    v.require(std::abs(ratio - alpha) <= 0.03 * alpha, "tsallis_ratio_" + std::to_string(alpha).substr(0, 3), ratio);
  }
}

void madelung(Verdict& v) {
  auto dir = std::filesystem::temp_directory_path() / "entroq_acceptance_madelung";
  std::filesystem::remove_all(dir);
  auto cfg = parse_config("experiment = madelung-equivalence\nseed = 0\noutput_dir = " + dir.string() +
                          "\nspace.points = 512\nnumerics.dt = 2.5e-4\nnumerics.t_end = 1\nnumerics.levels = 2\n");
  auto r = run_experiment(cfg);
  for (const auto& ch : r.manifest["checks"])
    v.require(ch["pass"].get<bool>(), ch["name"].get<std::string>(), ch["measured"].get<double>());
  std::filesystem::remove_all(dir);
}

void ground_states(Verdict& v) {
  PhysicalConstants c;
  auto gs = ground_state(build_scalar_lattice_space({1, 1.0}, 1.0, {-8.0, 8.0, 161}, c), c, 1e-10);
  v.require(std::abs(gs.energy - 0.5) <= 1e-6, "oscillator_err", std::abs(gs.energy - 0.5));
  for (const auto& o : oracle("lattice_dispersion.json")) {
    int n = o["sites"];
    GridBounds b = n == 3 ? GridBounds{-6.5, 6.5, 33} : GridBounds{-7.0, 7.0, 49};
    auto s = build_scalar_lattice_space({n, o["spacing"].get<double>()}, o["mass"].get<double>(), b, c);
    double err = std::abs(ground_state(s, c, 1e-9).energy - o["E0"].get<double>());
    v.require(err <= 1e-6, "lattice" + std::to_string(n) + "_err", err);
  }
}

void dewitt(Verdict& v) {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Matrix3d b;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) b(i, j) = nd(gen);
    auto g = dewitt_supermetric(b * b.transpose() + 0.5 * Eigen::Matrix3d::Identity());
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int m = 0; m < 3; ++m)
          for (int n = 0; n < 3; ++n) {
            double sum = 0.0;
            for (int k = 0; k < 3; ++k)
              for (int l = 0; l < 3; ++l) sum += g.lower[t4(i, j, k, l)] * g.upper[t4(k, l, m, n)];
            worst = std::max(worst, std::abs(sum - 0.5 * ((i == m) * (j == n) + (i == n) * (j == m))));
          }
  }
  v.require(worst <= 1e-12, "max_identity_err", worst);
}

double max_abs(const Eigen::SparseMatrix<double>& m) {
  double r = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

void wdw(Verdict& v) {
  PhysicalConstants c;
  auto closed = build_frw_space(1, 1.0, {0.5, 3.0, 200}, c);
  auto flat = make_custom_space(SpaceKind::Frw, closed.axes, {Field(closed.size(), -0.7)}, closed.potential,
                                closed.measure, c);
  double same = max_abs(build_wdw_operator(flat, c, Ordering::Paper).matrix -
                        build_wdw_operator(flat, c, Ordering::Naive).matrix);
  v.require(same == 0.0, "constant_coeff_diff", same);
  auto p = build_wdw_operator(closed, c, Ordering::Paper), n = build_wdw_operator(closed, c, Ordering::Naive);
  double rel = (p.matrix - n.matrix).norm() / p.matrix.norm();
  v.require(rel > 1e-3, "kplus1_rel_diff", rel);
  PhysicalConstants ca = c;
  ca.alpha = 2.5;
  auto pa = build_wdw_operator(closed, ca);
  double split = max_abs(pa.matrix - (2.5 * pa.kinetic_unit + pa.potential));
  v.require(split == 0.0, "alpha_split", split);

  const double beta = 3.0 / (8.0 * kPi);
  std::vector<double> gaps;
  for (int pts : {101, 201, 401}) {
    auto s = build_frw_space(-1, 1.0, {0.5, 2.5, pts}, c);
    WdwBoundary b;
    b.left = std::polar(1.0, beta * 0.25);
    b.right = std::polar(1.0, beta * 6.25);
    auto sol = solve_wdw(build_wdw_operator(s, c), b, 1e-8);
    auto r = madelung_split_residual(WaveState{sol.raw, 0.0}, s, c);
    gaps.push_back(std::max({r.at("wdw_real").residual_norm, r.at("wdw_imag").residual_norm,
                             r.at("gap_real").residual_norm, r.at("gap_imag").residual_norm}));
  }
  double order = std::min(std::log2(gaps[0] / gaps[1]), std::log2(gaps[1] / gaps[2]));
  v.require(order >= 1.8, "split_order", order);
}

CField packet(const Axis& phi) {
  CField psi(phi.points);
  double norm = 0.0;
  for (int j = 0; j < phi.points; ++j) {
    double x = phi.at(j) + 0.5;
    psi[j] = (j == 0 || j == phi.points - 1) ? Complex(0.0) : std::polar(std::exp(-x * x / 1.44), 1.5 * phi.at(j));
    norm += phi.step() * std::norm(psi[j]);
  }
  for (auto& z : psi) z /= std::sqrt(norm);
  return psi;
}

struct OpenRun {
  ConfigSpace frw, coupled;
  BackgroundTrajectory bg;
  EmergentRun run;
};

OpenRun open_run(const PhysicalConstants& c, bool corrections, int steps, double dt) {
  OpenRun s;
  s.frw = build_frw_space(-1, 1.0, {0.5, 3.0, 101}, c);
  s.coupled = build_coupled_space(s.frw, {-6.0, 6.0, 121}, c);
  BackgroundOptions bo;
  bo.a0 = 1.0;
  bo.t_max = steps * dt;
  bo.samples = steps + 1;
  s.bg = solve_background(s.frw, c, bo);
  s.run = make_emergent_run(s.coupled, packet(s.coupled.axes[1]), 0.0, 1.0, {corrections, c.alpha});
  return s;
}

void emergent(Verdict& v, Clock::time_point suite_start) {
  PhysicalConstants c;
  const double dt = 2e-3;
  const int steps = 100;
  auto s = open_run(c, false, steps, dt);
  const Axis& phi = s.coupled.axes[1];
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    EmergentSlice prev = s.run.current();
    evolve_emergent(s.run, s.bg, c, dt, 1);
    const double a_mid = s.bg.a_at(prev.t + 0.5 * dt);
    auto sp = make_custom_space(SpaceKind::ScalarLattice, {phi}, {Field(phi.points, frw::kinetic_phi(a_mid, 1.0))},
                                Field(phi.points, 0.0), Field(phi.points, 1.0), c);
    WaveState w{prev.psi, prev.t};
    const double nrm = std::sqrt(wave_norm(w.psi, sp));
    for (auto& z : w.psi) z /= nrm;
    auto ref = evolve_schrodinger(w, sp, c, dt, 1).trajectory.back().psi;
    for (int j = 0; j < phi.points; ++j) worst = std::max(worst, std::abs(s.run.current().psi[j] - ref[j] * nrm));
  }
  v.require(worst <= 1e-8, "linear_step_diff", worst);

  auto on = open_run(c, true, 50, dt);
  evolve_emergent(on.run, on.bg, c, dt, 50);
  auto rep = suppression_scan(on.run, c, {0.0, 0.01, 0.1, 1.0}, {0.1, 0.3, 1.0});
  v.require(std::abs(rep.slope_grav - 1.0) <= 0.05, "slope_grav", rep.slope_grav);
  v.require(std::abs(rep.slope_hbar - 2.0) <= 0.05, "slope_hbar", rep.slope_hbar);

  // stationary phi-eigenstate on three a-slices of one instant
  auto cs = build_coupled_space(s.frw, {-4.0, 4.0, 81}, c);
  const Axis& ax = cs.axes[1];
  auto slice = [&](double a) {
    CField p(ax.points);
    for (int j = 0; j < ax.points; ++j)
      p[j] = std::pow(a, -1.5) * std::sin(kPi * (ax.at(j) + 4.0) / 8.0) * std::polar(1.0, -0.7 * 0.4);
    return p;
  };
  EmergentRun eig = make_emergent_run(cs, slice(1.0), 0.4, 1.0);
  eig.history.push_back({0.4, 1.01, slice(1.01)});
  eig.history.push_back({0.4, 1.02, slice(1.02)});
  auto g = gamma_terms(eig, c);
  double cl = 0.0, q = 0.0;
  for (std::size_t j = 0; j < g.gamma_cl.size(); ++j) {
    cl = std::max(cl, std::abs(g.gamma_cl[j]));
    q = std::max(q, std::abs(g.gamma_q[j]));
  }
  v.require(cl <= 1e-12, "eigen_gamma_cl", cl);
  v.require(q > 1e-3, "eigen_gamma_q", q);
  const double wall = seconds_since(suite_start);
  v.require(wall < 300.0, "suite_seconds", wall);
}

void action_gradient(Verdict& v) {
  PhysicalConstants c;
  c.grav = 0.5;
  auto s = build_frw_space(1, 1.0, {0.5, 2.0, 64}, c);
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.5, 1.5), w(-1.0, 1.0);
  std::vector<EnsembleState> tr(3);
  for (int t = 0; t < 3; ++t) {
    tr[t].time = 0.1 * t;
    for (std::size_t i = 0; i < s.size(); ++i) {
      tr[t].rho.push_back(u(gen));
      tr[t].S.push_back(w(gen));
    }
  }
  std::vector<double> times = {0.0, 0.1, 0.2};
  auto g = total_action_gradient(tr, s, c, times);
  double worst = 0.0;
  for (int t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < s.size(); ++i)
      for (int which = 0; which < 2; ++which) {
        auto up = tr, dn = tr;
        (which ? up[t].S : up[t].rho)[i] += 1e-5;
        (which ? dn[t].S : dn[t].rho)[i] -= 1e-5;
        double num = (total_action_gradient(up, s, c, times).value - total_action_gradient(dn, s, c, times).value) / 2e-5;
        double an = which ? g.d_S[t][i] : g.d_rho[t][i];
        worst = std::max(worst, std::abs(an - num) / std::max(std::abs(num), 1e-3));
      }
  v.require(worst <= 1e-6, "max_rel_err", worst);
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"1 gibbs closed form", gibbs},
      {"2 fluctuation covariance", covariance},
      {"3 uncertainty relation", uncertainty},
      {"4 small-dt entropy limit", entropy_limit},
      {"5 madelung equivalence", madelung},
      {"6 ground state energies", ground_states},
      {"7 supermetric contraction", dewitt},
      {"8 constraint operator ordering", wdw},
      {"9 emergent time", [&](Verdict& v) { emergent(v, start); }},
      {"10 action gradient", action_gradient},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    auto t0 = Clock::now();
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << (v.detail.tellp() > 0 ? "; " : "") << "exception: " << e.what();
    }
    if (!v.pass) ++failed;
    std::printf("%s criterion %s [%.2fs]: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0),
                v.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed in %.1fs\n", static_cast<int>(criteria.size()) - failed, criteria.size(),
              seconds_since(start));
  return failed == 0 ? 0 : 1;
}
