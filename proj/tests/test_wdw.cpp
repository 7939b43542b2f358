#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "entroq/wdw.hpp"

using namespace entroq;

namespace {

nlohmann::json oracle(const std::string& name) {
  std::ifstream in(std::string(ENTROQ_ORACLE_DIR) + "/" + name);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

double max_abs(const Eigen::SparseMatrix<double>& m) {
  double v = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
  return v;
}

const double kBeta = 3.0 / (8.0 * kPi);

Complex exact_mode(double a) { return std::polar(1.0, kBeta * a * a); }

WdwSolution exact_solution(int points, const PhysicalConstants& c) {
  auto s = build_frw_space(-1, 1.0, {0.5, 2.5, points}, c);
  auto op = build_wdw_operator(s, c);
  WdwBoundary b;
  b.left = exact_mode(0.5);
  b.right = exact_mode(2.5);
  return solve_wdw(op, b, 1e-8);
}

}  // namespace

TEST_CASE("orderings agree for constant coefficients") {
  PhysicalConstants c;
  auto frw = build_frw_space(1, 1.0, {0.5, 3.0, 50}, c);
  auto flat = make_custom_space(SpaceKind::Frw, frw.axes, {Field(frw.size(), -0.7)}, frw.potential, frw.measure, c);
  auto p = build_wdw_operator(flat, c, Ordering::Paper), n = build_wdw_operator(flat, c, Ordering::Naive);
  CHECK(max_abs(p.matrix - n.matrix) == 0.0);
}

TEST_CASE("orderings differ on the closed universe") {
  PhysicalConstants c;
  auto s = build_frw_space(1, 1.0, {0.5, 3.0, 200}, c);
  auto p = build_wdw_operator(s, c, Ordering::Paper), n = build_wdw_operator(s, c, Ordering::Naive);
  CHECK((p.matrix - n.matrix).norm() / p.matrix.norm() > 1e-3);
}

TEST_CASE("alpha scales only the kinetic block") {
  PhysicalConstants c1, c2;
  c2.alpha = 2.0;
  auto s = build_frw_space(1, 1.0, {0.5, 3.0, 40}, c1);
  auto o1 = build_wdw_operator(s, c1), o2 = build_wdw_operator(s, c2);
  CHECK(max_abs(o2.kinetic - 2.0 * o1.kinetic) == 0.0);
  CHECK(max_abs(o2.potential - o1.potential) == 0.0);
  CHECK(max_abs(o2.matrix - (2.0 * o2.kinetic_unit + o2.potential)) == 0.0);
  CHECK(max_abs(o1.matrix - (o1.kinetic_unit + o1.potential)) == 0.0);
}

TEST_CASE("divergence-form kinetic block is symmetric") {
  PhysicalConstants c;
  auto s = build_frw_space(1, 1.0, {0.5, 3.0, 60}, c);
  auto op = build_wdw_operator(s, c);
  const long m = static_cast<long>(s.size()) - 2;
  Eigen::SparseMatrix<double> k = op.kinetic_unit.block(1, 1, m, m);
  Eigen::SparseMatrix<double> kt = k.transpose();
  CHECK(max_abs(k - kt) <= 1e-12 * max_abs(k));
}

TEST_CASE("scalar lattices carry no operator") {
  auto s = build_scalar_lattice_space({1, 1.0}, 1.0, {-1, 1, 9}, {});
  CHECK_THROWS_AS(build_wdw_operator(s, {}), ValidationError);
  CHECK_THROWS_AS(ordering_from_string("weyl"), ValidationError);
}

TEST_CASE("flat universe: the solution has a constant flux") {
  PhysicalConstants c;
  auto s = build_frw_space(0, 1.0, {0.5, 2.5, 201}, c);
  auto op = build_wdw_operator(s, c);
  WdwBoundary b;
  b.left = 1.0;
  b.right = 3.0;
  auto sol = solve_wdw(op, b, 1e-8);
  const Field& k = s.kinetic[0];
  const double h = s.axes[0].step();
  std::vector<double> flux;
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    flux.push_back(0.5 * (k[i] + k[i + 1]) * (sol.raw[i + 1] - sol.raw[i]).real() / h);
  for (double f : flux) CHECK(f == doctest::Approx(flux.front()).epsilon(1e-8));
  // first integral: psi' kinetic = C, kinetic ~ 1/a, so psi = A + B a^2
  const double B = (3.0 - 1.0) / (2.5 * 2.5 - 0.25);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double a = s.coord(i, 0);
    CHECK(sol.raw[i].real() == doctest::Approx(1.0 + B * (a * a - 0.25)).epsilon(1e-4));
  }
}

TEST_CASE("closed universe matches the dense oracle") {
  auto o = oracle("wdw_kplus1.json");
  PhysicalConstants c;
  auto s = build_frw_space(o["curvature"], o["fiducial_volume"],
                           {o["a_min"].get<double>(), o["a_max"].get<double>(), o["points"].get<int>()}, c);
  auto op = build_wdw_operator(s, c);
  WdwBoundary b;
  b.left = o["left"].get<double>();
  b.right = o["right"].get<double>();
  auto sol = solve_wdw(op, b, 1e-8);
  auto ref = o["psi"].get<std::vector<double>>();
  double err = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) err = std::max(err, std::abs(sol.state.psi[i] - ref[i]));
  CHECK(err <= 1e-6);

  WdwBoundary scaled = b;
  scaled.left *= Complex(2.0, -1.0);
  scaled.right *= Complex(2.0, -1.0);
  auto sol2 = solve_wdw(op, scaled, 1e-8);
  double lin = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) lin = std::max(lin, std::abs(sol2.raw[i] - Complex(2.0, -1.0) * sol.raw[i]));
  CHECK(lin <= 1e-10);
}

TEST_CASE("exact oscillatory mode of the open universe") {
  PhysicalConstants c;
  auto sol = exact_solution(401, c);
  auto s = build_frw_space(-1, 1.0, {0.5, 2.5, 401}, c);
  double err = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) err = std::max(err, std::abs(sol.raw[i] - exact_mode(s.coord(i, 0))));
  CHECK(err <= 1e-4);
  CHECK(sol.residual <= 1e-8);
  CHECK(wdw_residual(build_wdw_operator(s, c), sol.raw) == doctest::Approx(sol.residual));
}

TEST_CASE("split residuals of a zero mode converge at second order") {
  PhysicalConstants c;
  std::vector<double> re, im, gre, gim;
  for (int pts : {101, 201, 401}) {
    auto s = build_frw_space(-1, 1.0, {0.5, 2.5, pts}, c);
    auto sol = exact_solution(pts, c);
    auto r = madelung_split_residual(WaveState{sol.raw, 0.0}, s, c);
    re.push_back(r.at("wdw_real").residual_norm);
    im.push_back(r.at("wdw_imag").residual_norm);
    gre.push_back(r.at("gap_real").residual_norm);
    gim.push_back(r.at("gap_imag").residual_norm);
    CHECK(r.at("masked").grid_points == 2);
  }
  for (int k = 0; k < 2; ++k) {
    CHECK(std::log2(re[k] / re[k + 1]) >= 1.8);
    CHECK(std::log2(im[k] / im[k + 1]) >= 1.8);
    CHECK(std::log2(gre[k] / gre[k + 1]) >= 1.8);
    CHECK(std::log2(gim[k] / gim[k + 1]) >= 1.8);
  }
}

TEST_CASE("split residuals: zero current and phase invariance") {
  PhysicalConstants c;
  auto s = build_frw_space(1, 1.0, {0.5, 2.0, 61}, c);
  WaveState real{CField(s.size()), 0.0};
  for (std::size_t i = 0; i < s.size(); ++i) real.psi[i] = 1.0 + 0.2 * s.coord(i, 0);
  CHECK(madelung_split_residual(real, s, c).at("var11").residual_norm == 0.0);

  auto sol = exact_solution(201, c);
  auto s2 = build_frw_space(-1, 1.0, {0.5, 2.5, 201}, c);
  WaveState w{sol.raw, 0.0}, rotated = w;
  for (auto& v : rotated.psi) v *= std::polar(1.0, 0.7);
  auto a = madelung_split_residual(w, s2, c), b = madelung_split_residual(rotated, s2, c);
  for (const char* key : {"wdw_real", "wdw_imag"})
    CHECK(b.at(key).residual_norm == doctest::Approx(a.at(key).residual_norm).epsilon(1e-9));
}

TEST_CASE("two degrees of freedom: marching in the scale factor") {
  PhysicalConstants c;
  auto frw = build_frw_space(-1, 1.0, {1.0, 2.0, 41}, c);
  auto cs = build_coupled_space(frw, {-3.0, 3.0, 61}, c);
  auto op = build_wdw_operator(cs, c);
  WdwBoundary b;
  for (int j = 0; j < 61; ++j) {
    double phi = cs.axes[1].at(j);
    Complex g = std::exp(-phi * phi / 0.5);
    b.slice_value.push_back(exact_mode(1.0) * g);
    b.slice_derivative.push_back(Complex(0.0, 2.0 * kBeta) * exact_mode(1.0) * g);
  }
  auto sol = solve_wdw(op, b, 1e-8);
  CHECK(sol.residual <= 1e-10);
  CHECK(std::abs(sol.raw[20 * 61 + 30]) > 0.1);

  auto coarse = build_coupled_space(build_frw_space(-1, 1.0, {1.0, 2.0, 5}, c), {-3.0, 3.0, 61}, c);
  CHECK_THROWS_WITH_AS(solve_wdw(build_wdw_operator(coarse, c), b, 1e-8), doctest::Contains("characteristic"),
                       ValidationError);

  auto euclid = make_custom_space(SpaceKind::Coupled, cs.axes, {Field(cs.size(), 1.0), Field(cs.size(), 1.0)},
                                  cs.potential, cs.measure, c);
  CHECK_THROWS_WITH_AS(solve_wdw(build_wdw_operator(euclid, c), b, 1e-8), doctest::Contains("Lorentzian"),
                       ValidationError);
  b.slice_value.pop_back();
  CHECK_THROWS_AS(solve_wdw(op, b, 1e-8), ValidationError);
}
