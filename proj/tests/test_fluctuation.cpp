#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "entroq/fluctuation.hpp"
#include "entroq/rng.hpp"

using namespace entroq;

namespace {

nlohmann::json oracle(const std::string& name) {
  std::ifstream in(std::string(ENTROQ_ORACLE_DIR) + "/" + name);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

Eigen::MatrixXd to_matrix(const nlohmann::json& rows) {
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

double scaled_err(const Eigen::MatrixXd& est, const Eigen::MatrixXd& ref) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < ref.rows(); ++i)
    for (Eigen::Index j = 0; j < ref.cols(); ++j)
      worst = std::max(worst, std::abs(est(i, j) - ref(i, j)) / std::sqrt(ref(i, i) * ref(j, j)));
  return worst;
}

FluctuationKernel single_site(double dt = 1e-3) {
  PhysicalConstants c;
  auto s = build_scalar_lattice_space({1, 1.0}, 0.0, {-1, 1, 5}, c);
  return build_fluctuation_kernel(s, dt, c);
}

}  // namespace

TEST_CASE("scalar kernel variance") {
  auto k = single_site();
  CHECK(k.theoretical_cov(0, 0) == doctest::Approx(5e-4));
  CHECK((k.theoretical_cov * k.omega_bar - Eigen::MatrixXd::Identity(1, 1)).norm() <= 1e-10);
}

TEST_CASE("two-site kernel is diagonal") {
  PhysicalConstants c;
  auto s = build_scalar_lattice_space({2, 1.0}, 0.0, {-1, 1, 5}, c);
  auto k = build_fluctuation_kernel(s, 1e-3, c);
  CHECK(k.theoretical_cov(0, 1) == 0.0);
  CHECK(k.theoretical_cov(1, 0) == 0.0);
}

TEST_CASE("doubling dt doubles the covariance") {
  auto a = single_site(1e-3), b = single_site(2e-3);
  CHECK(b.theoretical_cov(0, 0) == doctest::Approx(2.0 * a.theoretical_cov(0, 0)).epsilon(1e-15));
  CHECK(b.omega_bar(0, 0) == doctest::Approx(0.5 * a.omega_bar(0, 0)).epsilon(1e-15));
  CHECK_THROWS_AS(single_site(0.0), ValidationError);
}

TEST_CASE("gravity kernel matches the dense inverse exactly") {
  for (const auto& o : oracle("gravity_covariance.json")) {
    Eigen::Matrix3d h = to_matrix(o["h"]);
    PhysicalConstants c;
    c.hbar = o["hbar"];
    c.grav = o["grav"];
    c.lapse = o["lapse"];
    auto k = build_gravity_kernel(h, o["dt"].get<double>(), c);
    CHECK(k.dim() == 5);
    CHECK((k.theoretical_cov * k.omega_bar - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-10);
    Eigen::MatrixXd ref = to_matrix(o["covariance"]);
    CHECK(scaled_err(k.component_covariance(), ref) <= 1e-10);
  }
}

TEST_CASE("gravity samples reproduce the oracle covariance") {
  auto o = oracle("gravity_covariance.json")[1];
  PhysicalConstants c;
  auto k = build_gravity_kernel(to_matrix(o["h"]), o["dt"].get<double>(), c);
  auto batch = sample(k, 200000, 11);
  auto rep = covariance_check(batch);
  CHECK(rep.consistent);
  Eigen::MatrixXd comp = k.basis * rep.estimated_cov * k.basis.transpose();
  CHECK(scaled_err(comp, to_matrix(o["covariance"])) <= 0.03);
}

TEST_CASE("sampling is deterministic and centered") {
  auto k = single_site();
  auto a = sample(k, 100000, 42), b = sample(k, 100000, 42), c = sample(k, 100000, 43);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  double mean = a.samples.col(0).mean();
  double se = std::sqrt(k.theoretical_cov(0, 0) / 100000.0);
  CHECK(std::abs(mean) <= 4.0 * se);
}

TEST_CASE("single-site variance from a million samples") {
  auto rep = covariance_check(sample(single_site(), 1000000, 5));
  CHECK(rep.estimated_cov(0, 0) == doctest::Approx(5e-4).epsilon(0.01));
  CHECK(rep.max_rel_err <= 0.01);
  CHECK(rep.consistent);
}

TEST_CASE("covariance error decays at the Monte Carlo rate") {
  auto k = single_site();
  std::vector<double> x, y;
  for (std::int64_t n : {10000, 100000, 1000000}) {
    double ms = 0.0;
    const int reps = 16;
    for (int r = 0; r < reps; ++r) {
      double e = covariance_check(sample(k, n, 1000 + r)).max_rel_err;
      ms += e * e;
    }
    x.push_back(std::log10(static_cast<double>(n)));
    y.push_back(std::log10(std::sqrt(ms / reps)));
  }
  double slope = fit_line(x, y).slope;
  CHECK(slope >= -0.6);
  CHECK(slope <= -0.4);
}

TEST_CASE("all-zero batch is flagged") {
  auto k = single_site();
  SampleBatch b;
  b.kernel = std::make_shared<const FluctuationKernel>(k);
  b.samples.setZero(1000, 1);
  auto rep = covariance_check(b);
  CHECK(rep.estimated_cov(0, 0) == 0.0);
  CHECK_FALSE(rep.consistent);
}

TEST_CASE("uncertainty relation") {
  PhysicalConstants c;
  auto s1 = build_scalar_lattice_space({1, 1.0}, 0.0, {-1, 1, 5}, c);
  auto batch = sample(build_fluctuation_kernel(s1, 1e-3, c), 200000, 9);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  auto r1 = uncertainty_check(batch, one, one);
  CHECK(r1.bound == doctest::Approx(0.5));
  CHECK(r1.margin <= 5.0);
  auto r2 = uncertainty_check(batch, 2.0 * one, one);
  CHECK(r2.bound == doctest::Approx(1.0));
  CHECK(r2.cross_cov_estimate == doctest::Approx(2.0 * r1.cross_cov_estimate));

  auto s2 = build_scalar_lattice_space({2, 1.0}, 0.0, {-1, 1, 5}, c);
  auto b2 = sample(build_fluctuation_kernel(s2, 1e-3, c), 200000, 9);
  Eigen::Vector2d f(1.0, 0.0), g(0.0, 1.0);
  auto r3 = uncertainty_check(b2, f, g);
  CHECK(r3.bound == 0.0);
  CHECK(r3.margin <= 5.0);
  CHECK_THROWS_AS(uncertainty_check(b2, one, one), ValidationError);
}

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using P = Philox4x32;
  CHECK(P::generate({0u, 0u, 0u, 0u}, {0u, 0u}) == P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(P::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(P::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}
